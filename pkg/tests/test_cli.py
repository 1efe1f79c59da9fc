import hashlib
import json

import pytest
import yaml

from src.cli import main
from src.config import parse_config
from src.errors import ResourceCapError
from src.runner import ExperimentRunner
from src.settings import Settings

PROP3 = {
    'experiment': 'prop3',
    'seed': 0,
    'prop3': {'dim': 16, 'instances': 4, 'deficient_rank': 8, 'observable_rank': 2},
}


@pytest.fixture(autouse=True)
def workspace(monkeypatch, tmp_path):
    for name in ('FIELDCONC_MAX_DENSE_DIM', 'FIELDCONC_WORKERS', 'FIELDCONC_OUTPUT_DIR', 'FIELDCONC_LOG_LEVEL'):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_config(path, raw):
    path.write_text(yaml.safe_dump(raw), encoding='utf-8')
    return str(path)


def run_dirs(root, experiment):
    return sorted(root.glob(f"{experiment}-*"))


def quiet(*args, **kwargs):
    pass


def test_list_experiments(capsys):
    assert main(['list-experiments']) == 0
    out = capsys.readouterr().out
    for name in ('prop3', 'tails', 'concentration', 'adler', 'helicity', 'sample', 'spectrum'):
        assert name in out


def test_validate(workspace, capsys):
    good = write_config(workspace / 'good.yaml', PROP3)
    assert main(['validate', good]) == 0
    assert 'valid prop3 config' in capsys.readouterr().out

    bad = write_config(workspace / 'bad.yaml', {'experiment': 'concentration', 'grid': {'d': 1, 'n': 20}})
    assert main(['validate', bad]) == 2
    assert 'grid.n' in capsys.readouterr().err


def test_run_writes_checksummed_artifacts(workspace):
    config = write_config(workspace / 'prop3.yaml', PROP3)
    out = workspace / 'out'
    assert main(['run', config, '--out', str(out)]) == 0

    (run_dir,) = run_dirs(out, 'prop3')
    manifest = json.loads((run_dir / 'manifest.json').read_text(encoding='utf-8'))
    names = {entry['name'] for entry in manifest['files']}
    assert names == {'report.json', 'prop3.csv'}
    for entry in manifest['files']:
        assert hashlib.sha256((run_dir / entry['name']).read_bytes()).hexdigest() == entry['sha256']
    assert manifest['passed'] is True
    assert manifest['failures'] == []
    assert not (run_dir / 'failures.json').exists()

    report = json.loads((run_dir / 'report.json').read_text(encoding='utf-8'))
    assert report['verdicts'][0]['name'] == 'spectra_agree'
    assert report['config_hash'] == manifest['config_hash']


def test_rerun_needs_force_and_is_reproducible(workspace, capsys):
    config = write_config(workspace / 'prop3.yaml', PROP3)
    out = str(workspace / 'out')
    assert main(['run', config, '--out', out]) == 0
    (run_dir,) = run_dirs(workspace / 'out', 'prop3')
    first = json.loads((run_dir / 'manifest.json').read_text(encoding='utf-8'))['files']

    assert main(['run', config, '--out', out]) == 2
    assert 'already exists' in capsys.readouterr().err

    assert main(['run', config, '--out', out, '--force', '--workers', '3']) == 0
    second = json.loads((run_dir / 'manifest.json').read_text(encoding='utf-8'))['files']
    assert first == second


def test_seed_override_changes_directory(workspace):
    config = write_config(workspace / 'prop3.yaml', PROP3)
    out = workspace / 'out'
    assert main(['run', config, '--out', str(out)]) == 0
    assert main(['run', config, '--out', str(out), '--seed', '1']) == 0
    assert len(run_dirs(out, 'prop3')) == 2


def test_output_dir_from_environment(workspace, monkeypatch):
    monkeypatch.setenv('FIELDCONC_OUTPUT_DIR', str(workspace / 'env-out'))
    config = write_config(workspace / 'prop3.yaml', PROP3)
    assert main(['run', config]) == 0
    assert len(run_dirs(workspace / 'env-out', 'prop3')) == 1


def test_dense_cap_exit_code(workspace, monkeypatch, capsys):
    monkeypatch.setenv('FIELDCONC_MAX_DENSE_DIM', '8')
    config = write_config(workspace / 'prop3.yaml', PROP3)
    assert main(['run', config, '--out', str(workspace / 'out')]) == 3
    assert 'dense cap' in capsys.readouterr().err


def test_failed_verdict_exit_code(workspace):
    raw = {**PROP3, 'prop3': {**PROP3['prop3'], 'tol': 1e-30}}
    config = write_config(workspace / 'strict.yaml', raw)
    out = workspace / 'out'
    assert main(['run', config, '--out', str(out)]) == 1

    (run_dir,) = run_dirs(out, 'prop3')
    failures = json.loads((run_dir / 'failures.json').read_text(encoding='utf-8'))
    assert [entry['name'] for entry in failures['failures']] == ['spectra_agree']
    manifest = json.loads((run_dir / 'manifest.json').read_text(encoding='utf-8'))
    assert manifest['passed'] is False
    assert 'failures.json' in {entry['name'] for entry in manifest['files']}


def test_bad_workers_is_config_error(workspace, capsys):
    config = write_config(workspace / 'prop3.yaml', PROP3)
    assert main(['run', config, '--workers', '0']) == 2
    assert 'workers' in capsys.readouterr().err


def test_runner_checks_dense_cap(workspace):
    runner = ExperimentRunner(parse_config(PROP3), settings=Settings(max_dense_dim=4), out=workspace, echo=quiet)
    with pytest.raises(ResourceCapError):
        runner.run()
    assert not runner.run_dir.exists()


def test_runner_tails_rank_one(workspace):
    config = parse_config({
        'experiment': 'tails',
        'tails': {'kind': 'complex', 'eigenvalues': [1.0], 'u_grid': [0.0, 1.0, 2.0], 'mc_samples': 200_000},
    })
    manifest = ExperimentRunner(config, out=workspace, echo=quiet).run()
    report = json.loads((workspace / manifest.directory / 'report.json').read_text(encoding='utf-8'))
    verdicts = {v['name']: v['passed'] for v in report['verdicts']}
    assert verdicts['exact_rank_one']
    assert verdicts['residues_match_cf']
    assert verdicts['asymptote_ratio']
    assert manifest.passed


def test_runner_sample_dump(workspace):
    config = parse_config({
        'experiment': 'sample',
        'seed': 3,
        'grid': {'d': 1, 'L': 5.0, 'n': 21, 'N': 1},
        'sampling': {'kind': 'real', 'method': 'rejection', 'u_grid': [1.0], 'n_samples': 200, 'dump': 3},
    })
    manifest = ExperimentRunner(config, out=workspace, echo=quiet).run()
    run_dir = workspace / manifest.directory
    header = (run_dir / 'samples.csv').read_text(encoding='utf-8').splitlines()[0]
    assert header == 'x0,component,sample_0,sample_1,sample_2'
    assert len((run_dir / 'samples.csv').read_text(encoding='utf-8').splitlines()) == 22
    assert (run_dir / 'sample_Q.csv').exists()
    assert manifest.passed


def test_runner_concentration(workspace):
    config = parse_config({
        'experiment': 'concentration',
        'seed': 7,
        'grid': {'d': 1, 'L': 5.0, 'n': 41, 'N': 1},
        'sampling': {'kind': 'complex', 'u_grid': [4.0, 16.0, 256.0], 'u_relative': False,
                     'epsilon': 0.5, 'n_samples': 2000},
    })
    manifest = ExperimentRunner(config, out=workspace, workers=2, echo=quiet).run()
    rows = (workspace / manifest.directory / 'concentration.csv').read_text(encoding='utf-8').splitlines()
    assert len(rows) == 4
    assert manifest.passed


def test_runner_spectrum_routes_agree(workspace):
    config = parse_config({
        'experiment': 'spectrum',
        'grid': {'d': 3, 'L': 2.0, 'n': 5, 'N': 3},
        'kernel': {'type': 'turbulence'},
        'observable': {'type': 'helicity'},
    })
    manifest = ExperimentRunner(config, out=workspace, echo=quiet).run()
    report = json.loads((workspace / manifest.directory / 'report.json').read_text(encoding='utf-8'))
    assert report['results']['mismatch'] <= 1e-9
    assert manifest.passed


@pytest.mark.parametrize('kind', ['complex', 'real'])
def test_runner_tails_repeated_top_eigenvalue(workspace, kind):
    config = parse_config({
        'experiment': 'tails',
        'tails': {'kind': kind, 'eigenvalues': [1.0, 1.0, 0.2], 'u_grid': [0.0, 2.0, 5.0], 'mc_samples': 200_000},
    })
    manifest = ExperimentRunner(config, out=workspace, echo=quiet).run()
    report = json.loads((workspace / manifest.directory / 'report.json').read_text(encoding='utf-8'))
    verdicts = {v['name']: v['passed'] for v in report['verdicts']}
    assert report['results']['g1'] == 2
    assert 'residues_match_cf' not in verdicts
    assert verdicts['asymptote_ratio']
    assert verdicts['monte_carlo_within_3se']
    assert manifest.passed
