import copy
import dataclasses
from pathlib import Path

import pytest

from src.config import EXPERIMENTS, load_config, parse_config
from src.errors import ConfigError
from src.utils.io import canonical_hash

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'configs'

BASE = {
    'experiment': 'concentration',
    'seed': 0,
    'grid': {'d': 1, 'L': 5.0, 'n': 41, 'N': 1},
    'kernel': {'type': 'scalar'},
    'sampling': {'kind': 'real', 'u_grid': [1.0, 2.0, 4.0]},
}


def _with(path, value):
    raw = copy.deepcopy(BASE)
    *parents, key = path.split('.')
    target = raw
    for parent in parents:
        target = target.setdefault(parent, {})
    if value is _DELETE:
        target.pop(key, None)
    else:
        target[key] = value
    return raw


_DELETE = object()


@pytest.mark.parametrize('path', sorted(CONFIG_DIR.glob('*.yaml')), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    config = load_config(path)
    assert config.experiment in EXPERIMENTS
    assert config.experiment == path.stem


def test_every_experiment_has_a_config():
    assert {path.stem for path in CONFIG_DIR.glob('*.yaml')} == set(EXPERIMENTS)


def test_defaults_fill_missing_blocks():
    config = parse_config(BASE)
    assert config.grid.n == 41
    assert config.kernel.family == 'squared-exponential'
    assert config.sampling.u_grid == (1.0, 2.0, 4.0)
    assert config.sampling.a is None
    assert config.observable.point == ()


@pytest.mark.parametrize('path, value, where', [
    ('grid.n', 20, 'grid.n'),
    ('grid.n', 'many', 'grid.n'),
    ('grid.L', -1.0, 'grid.L'),
    ('grid.d', 4, 'grid.d'),
    ('grid.N', 3, 'grid.N'),
    ('grid.bogus', 1, 'grid.bogus'),
    ('tails.bogus', 1, 'tails.bogus'),
    ('sampling.u_grid', [2.0, 1.0, 3.0], 'sampling.u_grid'),
    ('sampling.u_grid', [1.0, 2.0], 'sampling.u_grid'),
    ('sampling.kind', 'quaternion', 'sampling.kind'),
    ('sampling.epsilon', 0.0, 'sampling.epsilon'),
    ('sampling.u_relative', 'yes', 'sampling.u_relative'),
    ('kernel.length', 0, 'kernel.length'),
    ('observable.point', [0.0, 0.0], 'observable.point'),
    ('tails.eigenvalues', [-1.0, -0.5], 'tails.eigenvalues'),
    ('seed', True, 'seed'),
    ('seed', -3, 'seed'),
    ('experiment', 'fourier', 'experiment'),
    ('experiment', _DELETE, 'experiment'),
    ('grid', _DELETE, 'grid'),
])
def test_invalid_values_name_their_path(path, value, where):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(_with(path, value))
    assert excinfo.value.path == where
    assert str(excinfo.value).startswith(f"{where}:")


def test_helicity_needs_turbulence_kernel():
    raw = {'experiment': 'helicity', 'kernel': {'type': 'scalar'}}
    with pytest.raises(ConfigError) as excinfo:
        parse_config(raw)
    assert excinfo.value.path == 'kernel.type'


def test_helicity_refinement_needs_odd_points():
    raw = {'experiment': 'helicity', 'kernel': {'type': 'turbulence'}, 'helicity': {'refinement_n': [17, 32]}}
    with pytest.raises(ConfigError) as excinfo:
        parse_config(raw)
    assert excinfo.value.path == 'helicity.refinement_n[1]'


def test_prop3_rank_bounds():
    raw = {'experiment': 'prop3', 'prop3': {'dim': 8, 'deficient_rank': 9}}
    with pytest.raises(ConfigError) as excinfo:
        parse_config(raw)
    assert excinfo.value.path == 'prop3.deficient_rank'


def test_top_level_must_be_a_mapping():
    with pytest.raises(ConfigError):
        parse_config(['experiment', 'tails'])


def test_hash_ignores_output_directory():
    first = parse_config(BASE)
    second = parse_config(dict(BASE, output_dir='elsewhere'))
    assert second.output_dir == 'elsewhere'
    assert canonical_hash(first.as_dict()) == canonical_hash(second.as_dict())

    reseeded = dataclasses.replace(first, seed=1)
    assert canonical_hash(reseeded.as_dict()) != canonical_hash(first.as_dict())


def test_load_config_errors(tmp_path):
    broken = tmp_path / 'broken.yaml'
    broken.write_text('experiment: [tails\n', encoding='utf-8')
    with pytest.raises(ConfigError, match='invalid YAML'):
        load_config(broken)
    with pytest.raises(ConfigError, match='cannot read config'):
        load_config(tmp_path / 'missing.yaml')


def test_load_config_reports_schema_errors(tmp_path):
    path = tmp_path / 'even.yaml'
    path.write_text('experiment: concentration\ngrid: {d: 1, L: 5.0, n: 20, N: 1}\n', encoding='utf-8')
    with pytest.raises(ConfigError, match=r'grid\.n: points per axis must be odd'):
        load_config(path)
