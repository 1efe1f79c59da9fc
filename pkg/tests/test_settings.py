import pytest

from src.errors import ConfigError
from src.settings import DEFAULT_MAX_DENSE_DIM, load_settings

ENV_VARS = ('FIELDCONC_MAX_DENSE_DIM', 'FIELDCONC_WORKERS', 'FIELDCONC_OUTPUT_DIR', 'FIELDCONC_LOG_LEVEL')


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ENV_VARS:
        monkeypatch.delenv(name, raising=False)


def test_defaults(monkeypatch):
    monkeypatch.setattr('os.cpu_count', lambda: 6)
    settings = load_settings(dotenv=False)
    assert settings.max_dense_dim == DEFAULT_MAX_DENSE_DIM
    assert settings.workers == 6
    assert settings.output_dir == 'results'
    assert settings.log_level == 'WARNING'


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv('FIELDCONC_MAX_DENSE_DIM', ' 512 ')
    monkeypatch.setenv('FIELDCONC_WORKERS', '2')
    monkeypatch.setenv('FIELDCONC_OUTPUT_DIR', 'runs')
    monkeypatch.setenv('FIELDCONC_LOG_LEVEL', 'debug')
    settings = load_settings(dotenv=False)
    assert settings.max_dense_dim == 512
    assert settings.workers == 2
    assert settings.output_dir == 'runs'
    assert settings.log_level == 'DEBUG'


@pytest.mark.parametrize('name, value', [
    ('FIELDCONC_MAX_DENSE_DIM', 'lots'),
    ('FIELDCONC_MAX_DENSE_DIM', '0'),
    ('FIELDCONC_WORKERS', '-2'),
    ('FIELDCONC_LOG_LEVEL', 'chatty'),
])
def test_invalid_environment(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ConfigError) as excinfo:
        load_settings(dotenv=False)
    assert excinfo.value.path == name


def test_dotenv_file(monkeypatch, tmp_path):
    (tmp_path / '.env').write_text('FIELDCONC_MAX_DENSE_DIM=77\n', encoding='utf-8')
    monkeypatch.chdir(tmp_path)
    assert load_settings().max_dense_dim == 77
    monkeypatch.delenv('FIELDCONC_MAX_DENSE_DIM', raising=False)
