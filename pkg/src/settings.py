import os
from dataclasses import dataclass

from dotenv import find_dotenv, load_dotenv

from .errors import ConfigError

DEFAULT_MAX_DENSE_DIM = 4096

_ENV_VARS = {
    'max_dense_dim': 'FIELDCONC_MAX_DENSE_DIM',
    'workers': 'FIELDCONC_WORKERS',
    'output_dir': 'FIELDCONC_OUTPUT_DIR',
    'log_level': 'FIELDCONC_LOG_LEVEL',
}


@dataclass(frozen=True)
class Settings:
    """Process-level knobs read from the environment (or a ``.env`` file)."""

    max_dense_dim: int = DEFAULT_MAX_DENSE_DIM
    workers: int = 1
    output_dir: str = 'results'
    log_level: str = 'WARNING'


def _positive_int(name, raw):
    try:
        value = int(raw.strip())
    except ValueError:
        raise ConfigError(name, f"expected a positive integer, got {raw!r}") from None
    if value <= 0:
        raise ConfigError(name, f"expected a positive integer, got {value}")
    return value


def load_settings(dotenv=True):
    """
    Read settings from environment variables, loading ``.env`` first
    """
    if dotenv:
        load_dotenv(find_dotenv(usecwd=True))

    values = {}
    raw = os.getenv(_ENV_VARS['max_dense_dim'])
    if raw:
        values['max_dense_dim'] = _positive_int(_ENV_VARS['max_dense_dim'], raw)

    raw = os.getenv(_ENV_VARS['workers'])
    if raw:
        values['workers'] = _positive_int(_ENV_VARS['workers'], raw)
    else:
        values['workers'] = os.cpu_count() or 1

    raw = os.getenv(_ENV_VARS['output_dir'])
    if raw and raw.strip():
        values['output_dir'] = raw.strip()

    raw = os.getenv(_ENV_VARS['log_level'])
    if raw and raw.strip():
        level = raw.strip().upper()
        if level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            raise ConfigError(_ENV_VARS['log_level'], f"unknown logging level {raw!r}")
        values['log_level'] = level

    return Settings(**values)
