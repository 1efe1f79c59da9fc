"""
Experiment configuration: YAML files validated into frozen dataclasses.

Every block rejects unknown keys and reports the dotted path of the first
offending entry, so ``grid.n: 20`` fails with ``grid.n: ...`` before any
computation starts.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .concentration import DEFAULT_EPSILON, MODES
from .errors import ConfigError
from .grid import SUPPORTED_DIMENSIONS
from .kernels import SCALAR_FAMILIES, SHAPES
from .sampling import DEFAULT_BUDGET, DEFAULT_STREAMS, KINDS, METHODS, MC_METHODS
from .spectral import DEFAULT_REL_TOL

EXPERIMENTS = {
    'prop3': "nonzero spectra of C^1/2 O C^1/2 and C.O on random instances",
    'spectrum': "spectrum of M and of C.O (low-rank route) with degeneracy report",
    'tails': "P(Q > u): characteristic function, asymptote, residues and Monte Carlo",
    'concentration': "P_u(|delta_phi|^2 > eps |phi_bar|^2) over a u grid",
    'adler': "high local maximum: mode check, conditioned shape, concentration",
    'helicity': "large local helicity: spectrum refinement, mode audits, conditioned structure",
    'sample': "conditioned field samples dumped as CSV",
}

GRID_EXPERIMENTS = ('spectrum', 'concentration', 'adler', 'sample')
KERNEL_TYPES = ('scalar', 'turbulence')
OBSERVABLE_TYPES = ('point-intensity', 'helicity')


@dataclass(frozen=True)
class GridConfig:
    d: int = 1
    L: float = 5.0
    n: int = 201
    N: int = 1


@dataclass(frozen=True)
class KernelConfig:
    type: str = 'scalar'
    family: str = 'squared-exponential'
    length: float = 1.0
    variance: float = 1.0
    energy: float = 1.0
    taylor_microscale: float = 1.0
    shape: str = 'gaussian'


@dataclass(frozen=True)
class ObservableConfig:
    type: str = 'point-intensity'
    point: tuple = ()


@dataclass(frozen=True)
class SamplingConfig:
    """
    ``u_relative`` puts the u grid in units of <Q> (of <Q^2>^1/2 when <Q> <= 0).
    ``dump`` is the number of conditioned fields written by the sample experiment.
    """

    kind: str = 'complex'
    method: str = 'auto'
    u_grid: tuple = (4.0, 8.0, 16.0, 32.0)
    u_relative: bool = True
    epsilon: float = DEFAULT_EPSILON
    a: float | None = None
    n_samples: int = 10_000
    mode: str = 'upper'
    n_streams: int = DEFAULT_STREAMS
    budget: int = DEFAULT_BUDGET
    c: float | None = None
    rel_tol: float = DEFAULT_REL_TOL
    dump: int = 5


@dataclass(frozen=True)
class Prop3Config:
    dim: int = 64
    instances: int = 20
    deficient_rank: int = 32
    observable_rank: int = 3
    tol: float = 1e-8


@dataclass(frozen=True)
class TailsConfig:
    kind: str = 'complex'
    eigenvalues: tuple = (1.0, 0.4, -0.3)
    u_grid: tuple = (0.0, 1.0, 2.0, 5.0, 10.0)
    mc_samples: int = 1_000_000
    mc_method: str = 'direct'
    asymptote_u: float | None = None


@dataclass(frozen=True)
class HelicityConfig:
    refinement_n: tuple = (17, 33, 65)
    rel_tol: float = DEFAULT_REL_TOL
    eigen_tol: float = 0.03
    ratio_band: float = 0.3
    angle_tol: float = 5.0
    audit_points: int = 20
    audit_n: int = 41
    conditioned: bool = True
    coarse_n: int = 9
    coarse_L: float = 2.0
    u_relative: tuple = (3.0, 6.0)
    n_samples: int = 2000


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    output_dir: str | None = None
    grid: GridConfig | None = None
    kernel: KernelConfig = field(default_factory=KernelConfig)
    observable: ObservableConfig = field(default_factory=ObservableConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    prop3: Prop3Config = field(default_factory=Prop3Config)
    tails: TailsConfig = field(default_factory=TailsConfig)
    helicity: HelicityConfig = field(default_factory=HelicityConfig)

    def as_dict(self):
        """Plain-dict form used for hashing; the output directory is not part of it."""
        data = asdict(self)
        data.pop('output_dir')
        return data


def _join(path, key):
    return f"{path}.{key}" if path else key


def _mapping(raw, path, allowed):
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(path, f"expected a mapping, got {type(raw).__name__}")
    for key in raw:
        if key not in allowed:
            raise ConfigError(_join(path, str(key)), f"unknown key; expected one of {sorted(allowed)}")
    return raw


def _int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _float(value, path, positive=False, optional=False):
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value}")
    return value


def _bool(value, path):
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected true or false, got {value!r}")
    return value


def _choice(value, path, choices):
    if value not in choices:
        raise ConfigError(path, f"expected one of {list(choices)}, got {value!r}")
    return value


def _floats(value, path, min_length=1):
    if not isinstance(value, (list, tuple)) or len(value) < min_length:
        raise ConfigError(path, f"expected a list of at least {min_length} numbers")
    return tuple(_float(item, f"{path}[{k}]") for k, item in enumerate(value))


def _ints(value, path, minimum=None):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "expected a non-empty list of integers")
    return tuple(_int(item, f"{path}[{k}]", minimum) for k, item in enumerate(value))


def _odd_points(value, path):
    value = _int(value, path, 3)
    if value % 2 == 0:
        raise ConfigError(path, f"points per axis must be odd so the origin is a node, got {value}")
    return value


def _build(cls, raw, path, parsers):
    values = _mapping(raw, path, parsers)
    return cls(**{key: parsers[key](value, _join(path, key)) for key, value in values.items()})


def _parse_grid(raw, path):
    return _build(GridConfig, raw, path, {
        'd': lambda v, p: _choice(_int(v, p), p, SUPPORTED_DIMENSIONS),
        'L': lambda v, p: _float(v, p, positive=True),
        'n': _odd_points,
        'N': lambda v, p: _int(v, p, 1),
    })


def _parse_kernel(raw, path):
    return _build(KernelConfig, raw, path, {
        'type': lambda v, p: _choice(v, p, KERNEL_TYPES),
        'family': lambda v, p: _choice(v, p, tuple(SCALAR_FAMILIES)),
        'length': lambda v, p: _float(v, p, positive=True),
        'variance': lambda v, p: _float(v, p, positive=True),
        'energy': lambda v, p: _float(v, p, positive=True),
        'taylor_microscale': lambda v, p: _float(v, p, positive=True),
        'shape': lambda v, p: _choice(v, p, tuple(SHAPES)),
    })


def _parse_observable(raw, path):
    return _build(ObservableConfig, raw, path, {
        'type': lambda v, p: _choice(v, p, OBSERVABLE_TYPES),
        'point': lambda v, p: _floats(v, p),
    })


def _parse_sampling(raw, path):
    sampling = _build(SamplingConfig, raw, path, {
        'kind': lambda v, p: _choice(v, p, KINDS),
        'method': lambda v, p: _choice(v, p, METHODS),
        'u_grid': lambda v, p: _floats(v, p),
        'u_relative': _bool,
        'epsilon': lambda v, p: _float(v, p, positive=True),
        'a': lambda v, p: _float(v, p, positive=True, optional=True),
        'n_samples': lambda v, p: _int(v, p, 1),
        'mode': lambda v, p: _choice(v, p, MODES),
        'n_streams': lambda v, p: _int(v, p, 1),
        'budget': lambda v, p: _int(v, p, 1),
        'c': lambda v, p: _float(v, p, optional=True),
        'rel_tol': lambda v, p: _float(v, p, positive=True),
        'dump': lambda v, p: _int(v, p, 0),
    })
    grid = sampling.u_grid
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(_join(path, 'u_grid'), "thresholds must be strictly increasing")
    return sampling


def _parse_prop3(raw, path):
    prop3 = _build(Prop3Config, raw, path, {
        'dim': lambda v, p: _int(v, p, 2),
        'instances': lambda v, p: _int(v, p, 1),
        'deficient_rank': lambda v, p: _int(v, p, 1),
        'observable_rank': lambda v, p: _int(v, p, 1),
        'tol': lambda v, p: _float(v, p, positive=True),
    })
    if prop3.deficient_rank > prop3.dim:
        raise ConfigError(_join(path, 'deficient_rank'), f"must not exceed dim = {prop3.dim}")
    if prop3.observable_rank > prop3.dim:
        raise ConfigError(_join(path, 'observable_rank'), f"must not exceed dim = {prop3.dim}")
    return prop3


def _parse_tails(raw, path):
    tails = _build(TailsConfig, raw, path, {
        'kind': lambda v, p: _choice(v, p, KINDS),
        'eigenvalues': lambda v, p: _floats(v, p),
        'u_grid': lambda v, p: _floats(v, p),
        'mc_samples': lambda v, p: _int(v, p, 1000),
        'mc_method': lambda v, p: _choice(v, p, MC_METHODS),
        'asymptote_u': lambda v, p: _float(v, p, optional=True),
    })
    if not any(value > 0 for value in tails.eigenvalues):
        raise ConfigError(_join(path, 'eigenvalues'), "need at least one positive eigenvalue")
    return tails


def _parse_helicity(raw, path):
    return _build(HelicityConfig, raw, path, {
        'refinement_n': lambda v, p: tuple(_odd_points(item, f"{p}[{k}]") for k, item in enumerate(_ints(v, p))),
        'rel_tol': lambda v, p: _float(v, p, positive=True),
        'eigen_tol': lambda v, p: _float(v, p, positive=True),
        'ratio_band': lambda v, p: _float(v, p, positive=True),
        'angle_tol': lambda v, p: _float(v, p, positive=True),
        'audit_points': lambda v, p: _int(v, p, 1),
        'audit_n': _odd_points,
        'conditioned': _bool,
        'coarse_n': _odd_points,
        'coarse_L': lambda v, p: _float(v, p, positive=True),
        'u_relative': lambda v, p: _floats(v, p),
        'n_samples': lambda v, p: _int(v, p, 1),
    })


SECTIONS = {
    'grid': _parse_grid,
    'kernel': _parse_kernel,
    'observable': _parse_observable,
    'sampling': _parse_sampling,
    'prop3': _parse_prop3,
    'tails': _parse_tails,
    'helicity': _parse_helicity,
}


def _check_consistency(config):
    name = config.experiment
    if name in GRID_EXPERIMENTS and config.grid is None:
        raise ConfigError('grid', f"required for experiment {name!r}")
    if name == 'helicity':
        if config.kernel.type != 'turbulence':
            raise ConfigError('kernel.type', "helicity needs the turbulence kernel")
        return
    if config.grid is None:
        return

    grid, kernel, observable = config.grid, config.kernel, config.observable
    if kernel.type == 'scalar' and grid.N != 1:
        raise ConfigError('grid.N', f"scalar kernel needs N = 1, got {grid.N}")
    if kernel.type == 'turbulence' and (grid.d != 3 or grid.N != 3):
        raise ConfigError('grid', "turbulence kernel needs d = 3 and N = 3")
    if observable.type == 'helicity' and kernel.type != 'turbulence':
        raise ConfigError('observable.type', "helicity needs the turbulence kernel")
    if observable.point and len(observable.point) != grid.d:
        raise ConfigError('observable.point', f"expected {grid.d} coordinates, got {len(observable.point)}")
    if name == 'adler' and (kernel.type != 'scalar' or observable.type != 'point-intensity'):
        raise ConfigError('experiment', "adler needs a scalar kernel and the point-intensity observable")
    if name in ('concentration', 'adler') and len(config.sampling.u_grid) < 3:
        raise ConfigError('sampling.u_grid', "a concentration curve needs at least 3 thresholds")


def parse_config(raw):
    """
    Validate a mapping (as loaded from YAML) into an ExperimentConfig
    """
    allowed = {'experiment', 'seed', 'output_dir', *SECTIONS}
    raw = _mapping(raw, '', allowed)
    if 'experiment' not in raw:
        raise ConfigError('experiment', "missing; expected one of " + ", ".join(EXPERIMENTS))
    values = {'experiment': _choice(raw['experiment'], 'experiment', tuple(EXPERIMENTS))}
    if 'seed' in raw:
        values['seed'] = _int(raw['seed'], 'seed', 0)
    if raw.get('output_dir') is not None:
        if not isinstance(raw['output_dir'], str):
            raise ConfigError('output_dir', f"expected a path string, got {raw['output_dir']!r}")
        values['output_dir'] = raw['output_dir']
    for key, parser in SECTIONS.items():
        if key in raw:
            values[key] = parser(raw[key], key)

    config = ExperimentConfig(**values)
    _check_consistency(config)
    return config


def load_config(path):
    """
    Read and validate a YAML experiment config
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError('', f"cannot read config {path}: {e}") from e
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError('', f"invalid YAML in {path}: {e}") from e
    return parse_config(raw)
