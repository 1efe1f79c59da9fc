"""
Covariance kernels: stationary scalar families and the isotropic
incompressible (solenoidal) tensor kernel of homogeneous turbulence,

    C_ij(r) = (2E/3) f(x) d_ij + (E/3) x f'(x) (d_ij - r_i r_j / x^2),  x = |r|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

# Below this radius (in units of the Taylor microscale) f'(x)/x is replaced by f''(0).
SERIES_RADIUS = 1e-6


@dataclass(frozen=True)
class ScalarKernel:
    """
    Stationary scalar covariance C(x, y) = variance * rho(|x - y| / length).
    """

    family: str = 'squared-exponential'
    length: float = 1.0
    variance: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in SCALAR_FAMILIES:
            raise ValueError(f"unknown scalar kernel family {self.family!r}; expected one of {sorted(SCALAR_FAMILIES)}")
        if not self.length > 0:
            raise ValueError(f"correlation length must be positive, got {self.length}")
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    @property
    def components(self):
        return 1

    def of_distance(self, r):
        return self.variance * SCALAR_FAMILIES[self.family](np.asarray(r, dtype=float) / self.length)


SCALAR_FAMILIES = {
    'squared-exponential': lambda s: np.exp(-0.5 * s * s),
    'exponential': lambda s: np.exp(-s),
}


class GaussianShape:
    """
    f(x) = exp(-x^2 / (2 lam^2)), the default longitudinal correlation.
    """

    name = 'gaussian'

    def derivatives(self, x, lam):
        x = np.asarray(x, dtype=float)
        f = np.exp(-0.5 * (x / lam) ** 2)
        l2 = lam * lam
        d1 = -x / l2 * f
        d2 = (x * x / l2 - 1.0) / l2 * f
        d3 = (3.0 * x - x ** 3 / l2) / (l2 * l2) * f
        return f, d1, d2, d3

    def fprime_over_x(self, x, lam):
        # exact for all x, no 0/0 at the origin
        x = np.asarray(x, dtype=float)
        return -np.exp(-0.5 * (x / lam) ** 2) / (lam * lam)


SHAPES = {GaussianShape.name: GaussianShape()}


@dataclass(frozen=True)
class TurbulenceKernel:
    """
    Isotropic incompressible velocity covariance.

    ``energy`` is E (so <|v|^2> = 2E), ``taylor_microscale`` is lam_T with
    f(x) = 1 - x^2 / (2 lam_T^2) + O(x^4).
    """

    energy: float = 1.0
    taylor_microscale: float = 1.0
    shape: str = 'gaussian'

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape function {self.shape!r}; expected one of {sorted(SHAPES)}")
        if not self.energy > 0:
            raise ValueError(f"energy must be positive, got {self.energy}")
        if not self.taylor_microscale > 0:
            raise ValueError(f"Taylor microscale must be positive, got {self.taylor_microscale}")

    @property
    def components(self):
        return 3

    @property
    def shape_function(self):
        return SHAPES[self.shape]


def eval_scalar(kernel, x, y):
    """
    Scalar covariance between points (broadcasting over leading axes)
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    r = np.abs(diff) if diff.ndim == 0 else np.sqrt(np.sum(np.atleast_1d(diff) ** 2, axis=-1))
    return kernel.of_distance(r)


def f_derivatives(kernel, x):
    """
    (f, f', f'', f''') of the configured shape at radius x >= 0
    """
    return kernel.shape_function.derivatives(x, kernel.taylor_microscale)


def eval_tensor(kernel, r):
    """
    3x3 covariance C_ij(r) for separations r of shape (..., 3).

    Uses x f'(x) (d_ij - r_i r_j / x^2) = (f'(x)/x) (x^2 d_ij - r_i r_j), which
    has no singularity at r = 0; returns exactly (2E/3) I there.
    """
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != 3:
        raise DimensionError(f"tensor kernel needs 3-vectors, got trailing size {r.shape[-1]}")
    lam = kernel.taylor_microscale
    x2 = np.sum(r * r, axis=-1)
    x = np.sqrt(x2)
    f = f_derivatives(kernel, x)[0]
    g = kernel.shape_function.fprime_over_x(x, lam)
    # series branch: f'(x)/x -> f''(0) = -1/lam^2
    g = np.where(x < SERIES_RADIUS * lam, -1.0 / (lam * lam), g)

    E = kernel.energy
    eye = np.eye(3)
    outer = r[..., :, None] * r[..., None, :]
    isotropic = (2.0 * E / 3.0) * f[..., None, None] * eye
    transverse = (E / 3.0) * g[..., None, None] * (x2[..., None, None] * eye - outer)
    return isotropic + transverse


def divergence_defect(kernel, separations, step):
    """
    max_j |sum_i d_i C_ij(r)| over separations, by central differences of size ``step``
    """
    separations = np.atleast_2d(np.asarray(separations, dtype=float))
    divergence = np.zeros((separations.shape[0], 3))
    for i in range(3):
        shift = np.zeros(3)
        shift[i] = step
        forward = eval_tensor(kernel, separations + shift)
        backward = eval_tensor(kernel, separations - shift)
        divergence += (forward[:, i, :] - backward[:, i, :]) / (2.0 * step)
    return float(np.max(np.abs(divergence)))
