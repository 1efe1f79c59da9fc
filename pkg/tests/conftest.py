from types import SimpleNamespace

import numpy as np
import pytest

from src.grid import build_grid
from src.kernels import ScalarKernel, TurbulenceKernel
from src.operators import assemble_covariance, observable_point_intensity, sqrt_psd
from src.sampling import basis_from_operators
from src.utils.rng import stream_generator


@pytest.fixture
def rng():
    return stream_generator(1234, 0)


@pytest.fixture
def line_grid():
    return build_grid(1, 5.0, 5, 1)


@pytest.fixture(scope='session')
def adler_case():
    """1D squared-exponential field on [-5, 5] with O = |0><0|."""
    grid = build_grid(1, 5.0, 41, 1)
    kernel = ScalarKernel('squared-exponential', 1.0, 1.0)
    C = assemble_covariance(grid, kernel)
    C_half = sqrt_psd(C)
    O = observable_point_intensity(grid, [0.0])
    return SimpleNamespace(grid=grid, kernel=kernel, C=C, C_half=C_half, O=O)


@pytest.fixture(scope='session')
def adler_bases(adler_case):
    case = adler_case
    return {
        kind: basis_from_operators(case.C, case.O, kind, C_half=case.C_half)
        for kind in ('real', 'complex')
    }


@pytest.fixture(scope='session')
def flow_grid():
    return build_grid(3, 2.0, 5, 3)


@pytest.fixture(scope='session')
def turbulence():
    return TurbulenceKernel(energy=1.0, taylor_microscale=1.0)


def random_psd(rng, dim, rank=None):
    B = rng.standard_normal((dim, rank or dim))
    return B @ B.T


def random_symmetric(rng, dim):
    A = rng.standard_normal((dim, dim))
    return 0.5 * (A + A.T)


@pytest.fixture
def make_psd():
    return random_psd


@pytest.fixture
def make_symmetric():
    return random_symmetric


def cosine(a, b):
    return float(np.abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))


@pytest.fixture
def cos():
    return cosine
