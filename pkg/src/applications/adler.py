"""
High local maximum of a scalar field: O = |0><0|.

The only nonzero eigenvalue of C.O is C(0, 0) and its mode is C(x, 0), so a
field conditioned on |phi(0)|^2 > u looks more and more like t_1 C(x, 0).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..concentration import DEFAULT_EPSILON, concentration_curve
from ..errors import DimensionError
from ..kernels import ScalarKernel
from ..operators import as_array, build_M, observable_point_intensity, sqrt_psd
from ..spectral import eig_symmetric, lowrank_modes, transport_eigvec
from .helicity import conditioned_point, orthonormal_reference

logger = logging.getLogger(__name__)

ADLER_TOL = 1e-10


def _cosine(a, b):
    return float(np.abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))


@dataclass(frozen=True)
class AdlerModeReport:
    expected: float
    eigenvalue_lowrank: float
    eigenvalue_M: float
    eigenvalue_error: float
    cosine_lowrank: float
    cosine_M: float
    max_other: float
    tol: float
    passed: bool


def adler_mode_check(grid, C, kernel, point=None, tol=ADLER_TOL, C_half=None):
    """
    Top mode of C.O for O = point intensity, by the low-rank route and via M.

    Checks eigenvalue = C(point, point), transported mode proportional to
    C(., point), and every other eigenvalue of M equal to zero.
    """
    if grid.N != 1 or not isinstance(kernel, ScalarKernel):
        raise DimensionError("Adler check needs a scalar grid and a ScalarKernel")
    point = np.zeros(grid.d) if point is None else np.atleast_1d(np.asarray(point, dtype=float))
    observable = observable_point_intensity(grid, point)
    column = grid.flat_index(0, grid.node_index(point))
    # C~(., x0) in normalized coordinates is w C(., x0): the same ray as C(., x0)
    reference = as_array(C)[:, column]
    expected = float(kernel.of_distance(0.0))

    modes = lowrank_modes(C, observable)
    eigenvalue_lowrank = float(modes.spectrum.eigenvalues[0])
    cosine_lowrank = _cosine(modes.fields[:, 0], reference)

    if C_half is None:
        C_half = sqrt_psd(C)
    spectrum = eig_symmetric(build_M(C, observable, C_half=C_half))
    eigenvalue_M = float(spectrum.eigenvalues[0])
    cosine_M = _cosine(transport_eigvec(C_half, spectrum.vectors[:, 0]), reference)
    max_other = float(np.max(np.abs(spectrum.eigenvalues[1:]))) if spectrum.dim > 1 else 0.0

    error = max(abs(eigenvalue_lowrank - expected), abs(eigenvalue_M - expected)) / expected
    passed = bool(error <= tol
                  and min(cosine_lowrank, cosine_M) >= 1.0 - tol
                  and max_other <= tol * expected)
    return AdlerModeReport(expected, eigenvalue_lowrank, eigenvalue_M, error, cosine_lowrank, cosine_M,
                           max_other, tol, passed)


@dataclass(frozen=True)
class AdlerShapeReport:
    baseline: object
    points: list
    curve: object
    similarity_increasing: bool
    ratio_median_decreasing: bool

    @property
    def passed(self):
        return self.similarity_increasing and self.curve.passed


def adler_conditioned_shape(basis, grid, u_grid, n=10_000, seed=0, method='auto', epsilon=DEFAULT_EPSILON, a=None,
                            n_streams=4, point=None, **options):
    """
    Mean |cos| between conditioned samples and the ray of C(., point) for
    each u, with an unconditioned control arm, plus the concentration curve.
    """
    point = np.zeros(grid.d) if point is None else point
    column = grid.flat_index(0, grid.node_index(point))
    reference = orthonormal_reference(basis.transport @ basis.transport[column, :][:, None])

    # stream blocks: default floor 0, curve 1..K, shape points K+1..2K, control arm 2K+1
    offset = (len(u_grid) + 1) * n_streams
    baseline = conditioned_point(basis, float('-inf'), reference, n, 'rejection', seed, epsilon,
                                 n_streams=n_streams, first_stream=offset + len(u_grid) * n_streams, **options)
    points = [
        conditioned_point(basis, u, reference, n, method, seed, epsilon,
                          n_streams=n_streams, first_stream=offset + k * n_streams, **options)
        for k, u in enumerate(u_grid)
    ]
    curve = concentration_curve(basis, u_grid, epsilon, a, n, method, seed, n_streams=n_streams, **options)

    similarity = [p.mean_similarity for p in points]
    medians = [p.median_ratio for p in points]
    return AdlerShapeReport(
        baseline=baseline,
        points=points,
        curve=curve,
        similarity_increasing=all(b > a_ for a_, b in zip(similarity, similarity[1:])),
        ratio_median_decreasing=medians[-1] < medians[0],
    )
