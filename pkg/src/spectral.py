"""
Symmetric eigendecomposition with +/- indexing and degeneracy groups, the
low-rank spectrum of C.O, and the C^1/2 O C^1/2 versus C.O equivalence check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DimensionError, EmptySpectrumError, IndefiniteMatrixError, ResourceCapError
from .operators import PSD_TOL, LowRankForm, OperatorMatrix, as_array, build_M, check_symmetric
from .utils.io import array_hash

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-6
DEFAULT_ZERO_TOL = 1e-10
NONZERO_TOL = 1e-9
GENERAL_ROUTE_MAX_DIM = 512


@dataclass(frozen=True)
class Degeneracy:
    """A cluster of (numerically) equal eigenvalues: ``size`` entries starting at ``start``."""

    value: float
    start: int
    size: int

    @property
    def indices(self):
        return np.arange(self.start, self.start + self.size)


def degeneracy_groups(eigenvalues, rel_tol=DEFAULT_REL_TOL, scale=None):
    """
    Cluster a sorted eigenvalue list into degeneracy groups.

    Consecutive entries closer than ``rel_tol * scale`` share a group, with
    ``scale`` defaulting to the largest magnitude in the list. Positive and
    negative eigenvalues are grouped separately, each against its own extreme.
    """
    values = np.asarray(eigenvalues, dtype=float)
    if values.size == 0:
        return []
    if scale is None:
        scale = float(np.max(np.abs(values)))
    threshold = rel_tol * scale

    groups = []
    start = 0
    for k in range(1, values.size + 1):
        if k == values.size or abs(values[k] - values[k - 1]) > threshold:
            groups.append(Degeneracy(float(np.mean(values[start:k])), start, k - start))
            start = k
    return groups


@dataclass(frozen=True)
class Spectrum:
    """
    Full spectrum in descending order, eigenvectors as columns.

    Indexing: positive eigenvalues lambda_1 >= lambda_2 >= ... come
    first; negative ones lambda_-1 <= lambda_-2 <= ... are the tail read
    backwards. Groups are computed separately on each sign.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    rel_tol: float = DEFAULT_REL_TOL
    zero_tol: float = DEFAULT_ZERO_TOL
    positive_groups: list = field(default_factory=list)
    negative_groups: list = field(default_factory=list)

    @property
    def dim(self):
        return self.eigenvalues.size

    @property
    def scale(self):
        return float(np.max(np.abs(self.eigenvalues))) if self.dim else 0.0

    @property
    def n_positive(self):
        return int(np.sum(self.eigenvalues > self.zero_tol * self.scale))

    @property
    def n_negative(self):
        return int(np.sum(self.eigenvalues < -self.zero_tol * self.scale))

    @property
    def n_zero(self):
        return self.dim - self.n_positive - self.n_negative

    @property
    def positive(self):
        return self.eigenvalues[:self.n_positive]

    @property
    def negative(self):
        """Negative eigenvalues, most negative first."""
        if self.n_negative == 0:
            return self.eigenvalues[:0]
        return self.eigenvalues[::-1][:self.n_negative]

    @property
    def g(self):
        return tuple(group.size for group in self.positive_groups)

    @property
    def g1(self):
        return self.top_group().size

    def top_group(self):
        if not self.positive_groups:
            raise EmptySpectrumError("M has no positive eigenvalue; conditioning on Q > u is vacuous")
        return self.positive_groups[0]

    def top_indices(self):
        return self.top_group().indices

    def bottom_indices(self):
        """Indices (into ``eigenvalues``) of the most negative group; empty if none."""
        if not self.negative_groups:
            return np.arange(0)
        size = self.negative_groups[0].size
        return np.arange(self.dim - size, self.dim)

    def lambda_next(self):
        """lambda_{g1+1}: the largest positive eigenvalue outside the top group, 0 if none."""
        g1 = self.g1
        return float(self.positive[g1]) if self.n_positive > g1 else 0.0

    def summary(self):
        return {
            'positive': self.positive,
            'negative': self.negative,
            'n_zero': self.n_zero,
            'g_positive': [group.size for group in self.positive_groups],
            'g_negative': [group.size for group in self.negative_groups],
            'rel_tol': self.rel_tol,
            'zero_tol': self.zero_tol,
        }


def _fix_signs(vectors):
    scale = np.max(np.abs(vectors), axis=0)
    for column in range(vectors.shape[1]):
        significant = np.flatnonzero(np.abs(vectors[:, column]) > 1e-12 * scale[column])
        if significant.size and vectors[significant[0], column] < 0:
            vectors[:, column] *= -1.0
    return vectors


def spectrum_from_eigenpairs(eigenvalues, vectors, rel_tol=DEFAULT_REL_TOL, zero_tol=DEFAULT_ZERO_TOL):
    order = np.argsort(-np.asarray(eigenvalues), kind='stable')
    values = np.asarray(eigenvalues, dtype=float)[order]
    vectors = _fix_signs(np.array(vectors[:, order], dtype=float))

    scale = float(np.max(np.abs(values))) if values.size else 0.0
    threshold = zero_tol * scale
    positive = values[values > threshold]
    negative = values[values < -threshold][::-1]
    return Spectrum(
        eigenvalues=values,
        vectors=vectors,
        rel_tol=rel_tol,
        zero_tol=zero_tol,
        positive_groups=degeneracy_groups(positive, rel_tol),
        negative_groups=degeneracy_groups(negative, rel_tol),
    )


def eig_symmetric(A, rel_tol=DEFAULT_REL_TOL, zero_tol=DEFAULT_ZERO_TOL):
    """
    Full symmetric eigendecomposition with deterministic ordering.

    Descending eigenvalues; each eigenvector's first significant component is
    made positive.
    """
    matrix = check_symmetric(A, 'matrix')
    eigenvalues, vectors = linalg.eigh(matrix)
    spectrum = spectrum_from_eigenpairs(eigenvalues, vectors, rel_tol, zero_tol)
    logger.debug("spectrum: %d positive, %d negative, %d zero, g = %s",
                 spectrum.n_positive, spectrum.n_negative, spectrum.n_zero, spectrum.g)
    return spectrum


def _dim(C):
    return C.dim if hasattr(C, 'dim') else np.asarray(C).shape[0]


def _covariance_block(C, rows, cols):
    if hasattr(C, 'block'):
        return C.block(rows, cols)
    return np.asarray(C)[np.ix_(rows, cols)]


def _covariance_columns(C, index):
    if hasattr(C, 'columns'):
        return C.columns(index)
    return np.asarray(C)[:, index]


def _gram(C, O):
    block = _covariance_block(C, O.support, O.support)
    G = O.coefficients.T @ block @ O.coefficients
    return 0.5 * (G + G.T)


def _gram_roots(G):
    eigenvalues, vectors = linalg.eigh(G)
    top = max(eigenvalues[-1], 0.0)
    if eigenvalues[0] < -PSD_TOL * max(top, np.finfo(float).tiny):
        raise IndefiniteMatrixError(
            f"F^T C F is materially indefinite (min eigenvalue {eigenvalues[0]:.3e}); covariance is broken")
    clipped = np.clip(eigenvalues, 0.0, None)
    root = (vectors * np.sqrt(clipped)) @ vectors.T
    inverse = np.where(clipped > PSD_TOL * top, 1.0 / np.sqrt(np.where(clipped > 0, clipped, 1.0)), 0.0)
    inverse_root = (vectors * inverse) @ vectors.T
    return 0.5 * (root + root.T), 0.5 * (inverse_root + inverse_root.T)


def spectrum_CO_lowrank(C, O, zero_tol=DEFAULT_ZERO_TOL):
    """
    Nonzero eigenvalues of C.(F S F^T), descending.

    Computed from the r x r matrix G^1/2 S G^1/2 with G = F^T C F; only the
    covariance block on the functionals' support is ever evaluated.
    """
    if not isinstance(O, LowRankForm):
        raise DimensionError("the low-rank route needs a LowRankForm observable")
    if _dim(C) != O.dim:
        raise DimensionError(f"covariance dimension does not match observable dimension {O.dim}")
    root, _ = _gram_roots(_gram(C, O))
    reduced = root @ O.core @ root
    eigenvalues = linalg.eigvalsh(0.5 * (reduced + reduced.T))[::-1]
    scale = np.max(np.abs(eigenvalues)) if eigenvalues.size else 0.0
    return eigenvalues[np.abs(eigenvalues) > zero_tol * scale]


@dataclass(frozen=True)
class LowRankModes:
    """
    Eigenpairs of C.O from the low-rank route.

    ``fields`` holds the transported modes C^1/2|lambda> = C F G^-1/2 z as
    columns (weight-normalized coordinates), aligned with ``spectrum``.
    """

    spectrum: Spectrum
    fields: np.ndarray

    def top_fields(self):
        return self.fields[:, self.spectrum.top_indices()]

    def bottom_fields(self):
        return self.fields[:, self.spectrum.bottom_indices()]


def lowrank_modes(C, O, rel_tol=DEFAULT_REL_TOL, zero_tol=DEFAULT_ZERO_TOL):
    if not isinstance(O, LowRankForm):
        raise DimensionError("the low-rank route needs a LowRankForm observable")
    root, inverse_root = _gram_roots(_gram(C, O))
    reduced = root @ O.core @ root
    spectrum = eig_symmetric(0.5 * (reduced + reduced.T), rel_tol=rel_tol, zero_tol=zero_tol)
    CF = _covariance_columns(C, O.support) @ O.coefficients
    fields = CF @ inverse_root @ spectrum.vectors
    return LowRankModes(spectrum, fields)


@dataclass(frozen=True)
class Prop3Report:
    dim: int
    route: str
    k_nonzero: int
    m_spectrum: np.ndarray
    co_spectrum: np.ndarray
    max_imag: float
    mismatch: float
    tol: float
    passed: bool
    input_hash: str


def check_prop3(C, O, tol=1e-8, max_general_dim=GENERAL_ROUTE_MAX_DIM, C_half=None):
    """
    Compare the nonzero spectrum of M = C^1/2 O C^1/2 with that of C.O.

    k is the number of nonzero eigenvalues of M; the k largest-magnitude
    eigenvalues of C.O are taken from a general nonsymmetric solve (small
    dimension) or from the low-rank route. Mismatch is relative to max |lambda|.
    """
    C_matrix = as_array(C)
    dim = C_matrix.shape[0]
    M = build_M(C, O, C_half=C_half)
    m_values = linalg.eigvalsh(M.matrix)[::-1]
    scale = float(np.max(np.abs(m_values))) if m_values.size else 0.0
    nonzero = np.abs(m_values) > NONZERO_TOL * scale
    m_spectrum = m_values[nonzero]
    k = int(nonzero.sum())

    max_imag = 0.0
    if dim <= max_general_dim:
        route = 'general'
        O_matrix = O.dense().matrix if isinstance(O, LowRankForm) else as_array(O)
        co_values = linalg.eigvals(C_matrix @ O_matrix)
        top = np.argsort(-np.abs(co_values), kind='stable')[:k]
        selected = co_values[top]
        max_imag = float(np.max(np.abs(selected.imag))) if k else 0.0
        co_spectrum = np.sort(selected.real)[::-1]
    elif isinstance(O, LowRankForm):
        route = 'lowrank'
        co_values = spectrum_CO_lowrank(C, O, zero_tol=0.0)
        top = np.argsort(-np.abs(co_values), kind='stable')[:k]
        co_spectrum = np.sort(co_values[top])[::-1]
    else:
        raise ResourceCapError(
            f"general C.O eigensolve limited to dimension {max_general_dim}, got {dim} with a dense observable")

    if co_spectrum.size != m_spectrum.size:
        mismatch = float('inf')
    elif k == 0:
        mismatch = 0.0
    else:
        mismatch = float(np.max(np.abs(co_spectrum - m_spectrum)) / scale)
    passed = bool(mismatch <= tol and max_imag <= tol * max(scale, np.finfo(float).tiny))

    O_matrix = O.dense().matrix if isinstance(O, LowRankForm) else as_array(O)
    report = Prop3Report(
        dim=dim,
        route=route,
        k_nonzero=k,
        m_spectrum=m_spectrum,
        co_spectrum=co_spectrum,
        max_imag=max_imag,
        mismatch=mismatch,
        tol=tol,
        passed=passed,
        input_hash=array_hash(C_matrix, O_matrix),
    )
    logger.debug("prop3 check (%s route, k = %d): mismatch %.3e", route, k, mismatch)
    return report


def random_covariance(rng, dim, rank=None, low=0.1, high=2.0):
    """
    C = Q diag(s) Q^T with Q Haar-orthogonal and s uniform in [low, high] on
    ``rank`` directions (zero on the rest)
    """
    rank = dim if rank is None else int(rank)
    if not 0 < rank <= dim:
        raise DimensionError(f"covariance rank must be in [1, {dim}], got {rank}")
    q, r = linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    values = np.zeros(dim)
    values[:rank] = rng.uniform(low, high, rank)
    matrix = (q * values) @ q.T
    return OperatorMatrix(0.5 * (matrix + matrix.T), label=f"C[rank {rank}]", symmetric=True, psd=True)


def random_observable(rng, dim, rank=None):
    """
    Dense symmetric O: a symmetrized Gaussian matrix, or B diag(s) B^T of the
    given rank with mixed-sign s
    """
    if rank is None:
        A = rng.standard_normal((dim, dim))
        return OperatorMatrix(0.5 * (A + A.T), label='O[dense]', symmetric=True)
    B = rng.standard_normal((dim, int(rank)))
    s = rng.choice([-1.0, 1.0], size=int(rank)) * rng.uniform(0.5, 2.0, int(rank))
    matrix = (B * s) @ B.T
    return OperatorMatrix(0.5 * (matrix + matrix.T), label=f"O[rank {rank}]", symmetric=True)


def transport_eigvec(C_half, vector):
    """
    C^1/2 |lambda>: the field shape of an eigenvector of M (unnormalized)
    """
    root = as_array(C_half)
    vector = np.asarray(vector)
    if vector.shape[0] != root.shape[1]:
        raise DimensionError(f"eigenvector length {vector.shape[0]} does not match C^1/2 dimension {root.shape[1]}")
    return root @ vector


def subspace_angle_degrees(A, B):
    """
    Principal angles (degrees, largest first) between the column spans of A and B
    """
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if A.shape[0] != B.shape[0]:
        raise DimensionError(f"subspaces live in different dimensions: {A.shape[0]} vs {B.shape[0]}")
    return np.degrees(linalg.subspace_angles(A, B))
