"""
Large local helicity of an incompressible isotropic flow.

Conditioning on h(0) = v(0) . (curl v)(0) > u concentrates the flow on the
top eigenspace of C.O^S: eigenvalue +sqrt(5) E / (3 lam_T), threefold
degenerate, with mode shapes u_bar(x; e_v) parametrized by the direction
e_v of the velocity at the origin.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..concentration import DEFAULT_EPSILON, norm_decomposition
from ..errors import DimensionError
from ..kernels import TurbulenceKernel, eval_tensor, f_derivatives
from ..operators import KernelCovariance, assemble_covariance, local_helicity, observable_helicity
from ..sampling import ConditionalSampler, basis_from_operators
from ..spectral import DEFAULT_REL_TOL, lowrank_modes, subspace_angle_degrees
from ..utils.stats import effective_sample_size, normalized_weights, weighted_frequency

logger = logging.getLogger(__name__)

CONTINUUM_DEGENERACY = 3
SMALL_RADIUS = 1e-12


def helicity_eigenvalue(energy, taylor_microscale, sign=1):
    """+-sqrt(5) E / (3 lam_T)"""
    return math.copysign(1.0, sign) * math.sqrt(5.0) * energy / (3.0 * taylor_microscale)


def _unit_radial(points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x = np.sqrt(np.sum(points * points, axis=-1))
    safe = np.where(x > SMALL_RADIUS, x, 1.0)
    e_x = np.where((x > SMALL_RADIUS)[:, None], points / safe[:, None], 0.0)
    return points, x, e_x


@dataclass(frozen=True)
class HelicityMode:
    """
    Analytic top (sign = +1) or bottom (sign = -1) mode of C.O^S.

    ``direction`` is e_v = v_bar(0) / |v_bar(0)|; ``h0`` sets the amplitude
    sqrt(lam_T |h0|) / 5^(1/4), so that |h(0)| = |h0|.
    """

    energy: float
    taylor_microscale: float
    sign: int
    direction: np.ndarray
    h0: float = 1.0

    @property
    def eigenvalue(self):
        return helicity_eigenvalue(self.energy, self.taylor_microscale, self.sign)

    @property
    def amplitude(self):
        return math.sqrt(self.taylor_microscale * abs(self.h0)) / 5.0 ** 0.25

    @property
    def kernel(self):
        return TurbulenceKernel(self.energy, self.taylor_microscale)

    def u_bar(self, points):
        """Unit-amplitude mode at points of shape (P, 3)."""
        points, x, e_x = _unit_radial(points)
        lam = self.taylor_microscale
        f, d1, d2, _ = f_derivatives(self.kernel, x)
        e = self.direction
        along = e_x @ e
        transverse = e[None, :] - along[:, None] * e_x
        swirl = np.cross(e_x, e)
        return (f[:, None] * e[None, :]
                + (0.5 * x * d1)[:, None] * transverse
                + self.sign * (lam / math.sqrt(5.0)) * (2.0 * d1 + 0.5 * x * d2)[:, None] * swirl)

    def u_bar_small(self, points):
        """Small-x form: e + -(sqrt5/2)(e x r/lam) - e x^2/lam^2 + (e.r) r / (2 lam^2)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lam = self.taylor_microscale
        e = self.direction
        x2 = np.sum(points * points, axis=-1)
        return (e[None, :]
                + self.sign * (math.sqrt(5.0) / 2.0) * np.cross(e, points / lam)
                - (x2 / lam ** 2)[:, None] * e[None, :]
                + ((points @ e) / (2.0 * lam ** 2))[:, None] * points)

    def v_bar(self, points):
        return self.amplitude * self.u_bar(points)


def helicity_analytic(energy, taylor_microscale, sign, direction, h0=1.0):
    """
    HelicityMode for a direction e_v (normalized here; zero vectors rejected)
    """
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (3,):
        raise DimensionError(f"direction must be a 3-vector, got shape {direction.shape}")
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        raise ValueError("direction of v(0) must be non-zero")
    if not energy > 0 or not taylor_microscale > 0:
        raise ValueError("energy and Taylor microscale must be positive")
    return HelicityMode(float(energy), float(taylor_microscale), 1 if sign >= 0 else -1, direction / norm, float(h0))


def _check_vector_grid(grid):
    if grid.d != 3 or grid.N != 3:
        raise DimensionError(f"curl needs d = 3 and N = 3, grid has d = {grid.d}, N = {grid.N}")


def _central(values, axis, h):
    out = np.full(values.shape, np.nan)
    inner = [slice(None)] * values.ndim
    ahead = [slice(None)] * values.ndim
    behind = [slice(None)] * values.ndim
    inner[axis] = slice(1, -1)
    ahead[axis] = slice(2, None)
    behind[axis] = slice(None, -2)
    out[tuple(inner)] = (values[tuple(ahead)] - values[tuple(behind)]) / (2.0 * h)
    return out


def curl_field(grid, field):
    """
    Central-difference curl of a physical 3-component field (flat layout).

    Every boundary node is returned as NaN.
    """
    _check_vector_grid(grid)
    v = grid.components(field)
    if np.iscomplexobj(v):
        return curl_field(grid, np.real(field)) + 1j * curl_field(grid, np.imag(field))
    curl = np.empty(v.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        curl[i] = _central(v[k], j, grid.h) - _central(v[j], k, grid.h)
    boundary = np.zeros(grid.shape, dtype=bool)
    for axis in range(3):
        index = [slice(None)] * 3
        index[axis] = [0, grid.n - 1]
        boundary[tuple(index)] = True
    curl[:, boundary] = np.nan
    return curl.reshape(-1)


def mode_field(grid, mode):
    """Physical flat field of v_bar on the grid nodes."""
    return grid.field_from_function(mode.v_bar)


def _interior_nodes(grid, n_points, seed, min_radius):
    rng = np.random.default_rng(seed)
    coords = grid.coordinates
    interior = np.all(np.abs(coords) < grid.L - 0.5 * grid.h, axis=1)
    radius = np.sqrt(np.sum(coords * coords, axis=1))
    candidates = np.flatnonzero(interior & (radius >= min_radius))
    return np.sort(rng.choice(candidates, size=min(n_points, candidates.size), replace=False))


def curl_rhs(mode, points):
    """
    Analytic 2 v (curl v_bar)(x) assembled from f', f'', f''' with
    p = v_bar(0) and w0 = (curl v_bar)(0) = +-(sqrt5 / lam) p.
    """
    points, x, e_x = _unit_radial(points)
    E = mode.energy
    _, d1, d2, d3 = f_derivatives(mode.kernel, x)
    p = mode.amplitude * mode.direction
    w0 = mode.sign * math.sqrt(5.0) / mode.taylor_microscale * p
    h = 4.0 * d1 + x * d2
    g = 4.0 * d1 - 4.0 * x * d2 - x * x * d3
    along = e_x @ p
    return ((E / 3.0) * h[:, None] * np.cross(e_x, w0)
            - (2.0 * E / (3.0 * x))[:, None] * h[:, None] * p[None, :]
            + (E / (3.0 * x) * g)[:, None] * (p[None, :] - along[:, None] * e_x))


def eigen_rhs(mode, points):
    """
    Right-hand side of the eigenvalue equation 2 v v_bar(x) = C(x) w0 + D(x) p,
    with C(x) w0 from the tensor kernel and D(x) p = (E/3)(4f' + x f'')(e_x x p).
    """
    points, x, e_x = _unit_radial(points)
    _, d1, d2, _ = f_derivatives(mode.kernel, x)
    p = mode.amplitude * mode.direction
    w0 = mode.sign * math.sqrt(5.0) / mode.taylor_microscale * p
    covariance_part = eval_tensor(mode.kernel, points) @ w0
    swirl = (mode.energy / 3.0) * (4.0 * d1 + x * d2)[:, None] * np.cross(e_x, p)
    return covariance_part + swirl


@dataclass(frozen=True)
class AuditReport:
    n_points: int
    h: float
    max_residual: float
    scale: float
    relative_residual: float


def eigen_equation_audit(mode, points):
    """2 v v_bar(x) against the eigenvalue-equation right-hand side."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    left = 2.0 * mode.eigenvalue * mode.v_bar(points)
    right = eigen_rhs(mode, points)
    residual = float(np.max(np.abs(left - right)))
    scale = float(np.max(np.abs(right)))
    return AuditReport(points.shape[0], 0.0, residual, scale, residual / scale)


def curl_equation_audit(grid, mode, n_points=20, seed=0):
    """
    2 v curl(v_bar) by central differences against the analytic curl
    equation at random interior nodes (away from the origin)
    """
    _check_vector_grid(grid)
    curl = grid.components(curl_field(grid, mode_field(grid, mode)))
    nodes = _interior_nodes(grid, n_points, seed, min_radius=grid.h)
    left = 2.0 * mode.eigenvalue * curl.reshape(3, -1)[:, nodes].T
    right = curl_rhs(mode, grid.coordinates[nodes])
    residual = float(np.max(np.abs(left - right)))
    scale = float(np.max(np.abs(right)))
    return AuditReport(nodes.size, grid.h, residual, scale, residual / scale)


@dataclass(frozen=True)
class OriginRelations:
    eigen_relation_error: float
    curl_relation_error: float
    helicity: float
    helicity_expected: float
    helicity_error: float


def origin_relations(grid, mode):
    """
    At the origin: v v_bar(0) = (E/3) curl v_bar(0), curl v_bar(0) = +-(sqrt5/lam) v_bar(0)
    and h(0) = +-sqrt5 amplitude^2 / lam, with the curl from central differences
    """
    _check_vector_grid(grid)
    field = mode_field(grid, mode)
    curl = grid.components(curl_field(grid, field))[(slice(None),) + grid.origin]
    p = grid.components(field)[(slice(None),) + grid.origin]
    lam = mode.taylor_microscale

    eigen_error = np.linalg.norm(mode.eigenvalue * p - mode.energy / 3.0 * curl) / np.linalg.norm(mode.eigenvalue * p)
    expected_curl = mode.sign * math.sqrt(5.0) / lam * p
    curl_error = np.linalg.norm(curl - expected_curl) / np.linalg.norm(expected_curl)
    helicity = float(local_helicity(grid, field))
    expected = mode.sign * math.sqrt(5.0) * mode.amplitude ** 2 / lam
    return OriginRelations(
        eigen_relation_error=float(eigen_error),
        curl_relation_error=float(curl_error),
        helicity=helicity,
        helicity_expected=expected,
        helicity_error=abs(helicity - expected) / abs(expected),
    )


def analytic_span(grid, energy, taylor_microscale, sign=1):
    """Physical fields u_bar(.; e_k), k = 1..3, as columns."""
    columns = []
    for k in range(3):
        mode = helicity_analytic(energy, taylor_microscale, sign, np.eye(3)[k])
        columns.append(grid.field_from_function(mode.u_bar))
    return np.stack(columns, axis=1)


@dataclass(frozen=True)
class HelicityNumericReport:
    eigenvalues: np.ndarray
    expected: float
    relative_errors: np.ndarray
    max_relative_error: float
    g_positive: list
    g_negative: list
    rel_tol: float
    top_angles_deg: np.ndarray
    bottom_angles_deg: np.ndarray
    h: float


def helicity_numeric_check(grid, kernel, rel_tol=DEFAULT_REL_TOL):
    """
    Nonzero spectrum of C.O^S for the helicity form by the low-rank route,
    compared with +-sqrt(5) E / (3 lam_T); the transported top and bottom
    eigenspaces are compared with the analytic mode spans by principal angles.
    """
    _check_vector_grid(grid)
    if not isinstance(kernel, TurbulenceKernel):
        raise DimensionError("helicity check needs a TurbulenceKernel")
    observable = observable_helicity(grid)
    covariance = KernelCovariance(grid, kernel)
    modes = lowrank_modes(covariance, observable, rel_tol=rel_tol)
    spectrum = modes.spectrum

    eigenvalues = np.concatenate([spectrum.positive, spectrum.negative[::-1]])
    expected = helicity_eigenvalue(kernel.energy, kernel.taylor_microscale)
    errors = np.abs(np.abs(eigenvalues) - expected) / expected

    top = grid.from_normalized(modes.top_fields())
    bottom = grid.from_normalized(modes.bottom_fields())
    top_angles = subspace_angle_degrees(top, analytic_span(grid, kernel.energy, kernel.taylor_microscale, 1))
    bottom_angles = subspace_angle_degrees(bottom, analytic_span(grid, kernel.energy, kernel.taylor_microscale, -1))

    report = HelicityNumericReport(
        eigenvalues=eigenvalues,
        expected=expected,
        relative_errors=errors,
        max_relative_error=float(errors.max()) if errors.size else float('inf'),
        g_positive=[group.size for group in spectrum.positive_groups],
        g_negative=[group.size for group in spectrum.negative_groups],
        rel_tol=rel_tol,
        top_angles_deg=top_angles,
        bottom_angles_deg=bottom_angles,
        h=grid.h,
    )
    logger.debug("helicity spectrum at h = %.4g: %s (max rel error %.3e)", grid.h, eigenvalues, report.max_relative_error)
    return report


@dataclass(frozen=True)
class ConditionedPoint:
    u: float
    u_relative: float
    mean_similarity: float
    mean_ratio: float
    median_ratio: float
    P_u: float
    n_eff: float
    method: str


def weighted_median(values, weights):
    order = np.argsort(values, kind='stable')
    cumulative = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cumulative, 0.5 * cumulative[-1])])


def conditioned_point(basis, u, reference, n, method, seed, epsilon=DEFAULT_EPSILON, u_relative=float('nan'),
                      **options):
    """
    Weighted statistics of conditioned samples at one threshold: mean
    similarity |P_ref phi| / |phi| to an orthonormal reference span, and the
    ratio |delta_phi|^2 / |phi|^2 of the upper split.
    """
    sampler = ConditionalSampler(basis, u, method=method, seed=seed, target=n, **options)
    similarity, ratio, exceed, log_weights = [], [], [], []
    for batch in sampler.chunks():
        phi = basis.fields(batch.t)
        norms = norm_decomposition(batch.t, basis, 'upper', phi=phi)
        projected = np.sqrt(np.sum(np.abs(phi @ reference) ** 2, axis=1))
        similarity.append(projected / np.sqrt(norms.total))
        ratio.append(norms.delta / norms.total)
        exceed.append(norms.delta > epsilon * norms.bar)
        log_weights.append(batch.log_weights)

    weights = normalized_weights(np.concatenate(log_weights))
    ratio = np.concatenate(ratio)
    return ConditionedPoint(
        u=float(u),
        u_relative=float(u_relative),
        mean_similarity=float(np.dot(weights, np.concatenate(similarity))),
        mean_ratio=float(np.dot(weights, ratio)),
        median_ratio=weighted_median(ratio, weights),
        P_u=weighted_frequency(np.concatenate(exceed), weights),
        n_eff=effective_sample_size(weights),
        method=sampler.method,
    )


def orthonormal_reference(vectors):
    """Orthonormal basis (columns) of the span of ``vectors`` in weight-normalized coordinates."""
    q, _ = np.linalg.qr(np.asarray(vectors))
    return q


@dataclass(frozen=True)
class ConditionedStructureReport:
    points: list
    similarity_increasing: bool
    ratio_decreasing: bool
    P_u_trend: list
    rms_helicity: float

    @property
    def passed(self):
        return self.similarity_increasing and self.ratio_decreasing


def helicity_conditioned_structure(grid, kernel, u_relative, n=2000, method='auto', seed=0, max_dim=None,
                                   epsilon=DEFAULT_EPSILON, **options):
    """
    Condition h(0) > u on a coarse grid (dense C^1/2) at u = u_rel <h^2>^1/2
    and track alignment with the analytic top span
    """
    _check_vector_grid(grid)
    covariance = assemble_covariance(grid, kernel, max_dim=max_dim)
    basis = basis_from_operators(covariance, observable_helicity(grid), 'real')
    rms = math.sqrt(basis.tail_model().second_moment)
    span = grid.to_normalized(analytic_span(grid, kernel.energy, kernel.taylor_microscale, 1))
    reference = orthonormal_reference(span)
    n_streams = options.pop('n_streams', 4)

    points = [
        conditioned_point(basis, r * rms, reference, n, method, seed, epsilon, u_relative=r,
                          n_streams=n_streams, first_stream=(k + 1) * n_streams, **options)
        for k, r in enumerate(u_relative)
    ]
    similarity = [p.mean_similarity for p in points]
    ratios = [p.mean_ratio for p in points]
    return ConditionedStructureReport(
        points=points,
        similarity_increasing=all(b > a for a, b in zip(similarity, similarity[1:])),
        ratio_decreasing=all(b < a for a, b in zip(ratios, ratios[1:])),
        P_u_trend=[p.P_u for p in points],
        rms_helicity=rms,
    )
