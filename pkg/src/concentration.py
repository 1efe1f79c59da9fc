"""
Empirical concentration of conditioned fields on the top eigenspace of M.

A conditioned field splits as phi = phi_bar + delta_phi, with phi_bar the part
carried by the extreme eigenvalue group(s). The estimators below track
P_u(|delta_phi|^2 > eps |phi_bar|^2) and P_u(|phi_bar|^2 < a) as u grows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FieldConcentrationError
from .sampling import ConditionalSampler, DEFAULT_STREAMS, sample_batch
from .utils.stats import (
    CI_METHOD,
    effective_sample_size,
    non_increasing,
    normalized_weights,
    strictly_decreasing,
    weighted_frequency,
    wilson_interval,
)

logger = logging.getLogger(__name__)

MODES = ('upper', 'two_sided')
DEFAULT_EPSILON = 0.5
IDENTITY_TOL = 1e-10

RECORD_COLUMNS = ('u', 'epsilon', 'a', 'P_u', 'CI_low', 'CI_high', 'P_phibar_small',
                  'mean_ratio', 'n_eff', 'method', 'seed')


def bar_indices(basis, mode='upper'):
    """Indices of the coordinates that make up phi_bar."""
    if mode not in MODES:
        raise ValueError(f"unknown split mode {mode!r}; expected one of {MODES}")
    top = basis.top_indices
    if mode == 'upper':
        return top
    return np.concatenate([top, basis.spectrum.bottom_indices()])


def split_field(sample, basis, mode='upper'):
    """
    (phi_bar, delta_phi) for one FieldSample; delta_phi = phi - phi_bar exactly
    """
    t = np.asarray(sample.t)
    if t.shape != (basis.dim,):
        raise DimensionError(f"sample has {t.shape[0]} coordinates, basis has {basis.dim}")
    index = bar_indices(basis, mode)
    phi_bar = basis.transport[:, index] @ t[index]
    return phi_bar, np.asarray(sample.field) - phi_bar


@dataclass(frozen=True)
class NormDecomposition:
    total: np.ndarray
    bar: np.ndarray
    delta: np.ndarray
    cross: np.ndarray


def norm_decomposition(t, basis, mode='upper', phi=None):
    """
    |phi|^2, |phi_bar|^2, |delta_phi|^2 and Re<phi_bar, delta_phi> per row of t.

    The transport vectors are not L2-orthogonal, so the cross term is kept and
    |phi|^2 = |phi_bar|^2 + |delta_phi|^2 + 2 Re<phi_bar, delta_phi> is checked.
    """
    t = np.atleast_2d(t)
    index = bar_indices(basis, mode)
    if phi is None:
        phi = basis.fields(t)
    phi_bar = t[:, index] @ basis.transport[:, index].T
    delta = phi - phi_bar

    total = np.sum(np.abs(phi) ** 2, axis=1)
    bar = np.sum(np.abs(phi_bar) ** 2, axis=1)
    rest = np.sum(np.abs(delta) ** 2, axis=1)
    cross = np.real(np.sum(np.conj(phi_bar) * delta, axis=1))

    defect = np.abs(total - (bar + rest + 2.0 * cross))
    scale = np.maximum(total, np.finfo(float).tiny)
    if np.any(defect > IDENTITY_TOL * np.maximum(scale, bar + rest)):
        raise FieldConcentrationError("norm decomposition identity violated beyond round-off")
    return NormDecomposition(total, bar, rest, cross)


def default_floor(basis, n=4000, seed=0, mode='upper', n_streams=DEFAULT_STREAMS, workers=1):
    """
    a = 0.1 * median |phi_bar|^2 among unconditional samples with Q above median(Q)
    """
    batch = sample_batch(basis, n, seed, n_streams=n_streams, workers=workers)
    norms = norm_decomposition(batch.t, basis, mode)
    upper = batch.Q > np.median(batch.Q)
    return 0.1 * float(np.median(norms.bar[upper]))


@dataclass(frozen=True)
class ConcentrationRecord:
    u: float
    epsilon: float
    a: float
    n_samples: int
    n_eff: float
    P_u: float
    CI_low: float
    CI_high: float
    P_phibar_small: float
    phibar_CI_low: float
    phibar_CI_high: float
    mean_ratio: float
    min_phibar_sq: float
    phibar_positive: bool
    method: str
    seed: int
    ci_method: str = CI_METHOD

    def row(self):
        return (self.u, self.epsilon, self.a, self.P_u, self.CI_low, self.CI_high, self.P_phibar_small,
                self.mean_ratio, self.n_eff, self.method, self.seed)


def estimate_Pu(basis, u, epsilon=DEFAULT_EPSILON, a=None, n=10_000, method='auto', seed=0,
                mode='upper', **options):
    """
    One ConcentrationRecord at threshold u.

    Frequencies are self-normalized weighted frequencies (plain frequencies
    for rejection samples); Wilson intervals use the effective sample size.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if a is None:
        a = default_floor(basis, seed=seed, mode=mode)
    if not a > 0:
        raise ValueError(f"floor a must be positive, got {a}")

    sampler = ConditionalSampler(basis, u, method=method, seed=seed, target=n, **options)
    bars, deltas, totals, log_weights = [], [], [], []
    for batch in sampler.chunks():
        norms = norm_decomposition(batch.t, basis, mode)
        bars.append(norms.bar)
        deltas.append(norms.delta)
        totals.append(norms.total)
        log_weights.append(batch.log_weights)

    bar = np.concatenate(bars)
    delta = np.concatenate(deltas)
    total = np.concatenate(totals)
    weights = normalized_weights(np.concatenate(log_weights))
    n_eff = effective_sample_size(weights)

    p_u = weighted_frequency(delta > epsilon * bar, weights)
    p_small = weighted_frequency(bar < a, weights)
    low, high = wilson_interval(p_u, n_eff)
    small_low, small_high = wilson_interval(p_small, n_eff)
    mean_ratio = float(np.dot(weights, delta / total))

    transport_norm = float(np.sum(np.abs(basis.transport[:, bar_indices(basis, mode)]) ** 2))
    min_bar = float(bar.min())
    record = ConcentrationRecord(
        u=float(u),
        epsilon=float(epsilon),
        a=float(a),
        n_samples=int(bar.size),
        n_eff=n_eff,
        P_u=p_u,
        CI_low=low,
        CI_high=high,
        P_phibar_small=p_small,
        phibar_CI_low=small_low,
        phibar_CI_high=small_high,
        mean_ratio=mean_ratio,
        min_phibar_sq=min_bar,
        phibar_positive=bool(min_bar > 0 or transport_norm == 0),
        method=sampler.method,
        seed=int(seed),
    )
    logger.debug("u = %.6g: P_u = %.4g [%.4g, %.4g], n_eff = %.1f (%s)",
                 u, p_u, low, high, n_eff, sampler.method)
    return record


@dataclass(frozen=True)
class ConcentrationCurve:
    records: list
    pu_non_increasing: bool
    pu_strictly_decreasing: bool
    small_non_increasing: bool
    small_strictly_decreasing: bool
    last_below_first: bool
    phibar_positive: bool

    @property
    def passed(self):
        return self.pu_strictly_decreasing and self.small_non_increasing and self.phibar_positive


def concentration_curve(basis, u_grid, epsilon=DEFAULT_EPSILON, a=None, n=10_000, method='auto', seed=0,
                        mode='upper', n_streams=DEFAULT_STREAMS, **options):
    """
    Records over an increasing u grid plus trend verdicts from 95% intervals.

    Each u gets its own block of stream ids.
    """
    u_grid = [float(u) for u in u_grid]
    if len(u_grid) < 3:
        raise ValueError(f"concentration curve needs at least 3 thresholds, got {len(u_grid)}")
    if any(b <= a_ for a_, b in zip(u_grid, u_grid[1:])):
        raise ValueError("u grid must be strictly increasing")
    if a is None:
        a = default_floor(basis, seed=seed, mode=mode, n_streams=n_streams)

    records = [
        estimate_Pu(basis, u, epsilon, a, n, method, seed, mode,
                    n_streams=n_streams, first_stream=(k + 1) * n_streams, **options)
        for k, u in enumerate(u_grid)
    ]
    estimates = [r.P_u for r in records]
    lows = [r.CI_low for r in records]
    highs = [r.CI_high for r in records]
    small = [r.P_phibar_small for r in records]
    small_lows = [r.phibar_CI_low for r in records]
    small_highs = [r.phibar_CI_high for r in records]

    return ConcentrationCurve(
        records=records,
        pu_non_increasing=non_increasing(estimates, lows, highs),
        pu_strictly_decreasing=strictly_decreasing(lows, highs),
        small_non_increasing=non_increasing(small, small_lows, small_highs),
        small_strictly_decreasing=strictly_decreasing(small_lows, small_highs),
        last_below_first=bool(highs[-1] < lows[0]),
        phibar_positive=all(r.phibar_positive for r in records),
    )
