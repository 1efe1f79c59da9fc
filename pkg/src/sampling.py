"""
Karhunen-Loeve sampling aligned with the eigenbasis of M, conditioned
sampling on {Q > u}, and tail laws of Q.

Coordinates: a field is phi~ = sum_i t_i C^1/2 |lambda_i> and
Q = sum_i lambda_i |t_i|^2. Real t_i are standard normal; complex t_i have
real and imaginary parts of variance 1/2, so <|t_i|^2> = 1.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from .errors import (
    DimensionError,
    EmptySpectrumError,
    QuadratureError,
    RepeatedEigenvalueError,
    SamplingError,
)
from .operators import as_array, build_M, sqrt_psd
from .spectral import DEFAULT_REL_TOL, degeneracy_groups, eig_symmetric
from .utils.rng import split_counts, standard_coordinates, stream_generator
from .utils.stats import effective_sample_size, normalized_weights

logger = logging.getLogger(__name__)

KINDS = ('real', 'complex')
METHODS = ('auto', 'rejection', 'tilted')
MC_METHODS = ('direct', 'tilted')

DEFAULT_STREAMS = 4
DEFAULT_BUDGET = 50_000_000
MIN_CHUNK = 256
CHUNK_ELEMENTS = 2 ** 22
# rejection is the ground-truth path whenever it is predicted to accept this often
AUTO_REJECTION_THRESHOLD = 1e-4

CF_ABS_TARGET = 1e-10
CF_ABS_LIMIT = 1e-8
RESIDUE_GAP_TOL = 1e-8
DEGENERATE_ESS_FRACTION = 0.01


def _check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"unknown field kind {kind!r}; expected one of {KINDS}")


def _power(kind):
    """Q-density exponent per coordinate: 1 for complex, 1/2 for real."""
    return 1.0 if kind == 'complex' else 0.5


@dataclass(frozen=True)
class TailModel:
    """
    Nonzero eigenvalues of M (descending) and the field kind.

    ``g1`` is the size of the top positive degeneracy group (0 if there is no
    positive eigenvalue).
    """

    eigenvalues: np.ndarray
    kind: str
    g1: int

    @property
    def dim(self):
        return self.eigenvalues.size

    @property
    def active(self):
        return np.arange(self.dim)

    @property
    def top_indices(self):
        return np.arange(self.g1)

    @property
    def lambda_one(self):
        if self.g1 == 0:
            raise EmptySpectrumError("no positive eigenvalue; P(Q > u) has no upper tail")
        return float(self.eigenvalues[0])

    @property
    def lambda_next(self):
        if self.g1 < self.dim and self.eigenvalues[self.g1] > 0:
            return float(self.eigenvalues[self.g1])
        return 0.0

    @property
    def mean(self):
        return float(np.sum(self.eigenvalues))

    @property
    def second_moment(self):
        """<Q^2>: 2 sum lambda^2 + (sum lambda)^2 (real) or sum lambda^2 + (sum lambda)^2 (complex)."""
        squares = float(np.sum(self.eigenvalues ** 2))
        total = float(np.sum(self.eigenvalues))
        return (2.0 if self.kind == 'real' else 1.0) * squares + total * total

    def tail_model(self):
        return self


def tail_model(eigenvalues, kind, rel_tol=DEFAULT_REL_TOL, zero_tol=1e-10):
    """
    TailModel from an eigenvalue list; zeros (relative to max |lambda|) are dropped
    """
    _check_kind(kind)
    values = np.asarray(eigenvalues, dtype=float).ravel()
    if values.size == 0:
        raise EmptySpectrumError("tail model needs at least one eigenvalue")
    scale = float(np.max(np.abs(values)))
    values = np.sort(values[np.abs(values) > zero_tol * scale])[::-1]
    positive = values[values > 0]
    groups = degeneracy_groups(positive, rel_tol)
    g1 = groups[0].size if groups else 0
    return TailModel(values, kind, g1)


@dataclass(frozen=True)
class KLBasis:
    """
    Complete eigenbasis of M with its transport vectors T = C^1/2 V.

    Columns of ``transport`` are C^1/2 |lambda_i> in weight-normalized
    coordinates, in the order of ``spectrum.eigenvalues``; T T^T = C.
    """

    kind: str
    spectrum: object
    transport: np.ndarray

    @property
    def dim(self):
        return self.transport.shape[1]

    @property
    def eigenvalues(self):
        return self.spectrum.eigenvalues

    @property
    def active(self):
        npos = self.spectrum.n_positive
        nneg = self.spectrum.n_negative
        return np.concatenate([np.arange(npos), np.arange(self.dim - nneg, self.dim)]).astype(int)

    @property
    def top_indices(self):
        return self.spectrum.top_indices()

    @property
    def g1(self):
        return self.spectrum.g1

    @property
    def lambda_one(self):
        return float(self.spectrum.positive[0]) if self.spectrum.n_positive else 0.0

    @property
    def lambda_next(self):
        return self.spectrum.lambda_next()

    def tail_model(self):
        values = self.eigenvalues[self.active]
        g1 = self.spectrum.g1 if self.spectrum.n_positive else 0
        return TailModel(np.sort(values)[::-1], self.kind, g1)

    def fields(self, t):
        """phi~ = T t for one coordinate vector or a batch (rows)."""
        return np.asarray(t) @ self.transport.T

    def Q(self, t):
        t = np.asarray(t)
        return np.sum(self.eigenvalues * np.abs(t) ** 2, axis=-1)


def kl_basis(C, M_spectrum, kind, C_half=None):
    """
    KL basis from a covariance and the spectrum of M built from it
    """
    _check_kind(kind)
    if C_half is None:
        C_half = sqrt_psd(C)
    root = as_array(C_half)
    if root.shape[0] != M_spectrum.vectors.shape[0]:
        raise DimensionError(
            f"covariance dimension {root.shape[0]} does not match M dimension {M_spectrum.vectors.shape[0]}")
    return KLBasis(kind, M_spectrum, root @ M_spectrum.vectors)


def basis_from_operators(C, O, kind, rel_tol=DEFAULT_REL_TOL, C_half=None):
    """
    Convenience path C, O -> C^1/2 -> M -> spectrum -> KLBasis
    """
    if C_half is None:
        C_half = sqrt_psd(C)
    M = build_M(C, O, C_half=C_half)
    spectrum = eig_symmetric(M, rel_tol=rel_tol)
    return kl_basis(C, spectrum, kind, C_half=C_half)


@dataclass(frozen=True)
class FieldSample:
    field: np.ndarray
    t: np.ndarray
    Q: float
    weight: float
    seed: int
    stream: int


@dataclass(frozen=True)
class SampleBatch:
    """
    Rows of KL coordinates with their Q values and log importance weights
    """

    t: np.ndarray
    Q: np.ndarray
    log_weights: np.ndarray
    streams: np.ndarray
    proposals: int
    method: str
    seed: int

    def __len__(self):
        return self.Q.size

    @property
    def weights(self):
        """Self-normalized importance weights (uniform for exact samples)."""
        return normalized_weights(self.log_weights)

    def fields(self, basis):
        return basis.fields(self.t)

    @staticmethod
    def concat(batches, method, seed):
        batches = list(batches)
        if not batches:
            raise SamplingError("no samples to collect")
        return SampleBatch(
            t=np.concatenate([batch.t for batch in batches]),
            Q=np.concatenate([batch.Q for batch in batches]),
            log_weights=np.concatenate([batch.log_weights for batch in batches]),
            streams=np.concatenate([batch.streams for batch in batches]),
            proposals=sum(batch.proposals for batch in batches),
            method=method,
            seed=seed,
        )


def sample_unconditional(basis, seed, stream=0):
    """
    One exact draw phi~ = sum_i t_i C^1/2 |lambda_i>, weight 1
    """
    rng = stream_generator(seed, stream)
    t = standard_coordinates(rng, basis.dim, basis.kind)
    return FieldSample(basis.fields(t), t, float(basis.Q(t)), 1.0, int(seed), int(stream))


def sample_batch(basis, n, seed, n_streams=DEFAULT_STREAMS, workers=1):
    """
    n exact draws split over fixed streams, concatenated in stream order
    """
    counts = split_counts(n, n_streams)

    def draw(stream):
        rng = stream_generator(seed, stream)
        t = standard_coordinates(rng, (counts[stream], basis.dim), basis.kind)
        return SampleBatch(t, basis.Q(t), np.zeros(counts[stream]), np.full(counts[stream], stream),
                           counts[stream], 'direct', int(seed))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        batches = list(pool.map(draw, range(n_streams)))
    return SampleBatch.concat(batches, 'direct', int(seed))


@dataclass(frozen=True)
class TiltParameters:
    """
    Per-coordinate tilts theta_i for the proposal law.

    Proposal variances are (1 - theta_i lambda_i)^-1 (complex) or
    (1 - 2 theta_i lambda_i)^-1 (real); the log-weight of a proposal is
    -sum_i theta_i lambda_i |t_i|^2 + log_normalizer.
    """

    theta: np.ndarray
    theta_top: float
    c: float
    log_normalizer: float


def default_tilt_constant(source):
    """
    c = (1/lambda_1 + 1/lambda_{g1+1}) / 2 (complex) or / 4 (real),
    with 1/lambda_{g1+1} -> 2/lambda_1 when lambda_{g1+1} = 0
    """
    lam1 = source.lambda_one
    lam_next = source.lambda_next
    inverse_next = 1.0 / lam_next if lam_next > 0 else 2.0 / lam1
    divisor = 2.0 if source.kind == 'complex' else 4.0
    return (1.0 / lam1 + inverse_next) / divisor


def tilt_parameters(source, u, c=None):
    """
    Tilt the top group so the tilted mean of its Q-part is u + lambda_1
    (complex) or u + 2 lambda_1 (real); other positive coordinates get c;
    negative and null coordinates are untilted.
    """
    eigenvalues = np.asarray(source.eigenvalues, dtype=float)
    lam1 = source.lambda_one
    g1 = source.g1
    if lam1 <= 0:
        raise EmptySpectrumError("tilted sampling needs a positive eigenvalue")

    if c is None:
        c = default_tilt_constant(source)
    c = float(c)
    lam_next = source.lambda_next
    factor = 1.0 if source.kind == 'complex' else 2.0
    if c < 0:
        raise SamplingError(f"tilt constant must be non-negative, got {c}")
    if lam_next > 0 and c * factor * lam_next >= 1.0:
        bound = 1.0 / (factor * lam_next)
        raise SamplingError(f"tilt constant c = {c:.6g} must be below {bound:.6g} for a finite proposal variance")

    if math.isinf(u) and u < 0:
        theta_top = 0.0
    elif source.kind == 'complex':
        theta_top = (1.0 - g1 * lam1 / (u + lam1)) / lam1 if u + lam1 > 0 else 0.0
    else:
        theta_top = (1.0 - g1 * lam1 / (u + 2.0 * lam1)) / (2.0 * lam1) if u + 2.0 * lam1 > 0 else 0.0
    theta_top = max(theta_top, 0.0)

    theta = np.zeros(eigenvalues.size)
    positive = np.flatnonzero(eigenvalues > 0)
    active = np.intersect1d(positive, source.active)
    theta[active] = c
    theta[source.top_indices] = theta_top

    shrink = 1.0 - factor * theta * eigenvalues
    log_normalizer = -_power(source.kind) * float(np.sum(np.log(shrink[source.active])))
    return TiltParameters(theta, theta_top, c, log_normalizer)


def predicted_acceptance(source, u):
    """
    P(Q > u) from the tail law (CF inversion, falling back to the asymptote)
    """
    if math.isinf(u) and u < 0:
        return 1.0
    model = source.tail_model()
    try:
        return tail_prob_cf(model, u)
    except QuadratureError:
        if model.g1 == 0:
            return 0.0
        return min(1.0, tail_asymptotic(model, u).probability)


def _proposal_scales(source, tilt):
    if tilt is None:
        return None
    factor = 1.0 if source.kind == 'complex' else 2.0
    active = source.active
    return 1.0 / np.sqrt(1.0 - factor * tilt.theta[active] * source.eigenvalues[active])


def _propose(source, rng, size, u, tilt, with_inactive, stream, method, seed):
    """
    Draw ``size`` proposals, keep Q > u. Active coordinates are drawn first;
    inactive ones only for kept rows.
    """
    active = source.active
    lam = np.asarray(source.eigenvalues)[active]
    ta = standard_coordinates(rng, (size, active.size), source.kind)
    if tilt is not None:
        ta = ta * _proposal_scales(source, tilt)
    Q = np.sum(lam * np.abs(ta) ** 2, axis=1)
    keep = Q > u

    kept = int(keep.sum())
    if tilt is None:
        log_weights = np.zeros(kept)
    else:
        exponent = np.sum(tilt.theta[active] * lam * np.abs(ta[keep]) ** 2, axis=1)
        log_weights = -exponent + tilt.log_normalizer

    if with_inactive:
        dtype = complex if source.kind == 'complex' else float
        t = np.zeros((kept, source.dim), dtype=dtype)
        t[:, active] = ta[keep]
        inactive = np.setdiff1d(np.arange(source.dim), active)
        if inactive.size:
            t[:, inactive] = standard_coordinates(rng, (kept, inactive.size), source.kind)
    else:
        t = ta[keep]
    return SampleBatch(t, Q[keep], log_weights, np.full(kept, stream), size, method, seed)


@dataclass(frozen=True)
class SamplerSummary:
    method: str
    u: float
    target: int
    proposals: int
    accepted: int
    acceptance_rate: float
    effective_size: float
    predicted_acceptance: float
    theta_top: float
    c: float
    n_streams: int


class ConditionalSampler:
    """
    Streams samples from dP_u = dP(. | Q > u).

    ``rejection`` gives exact samples with weight 1; ``tilted`` proposes from
    an exponentially tilted Gaussian and carries importance weights. Work runs
    in rounds: each of the fixed streams draws one chunk per round, chunks are
    reduced in stream order, and sampling stops once the effective sample size
    reaches ``target`` or ``budget`` proposals have been used.
    """

    def __init__(self, source, u, method='auto', seed=0, target=1000, budget=DEFAULT_BUDGET, c=None,
                 n_streams=DEFAULT_STREAMS, workers=1, ess_floor=None, with_inactive=True, first_stream=0):
        if method not in METHODS:
            raise ValueError(f"unknown sampling method {method!r}; expected one of {METHODS}")
        if not (math.isinf(u) and u < 0) and source.lambda_one <= 0:
            raise EmptySpectrumError("conditioning on Q > u needs a positive eigenvalue of M")
        self.source = source
        self.u = float(u)
        self.seed = int(seed)
        self.target = int(target)
        self.budget = int(budget)
        self.n_streams = int(n_streams)
        self.workers = max(1, int(workers))
        self.ess_floor = 0.5 * self.target if ess_floor is None else float(ess_floor)
        self.with_inactive = with_inactive
        self.first_stream = int(first_stream)

        self.predicted = predicted_acceptance(source, self.u)
        if method == 'auto':
            method = 'rejection' if self.predicted >= AUTO_REJECTION_THRESHOLD else 'tilted'
        self.method = method
        self.tilt = tilt_parameters(source, self.u, c) if method == 'tilted' else None

        self.proposals = 0
        self._log_weights = []
        logger.debug("conditioned sampler at u = %.6g: %s regime, predicted acceptance %.3e",
                     self.u, self.method, self.predicted)

    @property
    def accepted(self):
        return sum(chunk.size for chunk in self._log_weights)

    @property
    def effective_size(self):
        if self.method == 'rejection':
            return float(self.accepted)
        if not self._log_weights:
            return 0.0
        return effective_sample_size(normalized_weights(np.concatenate(self._log_weights)))

    def _chunk_size(self, max_chunk):
        remaining = max(self.target - self.effective_size, 1.0)
        if self.proposals and self.effective_size > 0:
            rate = self.effective_size / self.proposals
        elif self.method == 'rejection':
            rate = max(self.predicted, 1e-12)
        else:
            rate = 0.25
        size = int(math.ceil(1.1 * remaining / (rate * self.n_streams)))
        size = min(max(size, MIN_CHUNK), max_chunk)
        left = int(math.ceil((self.budget - self.proposals) / self.n_streams))
        return max(1, min(size, left))

    def chunks(self):
        """
        Yield non-empty SampleBatch chunks; raises SamplingError at the end if
        the run produced no acceptances or too small an effective sample size.
        """
        generators = [stream_generator(self.seed, self.first_stream + stream) for stream in range(self.n_streams)]
        max_chunk = max(MIN_CHUNK, CHUNK_ELEMENTS // max(self.source.dim, 1))

        def draw(stream, size):
            return _propose(self.source, generators[stream], size, self.u, self.tilt,
                            self.with_inactive, self.first_stream + stream, self.method, self.seed)

        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            while self.proposals < self.budget and self.effective_size < self.target:
                size = self._chunk_size(max_chunk)
                batches = list(pool.map(draw, range(self.n_streams), [size] * self.n_streams))
                for batch in batches:
                    self.proposals += batch.proposals
                    self._log_weights.append(batch.log_weights)
                for batch in batches:
                    if len(batch):
                        yield batch

        self._finish()

    def _finish(self):
        summary = self.summary()
        logger.debug("sampler finished: %s", summary)
        if self.accepted == 0:
            raise SamplingError(
                f"budget of {self.budget} proposals exhausted with zero acceptances at u = {self.u:.6g}")
        if self.effective_size < self.ess_floor:
            raise SamplingError(
                f"effective sample size {self.effective_size:.1f} below the floor {self.ess_floor:.1f} "
                f"at u = {self.u:.6g} ({self.method})")

    def summary(self):
        return SamplerSummary(
            method=self.method,
            u=self.u,
            target=self.target,
            proposals=self.proposals,
            accepted=self.accepted,
            acceptance_rate=self.accepted / self.proposals if self.proposals else 0.0,
            effective_size=self.effective_size,
            predicted_acceptance=self.predicted,
            theta_top=self.tilt.theta_top if self.tilt else 0.0,
            c=self.tilt.c if self.tilt else 0.0,
            n_streams=self.n_streams,
        )


def sample_conditional(basis, u, method='auto', seed=0, budget=DEFAULT_BUDGET, **options):
    """
    Generator of FieldSample draws from dP_u; weights are unnormalized p/q
    (1 for rejection samples)
    """
    sampler = ConditionalSampler(basis, u, method=method, seed=seed, budget=budget, **options)
    for batch in sampler.chunks():
        fields = basis.fields(batch.t)
        for row in range(len(batch)):
            yield FieldSample(fields[row], batch.t[row], float(batch.Q[row]),
                              float(np.exp(batch.log_weights[row])), sampler.seed, int(batch.streams[row]))


def draw_conditional(basis, u, method='auto', seed=0, target=1000, **options):
    """
    Collect a conditioned run into one SampleBatch, with the sampler summary
    """
    sampler = ConditionalSampler(basis, u, method=method, seed=seed, target=target, **options)
    batch = SampleBatch.concat(sampler.chunks(), sampler.method, sampler.seed)
    return batch, sampler.summary()


def _imhof_terms(model):
    """Effective (lambda', h) pairs: real coordinates are chi^2_1, complex ones lambda/2 chi^2_2."""
    if model.kind == 'complex':
        return model.eigenvalues / 2.0, 2.0
    return model.eigenvalues, 1.0


def _quad_checked(fn, a, b, **kwargs):
    value, error, *rest = integrate.quad(fn, a, b, epsabs=CF_ABS_TARGET, epsrel=0.0, limit=500,
                                         full_output=1, **kwargs)
    if not np.isfinite(value) or error > CF_ABS_LIMIT:
        raise QuadratureError(f"quadrature error estimate {error:.3e} above the limit {CF_ABS_LIMIT:.1e}")
    return value, error


def _fourier_integral(smooth_cos, smooth_sin, omega, a):
    """
    int_0^inf [smooth_cos(t) cos(omega t) - smooth_sin(t) sin(omega t)] dt,
    regular quadrature on [0, a] and Fourier-weighted (QAWF) on [a, inf)
    """
    sign = 1.0 if omega >= 0 else -1.0
    omega = abs(omega)

    def integrand(t):
        return smooth_cos(t) * np.cos(omega * t) - sign * smooth_sin(t) * np.sin(omega * t)

    if omega == 0.0:
        value, _ = _quad_checked(lambda t: smooth_cos(t), 0.0, np.inf)
        return value
    head, _ = _quad_checked(integrand, 0.0, a)
    cos_tail, _ = _quad_checked(smooth_cos, a, np.inf, weight='cos', wvar=omega)
    sin_tail, _ = _quad_checked(smooth_sin, a, np.inf, weight='sin', wvar=omega)
    return head + cos_tail - sign * sin_tail


def tail_prob_cf(model, u):
    """
    P(Q > u) by inversion of the characteristic function.

    Gil-Pelaez form for a weighted sum of chi-squares,
        P(Q > u) = 1/2 + (1/pi) int_0^inf sin(theta(t)) / (t rho(t)) dt,
        theta(t) = 1/2 sum h_j arctan(lambda'_j t) - u t / 2,
        rho(t)   = prod (1 + lambda'_j^2 t^2)^(h_j / 4),
    which is the inversion of prod (1 - i k lambda)^-1 (complex) and
    prod (1 - 2 i k lambda)^-1/2 (real).
    """
    u = float(u)
    values = model.eigenvalues
    if values.size == 0:
        raise EmptySpectrumError("tail model has no eigenvalues")
    if u <= 0 and np.all(values > 0):
        return 1.0
    if u >= 0 and np.all(values < 0):
        return 0.0

    lam, h = _imhof_terms(model)

    def phase(t):
        return 0.5 * h * np.sum(np.arctan(np.multiply.outer(t, lam)), axis=-1)

    def envelope(t):
        return t * np.prod((1.0 + np.multiply.outer(t, lam) ** 2) ** (h / 4.0), axis=-1)

    def smooth_cos(t):
        return np.sin(phase(t)) / envelope(t)

    def smooth_sin(t):
        return np.cos(phase(t)) / envelope(t)

    a = 4.0 / float(np.max(np.abs(lam)))
    integral = _fourier_integral(smooth_cos, smooth_sin, 0.5 * u, a)
    return float(min(1.0, max(0.0, 0.5 + integral / np.pi)))


def _log_cf(model, k):
    if model.kind == 'complex':
        return -np.sum(np.log(1.0 - 1j * np.multiply.outer(k, model.eigenvalues)), axis=-1)
    return -0.5 * np.sum(np.log(1.0 - 2j * np.multiply.outer(k, model.eigenvalues)), axis=-1)


def tail_density_cf(model, v):
    """
    Density of Q at v: (1/pi) int_0^inf Re[f(k) exp(-i k v)] dk with f the
    characteristic function
    """
    v = float(v)

    def smooth_cos(k):
        return np.real(np.exp(_log_cf(model, k)))

    def smooth_sin(k):
        return -np.imag(np.exp(_log_cf(model, k)))

    # Re[f e^{-ikv}] = Re f cos(kv) + Im f sin(kv)
    a = 4.0 / float(np.max(np.abs(model.eigenvalues)))
    return float(_fourier_integral(smooth_cos, smooth_sin, v, a) / np.pi)


@dataclass(frozen=True)
class TailAsymptote:
    density: float
    probability: float
    prefactor: float


def tail_asymptotic(model, u):
    """
    Leading-order density and tail probability from the pole at the top
    eigenvalue.

    The prefactor runs over every eigenvalue outside the top group:
    prod (1 - lambda_n / lambda_1)^-1 (complex) or ^-1/2 (real). The
    probability integrates the leading density exactly, giving a regularized
    upper incomplete gamma function.
    """
    u = float(u)
    lam1 = model.lambda_one
    g1 = model.g1
    rest = model.eigenvalues[g1:]
    power = _power(model.kind)
    prefactor = float(np.prod((1.0 - rest / lam1) ** (-power)))

    if model.kind == 'complex':
        shape, scale = float(g1), lam1
    else:
        shape, scale = 0.5 * g1, 2.0 * lam1
    density = prefactor * stats.gamma.pdf(u, shape, scale=scale)
    probability = prefactor * special.gammaincc(shape, max(u / scale, 0.0))
    return TailAsymptote(float(density), float(probability), prefactor)


def tail_prob_residues(model, u):
    """
    Exact complex-kind tail as a sum over simple poles.

    u >= 0: sum over lambda_n > 0 of A_n exp(-u / lambda_n);
    u < 0:  1 - sum over lambda_n < 0 of A_n exp(-u / lambda_n);
    with A_n = prod_{m != n} lambda_n / (lambda_n - lambda_m).
    """
    if model.kind != 'complex':
        raise ValueError("the residue sum is the complex-kind tail law")
    values = model.eigenvalues
    gaps = np.abs(np.subtract.outer(values, values))
    np.fill_diagonal(gaps, np.inf)
    if values.size > 1 and np.min(gaps) <= RESIDUE_GAP_TOL * np.max(np.abs(values)):
        raise RepeatedEigenvalueError("residue sum needs distinct eigenvalues")

    def amplitude(n):
        others = np.delete(values, n)
        return float(np.prod(values[n] / (values[n] - others)))

    u = float(u)
    if u >= 0:
        return float(sum(amplitude(n) * np.exp(-u / values[n]) for n in range(values.size) if values[n] > 0))
    return float(1.0 - sum(amplitude(n) * np.exp(-u / values[n]) for n in range(values.size) if values[n] < 0))


@dataclass(frozen=True)
class TailEstimate:
    u: float
    method: str
    estimate: float
    stderr: float
    n: int
    seed: int
    effective_size: float
    degenerate: bool


def tail_prob_mc(source, u, n_samples, method='direct', seed=0, n_streams=DEFAULT_STREAMS, workers=1, c=None):
    """
    Monte Carlo estimate of P(Q > u) with its standard error.

    ``direct`` counts exceedances among exact draws; ``tilted`` averages
    w 1{Q > u} over tilted proposals (unbiased, weights include the
    normalizing constants). Only the nonzero-eigenvalue coordinates are drawn.
    """
    if method not in MC_METHODS:
        raise ValueError(f"unknown Monte Carlo method {method!r}; expected one of {MC_METHODS}")
    if n_samples < 1000:
        raise ValueError(f"tail Monte Carlo needs at least 1000 samples, got {n_samples}")
    model = source.tail_model()
    tilt = tilt_parameters(model, u, c) if method == 'tilted' else None
    counts = split_counts(n_samples, n_streams)
    max_chunk = max(MIN_CHUNK, CHUNK_ELEMENTS // max(model.dim, 1))

    def run(stream):
        rng = stream_generator(seed, stream)
        values = []
        remaining = counts[stream]
        while remaining > 0:
            size = min(remaining, max_chunk)
            batch = _propose(model, rng, size, -np.inf, tilt, False, stream, method, seed)
            hit = batch.Q > u
            if tilt is None:
                values.append(hit.astype(float))
            else:
                values.append(np.where(hit, np.exp(batch.log_weights), 0.0))
            remaining -= size
        return np.concatenate(values)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        samples = np.concatenate(list(pool.map(run, range(n_streams))))

    estimate = float(samples.mean())
    if method == 'direct':
        stderr = math.sqrt(max(estimate * (1.0 - estimate), 0.0) / n_samples)
        ess = float(n_samples)
        degenerate = False
    else:
        stderr = float(samples.std(ddof=1) / math.sqrt(n_samples))
        hits = samples[samples > 0]
        ess = effective_sample_size(hits)
        degenerate = bool(hits.size < 2 or ess < DEGENERATE_ESS_FRACTION * hits.size)
        if degenerate:
            logger.warning("tilted tail estimate at u = %.6g has degenerate weights (ESS %.1f of %d hits)",
                           u, ess, hits.size)
    return TailEstimate(float(u), method, estimate, stderr, int(n_samples), int(seed), ess, degenerate)
