import math
from itertools import islice

import numpy as np
import pytest
from scipy import special, stats

from src import sampling
from src.errors import DimensionError, EmptySpectrumError, QuadratureError, RepeatedEigenvalueError, SamplingError
from src.grid import build_grid
from src.kernels import ScalarKernel
from src.operators import assemble_covariance, observable_point_intensity, quadratic_form, sqrt_psd
from src.sampling import (
    ConditionalSampler,
    basis_from_operators,
    default_tilt_constant,
    draw_conditional,
    kl_basis,
    sample_batch,
    sample_conditional,
    sample_unconditional,
    tail_asymptotic,
    tail_density_cf,
    tail_model,
    tail_prob_cf,
    tail_prob_mc,
    tail_prob_residues,
    tilt_parameters,
)
from src.spectral import eig_symmetric
from src.utils.rng import standard_coordinates

MIXED = [1.0, 0.4, -0.3]


def test_kl_basis_reproduces_covariance(adler_case, adler_bases):
    T = adler_bases['real'].transport
    C = adler_case.C.matrix
    assert np.max(np.abs(T @ T.T - C)) <= 1e-8 * np.max(np.abs(C))


def test_kl_basis_identity_covariance():
    spectrum = eig_symmetric(np.diag([2.0, -1.0, 0.5]))
    basis = kl_basis(np.eye(3), spectrum, 'real')
    np.testing.assert_allclose(basis.transport, spectrum.vectors, atol=1e-14)
    with pytest.raises(DimensionError):
        kl_basis(np.eye(4), spectrum, 'real')
    with pytest.raises(ValueError):
        kl_basis(np.eye(3), spectrum, 'quaternion')


def test_adler_basis_has_one_positive_mode(adler_bases):
    basis = adler_bases['complex']
    assert basis.spectrum.n_positive == 1
    assert basis.spectrum.n_negative == 0
    assert basis.lambda_one == pytest.approx(1.0, rel=1e-10)
    assert basis.lambda_next == 0.0


def test_unconditional_sample(adler_case, adler_bases):
    basis = adler_bases['real']
    first = sample_unconditional(basis, seed=11, stream=2)
    second = sample_unconditional(basis, seed=11, stream=2)
    np.testing.assert_array_equal(first.field, second.field)
    assert first.weight == 1.0
    assert first.Q == pytest.approx(quadratic_form(adler_case.O, first.field), rel=1e-8, abs=1e-12)
    other = sample_unconditional(basis, seed=11, stream=3)
    assert not np.array_equal(first.t, other.t)


def test_complex_coordinates(rng):
    n = 200_000
    t = standard_coordinates(rng, n, 'complex')
    assert abs(np.mean(t * t)) < 5.0 / math.sqrt(n)
    assert np.mean(np.abs(t) ** 2) == pytest.approx(1.0, abs=5.0 / math.sqrt(n))
    real = standard_coordinates(rng, n, 'real')
    assert np.var(real) == pytest.approx(1.0, abs=5.0 * math.sqrt(2.0 / n))


def test_sampled_covariance_matches_kernel():
    grid = build_grid(1, 2.0, 11)
    C = assemble_covariance(grid, ScalarKernel(length=0.7))
    O = observable_point_intensity(grid, [0.0])
    basis = basis_from_operators(C, O, 'real')
    n = 100_000
    batch = sample_batch(basis, n, seed=3)
    fields = batch.fields(basis)
    empirical = fields.T @ fields / n
    diag = np.diag(C.matrix)
    stderr = np.sqrt((np.outer(diag, diag) + C.matrix ** 2) / n)
    assert np.all(np.abs(empirical - C.matrix) <= 5.0 * stderr + 1e-12)


def test_sample_batch_independent_of_workers(adler_bases):
    basis = adler_bases['complex']
    one = sample_batch(basis, 1001, seed=5, n_streams=4, workers=1)
    three = sample_batch(basis, 1001, seed=5, n_streams=4, workers=3)
    np.testing.assert_array_equal(one.t, three.t)
    np.testing.assert_array_equal(one.Q, three.Q)
    assert len(one) == 1001


def test_cf_inversion_complex_single():
    model = tail_model([1.0], 'complex')
    for u in np.linspace(0.0, 20.0, 9):
        assert tail_prob_cf(model, u) == pytest.approx(math.exp(-u), abs=1e-8)


def test_cf_inversion_real_single():
    model = tail_model([1.0], 'real')
    assert tail_prob_cf(model, 4.0) == pytest.approx(0.045500, abs=1e-6)
    for u in (0.5, 2.0, 9.0):
        assert tail_prob_cf(model, u) == pytest.approx(special.erfc(math.sqrt(u / 2.0)), abs=1e-6)


def test_cf_inversion_rejects_loose_quadrature(monkeypatch):
    monkeypatch.setattr(sampling.integrate, 'quad', lambda *args, **kwargs: (0.1, 5e-8, {}))
    with pytest.raises(QuadratureError):
        tail_prob_cf(tail_model([1.0], 'complex'), 3.0)


def test_cf_inversion_short_circuits():
    assert tail_prob_cf(tail_model([1.0, 0.5], 'real'), -1.0) == 1.0
    assert tail_prob_cf(tail_model([-1.0, -0.5], 'complex'), 0.5) == 0.0


def test_density_by_inversion():
    model = tail_model([1.0], 'real')
    assert tail_density_cf(model, 4.0) == pytest.approx(stats.chi2.pdf(4.0, 1), abs=1e-6)


def test_asymptote_single_eigenvalue():
    complex_model = tail_model([1.0], 'complex')
    asymptote = tail_asymptotic(complex_model, 3.0)
    assert asymptote.probability == pytest.approx(math.exp(-3.0), rel=1e-12)
    assert asymptote.density == pytest.approx(math.exp(-3.0), rel=1e-12)

    real_model = tail_model([1.0], 'real')
    asymptote = tail_asymptotic(real_model, 4.0)
    assert asymptote.density == pytest.approx(0.026995, abs=1e-6)
    assert asymptote.probability == pytest.approx(special.erfc(math.sqrt(2.0)), rel=1e-12)


def test_asymptote_mixed_spectrum():
    complex_model = tail_model(MIXED, 'complex')
    asymptote = tail_asymptotic(complex_model, 10.0)
    assert asymptote.prefactor == pytest.approx(1.0 / (0.6 * 1.3))
    assert asymptote.probability / tail_prob_residues(complex_model, 10.0) == pytest.approx(1.0, rel=1e-3)
    assert asymptote.probability / tail_prob_cf(complex_model, 10.0) == pytest.approx(1.0, rel=1e-3)

    real_model = tail_model(MIXED, 'real')
    ratio = tail_asymptotic(real_model, 20.0).probability / tail_prob_cf(real_model, 20.0)
    assert 0.9 <= ratio <= 1.1


def test_asymptote_degenerate_top_group():
    model = tail_model([1.0, 1.0, 0.2], 'complex')
    assert model.g1 == 2
    u = 12.0
    ratio = tail_asymptotic(model, u).probability / tail_prob_cf(model, u)
    assert ratio == pytest.approx(1.0, rel=0.05)


@pytest.mark.parametrize('u', [-0.5, 0.0, 1.0, 2.0, 5.0])
def test_residues_match_cf(u):
    model = tail_model(MIXED, 'complex')
    assert tail_prob_residues(model, u) == pytest.approx(tail_prob_cf(model, u), abs=1e-6)


def test_residues_preconditions():
    with pytest.raises(RepeatedEigenvalueError):
        tail_prob_residues(tail_model([1.0, 1.0, 0.5], 'complex'), 1.0)
    with pytest.raises(ValueError):
        tail_prob_residues(tail_model(MIXED, 'real'), 1.0)


def test_residues_reject_repeated_top_group():
    model = tail_model([1.0, 1.0, 0.2], 'complex')
    assert model.g1 == 2
    with pytest.raises(RepeatedEigenvalueError):
        tail_prob_residues(model, 5.0)
    with pytest.raises(RepeatedEigenvalueError):
        tail_prob_residues(tail_model([1.0, 0.3, 0.3, -0.5], 'complex'), 1.0)


def test_tail_model_groups_against_top_eigenvalue():
    assert tail_model([1.0, 1.0 - 1e-5, -100.0], 'real').g1 == 1
    assert tail_model([1.0, 1.0 - 1e-9, -100.0], 'real').g1 == 2


def test_tail_model_drops_zeros():
    model = tail_model([0.5, 0.0, -1.0, 1e-14, 2.0], 'real')
    np.testing.assert_array_equal(model.eigenvalues, [2.0, 0.5, -1.0])
    assert model.g1 == 1
    assert model.lambda_next == 0.5
    assert model.mean == pytest.approx(1.5)
    with pytest.raises(EmptySpectrumError):
        tail_model([], 'real')


def test_mc_direct_matches_cf():
    model = tail_model(MIXED, 'complex')
    estimate = tail_prob_mc(model, 3.0, 1_000_000, method='direct', seed=2)
    exact = tail_prob_residues(model, 3.0)
    assert abs(estimate.estimate - exact) <= 5.0 * estimate.stderr
    repeat = tail_prob_mc(model, 3.0, 1_000_000, method='direct', seed=2)
    assert repeat.estimate == estimate.estimate


def test_mc_tilted_deep_tail():
    model = tail_model(MIXED, 'complex')
    estimate = tail_prob_mc(model, 20.0, 200_000, method='tilted', seed=4)
    exact = tail_prob_residues(model, 20.0)
    assert abs(estimate.estimate - exact) <= 5.0 * estimate.stderr
    assert estimate.stderr / estimate.estimate < 0.05


@pytest.mark.parametrize('method', ['direct', 'tilted'])
def test_mc_both_methods_moderate_threshold(method):
    model = tail_model(MIXED, 'real')
    estimate = tail_prob_mc(model, 4.0, 200_000, method=method, seed=8)
    assert abs(estimate.estimate - tail_prob_cf(model, 4.0)) <= 5.0 * estimate.stderr


def test_mc_rejects_small_runs():
    with pytest.raises(ValueError):
        tail_prob_mc(tail_model([1.0], 'real'), 1.0, 999)
    with pytest.raises(ValueError):
        tail_prob_mc(tail_model([1.0], 'real'), 1.0, 5000, method='importance')


def test_tilt_parameters():
    model = tail_model([1.0, 0.5], 'complex')
    tilt = tilt_parameters(model, 9.0, c=0.5)
    assert tilt.theta_top == pytest.approx(0.9)
    np.testing.assert_allclose(tilt.theta, [0.9, 0.5])
    assert tilt_parameters(model, -np.inf, c=0.5).theta_top == 0.0
    with pytest.raises(SamplingError):
        tilt_parameters(model, 9.0, c=2.5)
    with pytest.raises(SamplingError):
        tilt_parameters(model, 9.0, c=-0.1)


def test_default_tilt_constant():
    assert default_tilt_constant(tail_model([1.0], 'complex')) == pytest.approx(1.5)
    assert default_tilt_constant(tail_model([1.0], 'real')) == pytest.approx(0.75)
    assert default_tilt_constant(tail_model([1.0, 0.5], 'complex')) == pytest.approx(1.5)


def test_unconditioned_limit_accepts_everything():
    model = tail_model(MIXED, 'complex')
    batch, summary = draw_conditional(model, -np.inf, method='rejection', seed=1, target=2000)
    assert summary.acceptance_rate == 1.0
    assert summary.predicted_acceptance == 1.0
    assert len(batch) >= 2000


def test_rejection_excess_is_exponential():
    model = tail_model([1.0], 'complex')
    batch, summary = draw_conditional(model, 2.0, seed=6, target=20_000)
    assert summary.method == 'rejection'
    assert np.all(batch.Q > 2.0)
    assert np.mean(batch.Q - 2.0) == pytest.approx(1.0, abs=5.0 / math.sqrt(len(batch)))


def test_tilted_excess_is_exponential():
    model = tail_model([1.0], 'complex')
    batch, summary = draw_conditional(model, 20.0, seed=6, target=5000)
    assert summary.method == 'tilted'
    assert summary.effective_size >= 5000
    assert np.dot(batch.weights, batch.Q - 20.0) == pytest.approx(1.0, abs=0.1)


def test_budget_exhaustion():
    model = tail_model([1.0], 'complex')
    with pytest.raises(SamplingError):
        draw_conditional(model, 50.0, method='rejection', seed=0, target=10, budget=10_000)


def test_no_positive_eigenvalue():
    with pytest.raises(EmptySpectrumError):
        ConditionalSampler(tail_model([-1.0, -0.5], 'complex'), 1.0)
    with pytest.raises(ValueError):
        ConditionalSampler(tail_model([1.0], 'complex'), 1.0, method='mcmc')


def test_unconditional_draw_without_upper_tail():
    model = tail_model([-1.0, -0.5], 'real')
    batch, summary = draw_conditional(model, -np.inf, seed=2, target=500)
    assert summary.method == 'rejection'
    assert len(batch) >= 500
    assert np.all(batch.Q < 0.0)
    with pytest.raises(EmptySpectrumError):
        draw_conditional(model, -1.0, seed=2, target=500)


def test_sample_conditional_stream(adler_case, adler_bases):
    basis = adler_bases['real']
    samples = list(islice(sample_conditional(basis, 1.0, seed=3, target=200), 50))
    assert len(samples) == 50
    for sample in samples:
        assert sample.Q > 1.0
        assert sample.weight == 1.0
        assert quadratic_form(adler_case.O, sample.field) == pytest.approx(sample.Q, rel=1e-8)


def test_draw_conditional_independent_of_workers(adler_bases):
    basis = adler_bases['complex']
    one, _ = draw_conditional(basis, 3.0, method='tilted', seed=9, target=500, workers=1)
    four, _ = draw_conditional(basis, 3.0, method='tilted', seed=9, target=500, workers=4)
    np.testing.assert_array_equal(one.t, four.t)
    np.testing.assert_array_equal(one.log_weights, four.log_weights)


def test_sqrt_feeds_basis(adler_case):
    basis = basis_from_operators(adler_case.C, adler_case.O, 'real', C_half=sqrt_psd(adler_case.C))
    assert basis.dim == adler_case.grid.size
