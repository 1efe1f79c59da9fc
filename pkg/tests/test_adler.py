import pytest

from src.applications import adler_conditioned_shape, adler_mode_check
from src.errors import DimensionError
from src.grid import build_grid
from src.kernels import ScalarKernel, TurbulenceKernel
from src.operators import assemble_covariance


@pytest.fixture(scope='module')
def fine_line():
    grid = build_grid(1, 5.0, 201)
    return grid, assemble_covariance(grid, ScalarKernel())


def test_mode_is_covariance_column(fine_line):
    grid, C = fine_line
    report = adler_mode_check(grid, C, ScalarKernel())
    assert report.passed
    assert report.expected == 1.0
    assert report.eigenvalue_lowrank == pytest.approx(1.0, rel=1e-10)
    assert report.eigenvalue_M == pytest.approx(1.0, rel=1e-10)
    assert report.cosine_lowrank >= 1.0 - 1e-10


def test_mode_eigenvalue_is_variance():
    grid = build_grid(1, 5.0, 41)
    kernel = ScalarKernel(variance=4.0)
    report = adler_mode_check(grid, assemble_covariance(grid, kernel), kernel)
    assert report.passed
    assert report.eigenvalue_lowrank == pytest.approx(4.0, rel=1e-10)


def test_mode_away_from_origin(adler_case):
    report = adler_mode_check(adler_case.grid, adler_case.C, adler_case.kernel, point=[1.0])
    assert report.passed


def test_mode_check_needs_scalar_kernel(adler_case):
    with pytest.raises(DimensionError):
        adler_mode_check(adler_case.grid, adler_case.C, TurbulenceKernel())


def test_conditioned_shape_approaches_mode(adler_case, adler_bases):
    shape = adler_conditioned_shape(adler_bases['complex'], adler_case.grid, [4.0, 16.0, 64.0], n=2000, seed=0)
    similarity = [point.mean_similarity for point in shape.points]
    assert shape.similarity_increasing
    assert similarity[-1] >= 0.9
    assert shape.baseline.method == 'rejection'
    assert shape.baseline.mean_similarity < similarity[0]
    assert shape.ratio_median_decreasing
    assert shape.passed


def test_control_arm_uses_its_own_streams(adler_case, adler_bases, monkeypatch):
    from src import concentration
    from src.applications import helicity
    from src.sampling import ConditionalSampler

    starts = []

    def recording(*args, **kwargs):
        starts.append(kwargs.get('first_stream', 0))
        return ConditionalSampler(*args, **kwargs)

    monkeypatch.setattr(helicity, 'ConditionalSampler', recording)
    monkeypatch.setattr(concentration, 'ConditionalSampler', recording)
    adler_conditioned_shape(adler_bases['complex'], adler_case.grid, [4.0, 16.0, 64.0], n=200, seed=0, n_streams=4)

    # the default floor draws streams 0..3
    blocks = sorted([0] + starts)
    assert len(blocks) == 8
    assert all(b - a >= 4 for a, b in zip(blocks, blocks[1:]))
