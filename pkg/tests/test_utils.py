import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.utils.io import canonical_hash, format_float, sha256_file, to_json_text, write_csv, write_json
from src.utils.rng import split_counts, standard_coordinates, stream_generator
from src.utils.stats import (
    effective_sample_size,
    non_increasing,
    normalized_weights,
    strictly_decreasing,
    weighted_frequency,
    wilson_interval,
)


def test_format_float():
    assert format_float(0.1) == '0.10000000000000001'
    assert format_float(2.0) == '2'
    assert format_float(float('nan')) == 'NaN'
    assert format_float(float('inf')) == 'Infinity'
    assert format_float(-np.inf) == '-Infinity'


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_is_exact(value):
    assert float(format_float(value)) == value


def test_json_text_is_deterministic():
    payload = {'b': np.float64(0.1), 'a': [1, True, None], 'c': np.arange(2)}
    text = to_json_text(payload)
    assert text == to_json_text(payload)
    assert '0.10000000000000001' in text
    assert json.loads(text) == {'b': 0.1, 'a': [1, True, None], 'c': [0, 1]}


def test_json_rejects_unknown_objects():
    with pytest.raises(TypeError):
        to_json_text({'x': object()})


def test_write_csv(tmp_path):
    path = write_csv(tmp_path / 'table.csv', ('u', 'ok', 'value'), [(1.5, True, None), (np.float64(0.1), False, 'x')])
    with path.open(encoding='utf-8') as handle:
        rows = list(csv.reader(handle))
    assert rows == [['u', 'ok', 'value'], ['1.5', 'true', ''], ['0.10000000000000001', 'false', 'x']]


def test_hashes(tmp_path):
    assert canonical_hash({'a': 1, 'b': [1.0, 2.0]}) == canonical_hash({'b': [1.0, 2.0], 'a': 1})
    assert canonical_hash({'a': 1}) != canonical_hash({'a': 2})
    first = write_json(tmp_path / 'one.json', {'x': 1.0})
    second = write_json(tmp_path / 'two.json', {'x': 1.0})
    assert sha256_file(first) == sha256_file(second)
    assert len(sha256_file(first)) == 64


def test_stream_generator_is_addressable():
    a = stream_generator(7, 3).standard_normal(5)
    b = stream_generator(7, 3).standard_normal(5)
    c = stream_generator(7, 4).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        stream_generator(-1)
    with pytest.raises(ValueError):
        stream_generator(0, 2 ** 64)


def test_split_counts():
    assert split_counts(10, 3) == [4, 3, 3]
    assert split_counts(2, 4) == [1, 1, 0, 0]
    assert sum(split_counts(1001, 4)) == 1001


def test_standard_coordinates_kind():
    rng = stream_generator(0)
    assert standard_coordinates(rng, (2, 3), 'complex').dtype == complex
    with pytest.raises(ValueError):
        standard_coordinates(rng, 3, 'quaternion')


def test_wilson_interval():
    low, high = wilson_interval(0.5, 100)
    assert low == pytest.approx(0.4038, abs=1e-4)
    assert high == pytest.approx(0.5962, abs=1e-4)
    low, high = wilson_interval(0.0, 1000)
    assert low == pytest.approx(0.0, abs=1e-12)
    assert 0.0 < high < 0.004
    assert wilson_interval(0.3, 0) == (0.0, 1.0)


def test_weights():
    assert effective_sample_size(np.ones(10)) == pytest.approx(10.0)
    assert effective_sample_size([1.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert effective_sample_size([]) == 0.0
    np.testing.assert_allclose(normalized_weights([-1000.0, -1000.0]), [0.5, 0.5])
    assert weighted_frequency([True, False, True, False], [0.1, 0.2, 0.3, 0.4]) == pytest.approx(0.4)


def test_trend_helpers():
    assert non_increasing([0.5, 0.6, 0.2], [0.4, 0.45, 0.1], [0.6, 0.7, 0.3])
    assert not non_increasing([0.2, 0.6], [0.1, 0.5], [0.3, 0.7])
    assert strictly_decreasing([0.5, 0.2, 0.0], [0.7, 0.4, 0.1])
    assert not strictly_decreasing([0.5, 0.2], [0.7, 0.6])
