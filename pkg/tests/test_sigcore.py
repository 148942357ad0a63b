import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modrec.errors import DegenerateExampleError
from modrec.sigcore import (IqExample, RandomStream, measure_snr, normalize,
                            normalize_power, power)


def test_power_constant():
    x = np.full(64, 3.0 + 0.0j)
    assert power(x) == pytest.approx(9.0, rel=1e-12)


def test_normalize_unit_power():
    rng = np.random.default_rng(0)
    x = rng.normal(size=1024) + 1j * rng.normal(size=1024)
    y = normalize_power(x)
    assert power(y) == pytest.approx(1.0, rel=1e-12)


def test_normalize_idempotent():
    rng = np.random.default_rng(1)
    x = rng.normal(size=256) + 1j * rng.normal(size=256)
    once = normalize_power(x)
    twice = normalize_power(once)
    np.testing.assert_allclose(twice, once, rtol=1e-12)


@given(scale=st.floats(min_value=1e-6, max_value=1e6), seed=st.integers(0, 100))
@settings(max_examples=40, deadline=None)
def test_normalize_scale_invariant(scale, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=128) + 1j * rng.normal(size=128)
    np.testing.assert_allclose(normalize_power(x * scale), normalize_power(x),
                               rtol=1e-9)


def test_normalize_zero_raises():
    with pytest.raises(DegenerateExampleError):
        normalize_power(np.zeros(16, dtype=complex))
    with pytest.raises(DegenerateExampleError):
        normalize_power(np.array([], dtype=complex))


def test_normalize_example_preserves_fields():
    ex = IqExample(samples=np.full(8, 2.0 + 0.0j), label=3, snr_db=10.0,
                   example_index=7)
    out = normalize(ex)
    assert out.label == 3 and out.snr_db == 10.0 and out.example_index == 7
    assert power(out) == pytest.approx(1.0, rel=1e-12)


def test_measure_snr_exact_cases():
    clean = np.ones(1000, dtype=complex)
    assert measure_snr(clean, clean) == math.inf
    noisy = clean + math.sqrt(0.1) * np.ones(1000, dtype=complex)
    assert measure_snr(clean, noisy) == pytest.approx(10.0, abs=1e-9)
    noisy0 = clean + np.ones(1000, dtype=complex)
    assert measure_snr(clean, noisy0) == pytest.approx(0.0, abs=1e-9)


def test_measure_snr_shape_mismatch():
    with pytest.raises(DegenerateExampleError):
        measure_snr(np.ones(4, dtype=complex), np.ones(5, dtype=complex))


def test_random_stream_reproducible():
    a = RandomStream(123, 5).generator().standard_normal(32)
    b = RandomStream(123, 5).generator().standard_normal(32)
    np.testing.assert_array_equal(a, b)


def test_random_stream_distinct_indices():
    a = RandomStream(123, 0).generator().standard_normal(32)
    b = RandomStream(123, 1).generator().standard_normal(32)
    assert not np.allclose(a, b)


def test_random_stream_distinct_seeds():
    a = RandomStream(1, 0).generator().standard_normal(32)
    b = RandomStream(2, 0).generator().standard_normal(32)
    assert not np.allclose(a, b)


def test_random_stream_independent_of_draw_history():
    # stream i is reproducible without generating streams 0..i-1
    direct = RandomStream(9, 1000).generator().standard_normal(8)
    for i in range(5):
        RandomStream(9, i).generator().standard_normal(100)
    again = RandomStream(9, 1000).generator().standard_normal(8)
    np.testing.assert_array_equal(direct, again)
