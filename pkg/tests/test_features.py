"""Feature extractor tests against direct-expectation and partition oracles."""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from modrec.errors import DataError, DegenerateExampleError, NumericError
from modrec.features import (
    FEATURE_NAMES,
    N_FEATURES,
    analog_stats,
    cumulant,
    cumulants,
    featurize,
    featurize_batch,
    hom,
)
from modrec.modem import constellation_for
from modrec.sigcore import normalize_power


def RNG(seed):
    return np.random.default_rng(seed)


def random_wave(seed, n=192):
    rng = RNG(seed)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


# independent reference routes live in tests/oracles.py
from oracles import brute_cumulant, brute_moment

# ---------------------------------------------------------------------------
# moments and cumulants


@pytest.mark.parametrize("p,q", [(2, 0), (2, 1), (2, 2), (4, 0), (4, 1),
                                 (4, 2), (4, 3), (6, 0), (6, 1), (6, 2),
                                 (6, 3)])
def test_moment_matches_direct_expectation(p, q):
    for seed in range(5):
        s = random_wave(seed)
        assert hom(s, p, q) == pytest.approx(brute_moment(s, p, q),
                                             abs=1e-10)


@pytest.mark.parametrize("key", ["C20", "C21", "C40", "C41", "C42",
                                 "C60", "C61", "C62", "C63"])
def test_cumulant_matches_partition_formula(key):
    p, q = int(key[1]), int(key[2])
    for seed in range(5):
        s = random_wave(seed + 50)
        got = cumulants(s)[key]
        want = brute_cumulant(s, p, q)
        assert got == pytest.approx(want, abs=1e-9)


def test_cumulant_single_lookup():
    s = random_wave(3)
    assert cumulant(s, 4, 2) == cumulants(s)["C42"]
    with pytest.raises(DataError):
        cumulant(s, 4, 3)


def test_hom_validation():
    s = random_wave(0)
    with pytest.raises(DataError):
        hom(s, 3, 0)
    with pytest.raises(DataError):
        hom(s, 4, 5)


def _exact_constellation_wave(name):
    # every point exactly once: sample mean equals the true expectation
    return constellation_for(name).points.astype(np.complex128)


def test_bpsk_closed_form_cumulants():
    c = cumulants(_exact_constellation_wave("BPSK"))
    for key in ("C40", "C41", "C42"):
        assert c[key] == pytest.approx(-2.0, abs=1e-12)
    for key in ("C60", "C61", "C62", "C63"):
        assert c[key] == pytest.approx(16.0, abs=1e-12)


def test_qpsk_closed_form_cumulants():
    c = cumulants(_exact_constellation_wave("QPSK"))
    assert c["C40"] == pytest.approx(-1.0, abs=1e-12)
    assert c["C41"] == pytest.approx(0.0, abs=1e-12)
    assert c["C42"] == pytest.approx(-1.0, abs=1e-12)


def test_16qam_closed_form_cumulants():
    c = cumulants(_exact_constellation_wave("16QAM"))
    assert c["C40"] == pytest.approx(-0.68, abs=1e-12)
    assert c["C42"] == pytest.approx(-0.68, abs=1e-12)
    assert c["C63"] == pytest.approx(2.08, abs=1e-12)


def test_gaussian_cumulants_vanish():
    rng = RNG(100)
    n = 1 << 16
    s = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
    c = cumulants(s)
    # estimator spread grows with order: std(M60) ~ sqrt(720 / n) here
    for key in ("C40", "C41", "C42"):
        assert abs(c[key]) < 0.1, key
    for key in ("C60", "C61", "C62", "C63"):
        assert abs(c[key]) < 0.6, key


# ---------------------------------------------------------------------------
# envelope/phase/frequency statistics


def test_analog_stats_match_direct_computation():
    s = random_wave(7, n=500)
    got = analog_stats(s)

    amp = np.abs(s)
    a = amp / amp.mean() - 1.0
    phase = np.unwrap(np.angle(s))
    ph = phase - phase.mean()
    freq = np.diff(phase) / (2 * np.pi)

    for series, (mu, sig, kurt) in zip(
            (a, ph, freq),
            ((got.amp_mu, got.amp_sigma, got.amp_kurt),
             (got.phase_mu, got.phase_sigma, got.phase_kurt),
             (got.freq_mu, got.freq_sigma, got.freq_kurt))):
        assert mu == pytest.approx(series.mean(), abs=1e-12)
        assert sig == pytest.approx(series.std(), abs=1e-12)
        # independent kurtosis route (Pearson, not excess)
        assert kurt == pytest.approx(
            scipy.stats.kurtosis(series, fisher=False), abs=1e-10)
    assert not got.degenerate


def test_constant_envelope_is_degenerate():
    n = np.arange(512)
    s = np.exp(2j * np.pi * 0.05 * n)
    got = analog_stats(s)
    assert got.degenerate
    assert got.amp_sigma == pytest.approx(0.0, abs=1e-12)
    assert got.amp_kurt == 0.0
    assert got.freq_kurt == 0.0
    assert got.freq_mu == pytest.approx(0.05, abs=1e-12)


# ---------------------------------------------------------------------------
# assembled vector


def test_feature_names_shape():
    assert N_FEATURES == 28
    assert len(FEATURE_NAMES) == 28
    assert len(set(FEATURE_NAMES)) == 28


def test_featurize_wiring_against_oracles():
    # each reported entry is the order-normalized magnitude of the oracle
    s = normalize_power(random_wave(21, n=256))
    vec = featurize(s).values
    orders = {"2": 2, "4": 4, "6": 6}
    for j, name in enumerate(FEATURE_NAMES[:10]):
        p, q = int(name[1]), int(name[2])
        want = abs(brute_moment(s, p, q)) ** (2.0 / orders[name[1]])
        assert vec[j] == pytest.approx(want, abs=1e-10), name
    for j, name in enumerate(FEATURE_NAMES[10:19]):
        p, q = int(name[1]), int(name[2])
        want = abs(brute_cumulant(s, p, q)) ** (2.0 / orders[name[1]])
        assert vec[10 + j] == pytest.approx(want, abs=1e-9), name
    stats = analog_stats(s)
    np.testing.assert_allclose(vec[19:], stats.values(), atol=1e-12)


def test_batch_matches_single():
    batch = np.stack([random_wave(s, n=128) for s in range(8)])
    rows = featurize_batch(batch)
    for i in range(8):
        np.testing.assert_allclose(rows[i], featurize(batch[i]).values,
                                   atol=1e-12)


def test_global_phase_invariance():
    s = random_wave(31, n=256)
    base = featurize(s).values
    rotated = featurize(s * np.exp(1j * 0.83)).values
    np.testing.assert_allclose(rotated, base, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 1000))
def test_scale_invariance(scale, seed):
    s = random_wave(seed, n=128)
    np.testing.assert_allclose(featurize(scale * s).values,
                               featurize(s).values, atol=1e-9)


def test_zero_power_raises():
    with pytest.raises(DegenerateExampleError):
        featurize(np.zeros(64, dtype=np.complex128))
    batch = np.stack([random_wave(0, 64), np.zeros(64, dtype=np.complex128)])
    with pytest.raises(DegenerateExampleError):
        featurize_batch(batch)


def test_non_finite_input_raises():
    bad = random_wave(1, 64)
    bad[10] = np.nan + 1j * np.nan
    with pytest.raises((NumericError, DegenerateExampleError)):
        featurize_batch(bad[None, :])


def test_batch_shape_validation():
    with pytest.raises(DataError):
        featurize_batch(random_wave(0, 64))
