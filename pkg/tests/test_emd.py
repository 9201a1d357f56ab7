import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from eequake.emd import (
    SiftConfig,
    count_zero_crossings,
    decompose,
    envelopes,
    extract_imf,
    find_extrema,
    is_imf,
    sift_once,
)
from eequake.errors import DataError, TooFewExtremaError


def zero_crossing_cycles(x):
    return count_zero_crossings(x) / 2.0


# ---------------------------------------------------------------- extrema


def test_monotone_has_no_extrema():
    mx, mn = find_extrema(np.arange(20.0))
    assert mx.size == 0 and mn.size == 0


def test_sine_four_periods_alternates():
    t = np.linspace(0, 4, 801)[:-1]
    mx, mn = find_extrema(np.sin(2 * np.pi * t + 0.1))
    assert len(mx) == 4 and len(mn) == 4
    merged = sorted([(i, "max") for i in mx] + [(i, "min") for i in mn])
    kinds = [k for _, k in merged]
    assert all(a != b for a, b in zip(kinds, kinds[1:]))


def test_plateau_counts_once_at_midpoint():
    mx, mn = find_extrema([0, 1, 1, 1, 0])
    assert_array_equal(mx, [2])
    assert mn.size == 0


def test_even_plateau_takes_lower_middle():
    mx, _ = find_extrema([0, 2, 2, 2, 2, 0])
    assert_array_equal(mx, [2])


def test_zero_crossings_skip_exact_zeros():
    assert count_zero_crossings([1, 0, -1, 0, 0, 2]) == 2


# ---------------------------------------------------------------- envelopes


def test_sine_envelopes_near_unit():
    t = np.arange(1000)
    x = np.sin(2 * np.pi * t / 50)
    mx, mn = find_extrema(x)
    up, lo = envelopes(x, mx, mn)
    inner = slice(100, 900)
    assert np.max(np.abs(up[inner] - 1)) < 0.05
    assert np.max(np.abs(lo[inner] + 1)) < 0.05


@pytest.mark.parametrize("boundary", ["odd", "mirror", "clamp"])
@pytest.mark.parametrize("seed", range(5))
def test_upper_above_lower_in_interior(seed, boundary):
    rng = np.random.default_rng(seed)
    t = np.arange(400)
    x = sum(rng.uniform(0.2, 1) * np.sin(2 * np.pi * t / p + rng.uniform(0, 6)) for p in (13, 37, 91))
    mx, mn = find_extrema(x)
    up, lo = envelopes(x, mx, mn, boundary)
    assert np.all(up[40:-40] >= lo[40:-40])


def test_single_maximum_is_too_few():
    x = np.concatenate([np.arange(5.0), np.arange(5.0)[::-1]])
    mx, mn = find_extrema(x)
    with pytest.raises(TooFewExtremaError):
        envelopes(x, mx, mn)


# ---------------------------------------------------------------- sifting


def test_symmetric_signal_unchanged_by_one_sift():
    t = np.arange(1000)
    x = np.sin(2 * np.pi * t / 40)
    assert np.max(np.abs(sift_once(x)[100:900] - x[100:900])) < 0.02


def test_one_sift_reduces_offset():
    t = np.arange(500)
    x = np.sin(2 * np.pi * t / 25) + 3.0
    assert abs(np.mean(sift_once(x)[50:450])) < 0.3


def test_zero_vector_is_too_few():
    with pytest.raises(TooFewExtremaError):
        sift_once(np.zeros(50))


def test_single_tone_imf_correlates():
    t = np.arange(1024)
    x = np.sin(2 * np.pi * 12 * t / 1024)
    imf = extract_imf(x)
    assert np.corrcoef(imf.values, x)[0, 1] >= 0.99
    assert imf.converged


def test_fast_tone_zero_crossings_within_five_percent():
    t = np.arange(1024) / 1024
    x = np.sin(2 * np.pi * 64 * t) + 0.8 * np.sin(2 * np.pi * 8 * t)
    imf = extract_imf(x)
    assert abs(count_zero_crossings(imf.values) - 128) <= 0.05 * 128


def test_ramp_is_residue_like():
    with pytest.raises(TooFewExtremaError):
        extract_imf(np.linspace(0, 1, 100))


def test_iteration_cap_flags_imf():
    rng = np.random.default_rng(0)
    imf = extract_imf(rng.standard_normal(300), SiftConfig(sd_threshold=1e-12, max_sift_iterations=3))
    assert imf.flagged
    assert imf.iterations == 3


def test_config_validation():
    with pytest.raises(ValueError):
        SiftConfig(sd_threshold=0)
    with pytest.raises(ValueError):
        SiftConfig(boundary="reflect")
    assert SiftConfig().imf_cap(512) == 11
    assert SiftConfig().imf_cap(600) == 12


# ---------------------------------------------------------------- decomposition


def test_ramp_gives_no_imfs():
    x = np.linspace(2, 5, 64)
    dec = decompose(x)
    assert len(dec) == 0
    assert_array_equal(dec.residue, x)


def test_two_tone_separation():
    t = np.arange(1024) / 1024
    x = np.sin(2 * np.pi * 8 * t) + 0.5 * np.sin(2 * np.pi * t)
    dec = decompose(x)
    assert len(dec) >= 2
    assert zero_crossing_cycles(dec.imfs[0].values) == pytest.approx(8, rel=0.10)
    assert zero_crossing_cycles(dec.imfs[1].values) == pytest.approx(1, rel=0.10)
    assert np.corrcoef(dec.imfs[1].values, 0.5 * np.sin(2 * np.pi * t))[0, 1] > 0.9


def test_mode_ordering_two_tone():
    t = np.arange(2048)
    x = np.sin(2 * np.pi * t / 16) + np.sin(2 * np.pi * t / 160)
    dec = decompose(x)
    spacing = [len(x) / max(count_zero_crossings(m.values), 1) for m in dec.imfs[:2]]
    assert spacing[0] < spacing[1]


def test_short_and_nonfinite_inputs():
    with pytest.raises(DataError):
        decompose(np.arange(7.0))
    with pytest.raises(DataError):
        decompose(np.array([1.0, np.nan] * 10))


def test_max_imfs_respected():
    rng = np.random.default_rng(1)
    dec = decompose(rng.standard_normal(512), SiftConfig(max_imfs=2))
    assert len(dec) == 2
    assert_allclose(dec.reconstruct(), dec.matrix.sum(axis=0) + dec.residue)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(64, 400), st.sampled_from(["odd", "mirror", "clamp"]))
def test_reconstruction_and_imf_criteria(seed, n, boundary):
    x = np.cumsum(np.random.default_rng(seed).standard_normal(n))
    dec = decompose(x, SiftConfig(boundary=boundary))
    err = np.max(np.abs(dec.reconstruct() - x))
    assert err < 1e-10 * max(np.ptp(x), 1e-300)
    assert len(dec) <= math.ceil(math.log2(n)) + 2
    for imf in dec.imfs:
        if not imf.flagged:
            mx, mn = find_extrema(imf.values)
            assert abs(len(mx) + len(mn) - count_zero_crossings(imf.values)) <= 1
    mx, mn = find_extrema(dec.residue)
    assert len(dec) == dec.config.imf_cap(n) or len(mx) + len(mn) < 2


def test_is_imf_rejects_offset_signal():
    t = np.arange(400)
    x = np.sin(2 * np.pi * t / 20)
    assert is_imf(x, np.zeros_like(x))
    assert not is_imf(x + 2, np.zeros_like(x))
