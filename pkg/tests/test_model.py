import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fewstate.model import (
    SeededPrf,
    StateMeter,
    Update,
    derive_params,
    level_rate,
    lower_median,
    time_member,
    universe_member,
)


# -- meter -------------------------------------------------------------------


def test_several_mutations_in_one_update_count_once():
    meter = StateMeter()
    for _ in range(3):
        meter.mark_dirty()
    meter.end_update()
    assert meter.total_state_changes == 1
    assert not meter.dirty


def test_clean_update_counts_nothing():
    meter = StateMeter()
    meter.end_update()
    assert meter.total_state_changes == 0
    assert meter.updates == 1


def test_all_mutating_updates_count_m():
    meter = StateMeter()
    for _ in range(50):
        meter.mark_dirty()
        meter.end_update()
    assert meter.total_state_changes == 50


def test_peak_words_tracks_maximum():
    meter = StateMeter()
    meter.add_words(10)
    meter.add_words(-4)
    meter.add_words(2)
    assert meter.words == 8
    assert meter.peak_words == 10


@given(st.lists(st.booleans(), max_size=200))
def test_meter_counts_dirty_updates(flags):
    meter = StateMeter()
    seen = []
    for f in flags:
        if f:
            meter.mark_dirty()
        meter.end_update()
        seen.append(meter.total_state_changes)
    assert meter.total_state_changes == sum(flags)
    assert meter.total_state_changes <= meter.updates
    assert all(a <= b for a, b in zip(seen, seen[1:]))


def test_update_fields():
    u = Update(3, 7)
    assert (u.t, u.item) == (3, 7)


# -- prf ---------------------------------------------------------------------


def test_prf_is_deterministic_and_tag_separated():
    a, b = SeededPrf(42, "x"), SeededPrf(42, "x")
    assert [a.bits(i) for i in range(20)] == [b.bits(i) for i in range(20)]
    c = SeededPrf(42, "y")
    assert [a.bits(i) for i in range(20)] != [c.bits(i) for i in range(20)]
    assert SeededPrf(43, "x").bits(5) != a.bits(5)


def test_prf_scalar_and_array_agree():
    prf = SeededPrf(7, "arr")
    xs = np.arange(0, 5000, 7)
    assert prf.bits_array(xs).tolist() == [prf.bits(int(x)) for x in xs]
    assert prf.max_level_array(xs).tolist() == [prf.max_level(int(x)) for x in xs]
    np.testing.assert_array_equal(prf.uniform_array(xs), [prf.uniform(int(x)) for x in xs])


def test_open_uniform_is_strictly_inside():
    u = SeededPrf(3).open_uniform_array(np.arange(10000))
    assert u.min() > 0 and u.max() < 1


def test_prf_uniform_moments():
    u = SeededPrf(11).uniform_array(np.arange(200_000))
    assert abs(u.mean() - 0.5) < 0.005
    assert abs(u.var() - 1 / 12) < 0.002
    # empirical CDF close to the identity
    hist, _ = np.histogram(u, bins=20, range=(0, 1))
    assert np.all(np.abs(hist / u.size - 0.05) < 0.003)


def test_child_and_rng_are_reproducible():
    prf = SeededPrf(5)
    assert prf.child("a").key == SeededPrf(5).child("a").key
    assert prf.rng().random() == SeededPrf(5).rng().random()


# -- nested subsampling --------------------------------------------------------


@given(st.integers(0, 2**40), st.integers(1, 30), st.integers(0, 2**32))
def test_membership_is_nested(item, level, seed):
    prf = SeededPrf(seed, "u")
    if universe_member(prf, item, level + 1):
        assert universe_member(prf, item, level)


@given(st.integers(0, 2**40), st.integers(1, 30))
def test_membership_matches_threshold(item, level):
    prf = SeededPrf(99, "u")
    assert universe_member(prf, item, level) == (prf.uniform(item) < level_rate(level))


def test_level_one_contains_everything():
    prf = SeededPrf(1)
    assert all(universe_member(prf, i, 1) for i in range(1000))
    assert all(time_member(prf, i, 1) for i in range(1000))


def test_subsample_rates():
    prf = SeededPrf(2024, "rate")
    levels = prf.max_level_array(np.arange(1, 1 << 17))
    for level in (2, 3, 5):
        frac = np.mean(levels >= level)
        assert abs(frac - level_rate(level)) < 4 * math.sqrt(level_rate(level) / levels.size)


def test_membership_rejects_level_zero():
    with pytest.raises(ValueError):
        universe_member(SeededPrf(1), 3, 0)
    with pytest.raises(ValueError):
        time_member(SeededPrf(1), 3, 0)


def test_level_rate_values():
    assert level_rate(1) == 1.0
    assert level_rate(2) == 0.5
    assert level_rate(11) == 2.0**-10


def test_lower_median():
    assert lower_median([3, 1, 2]) == 2
    assert lower_median([4, 1, 3, 2]) == 2
    assert lower_median([5]) == 5


# -- parameters --------------------------------------------------------------


def test_derive_params_validation():
    with pytest.raises(ValueError):
        derive_params(100, 100, 1.5)
    with pytest.raises(ValueError):
        derive_params(100, 100, 0.1, delta=0)
    with pytest.raises(ValueError):
        derive_params(100, 100, 0.1, p=0.5)
    with pytest.raises(ValueError):
        derive_params(1, 100, 0.1)
    with pytest.raises(ValueError):
        derive_params(100, 100, 0.1, preset="nope")
    with pytest.raises(ValueError):
        derive_params(100, 100, 0.1, bogus=3)


@given(st.integers(2, 2**24), st.integers(1, 2**24), st.floats(0.01, 0.99),
       st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.sampled_from(["paper", "practical"]))
@settings(max_examples=60)
def test_param_invariants(n, m, eps, p, preset):
    prm = derive_params(n, m, eps, 0.1, p, preset)
    assert 0 < prm.rho <= 1
    assert prm.rho == min(1.0, prm.rho_formula)
    assert prm.kappa >= 1 or preset == "practical"
    assert 1 <= prm.k_lo <= prm.k_hi
    assert prm.time_levels == math.ceil(math.log2(m)) + 1
    assert prm.fp_levels == math.ceil(p * math.log2(n * m))


def test_practical_rate_shape():
    # rho scales like n^(1 - 1/p) / m when m >= n
    a = derive_params(2**12, 2**16, 0.5, p=2.0)
    b = derive_params(2**14, 2**16, 0.5, p=2.0)
    assert b.rho_formula / a.rho_formula == pytest.approx(2.0)
    # and like m^(-1/p) when m < n
    c = derive_params(2**20, 2**10, 0.5, p=2.0)
    d = derive_params(2**20, 2**12, 0.5, p=2.0)
    assert c.rho_formula / d.rho_formula == pytest.approx(2.0)


def test_kappa_switches_at_two():
    assert derive_params(2**10, 2**12, 0.5, p=1.5).kappa == 4.0
    prm = derive_params(2**10, 2**12, 0.5, p=3.0)
    assert prm.kappa == pytest.approx(4.0 * 2**(10 / 3))


def test_overrides_win():
    prm = derive_params(2**10, 2**12, 0.5, rho=0.25, band_offset=3, k_lo=10, k_hi=12)
    assert (prm.rho, prm.band_offset, prm.k_lo, prm.k_hi) == (0.25, 3, 10, 12)


def test_substream_params_keep_knobs():
    prm = derive_params(2**10, 2**12, 0.5, log_factor=2.0)
    sub = prm.for_substream(2**9, 2**11)
    assert sub.log_nm == 2.0
    assert sub.n == 2**9 and sub.m_bound == 2**11


def test_formula_preset_gamma_and_reps():
    prm = derive_params(2**16, 2**16, 0.1, p=2.0, preset="paper")
    assert prm.gamma == 2.0**21
    assert prm.hh_reps == 16
    assert prm.fp_reps == 4
    assert prm.rho == 1.0
