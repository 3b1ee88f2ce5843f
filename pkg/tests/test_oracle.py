import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fewstate.fp_estimator import band_of
from fewstate.oracle import (
    FrequencyOracle,
    _scan_band,
    exact_entropy,
    exact_fp,
    exact_heavy_hitters,
    exact_level_contributions,
    frequencies,
    lp_norm,
    power_of_two_ceiling,
)

SMALL = [1, 2, 2, 3, 3, 3, 4, 4, 4, 4]


def test_frequencies():
    assert frequencies(SMALL) == Counter({1: 1, 2: 2, 3: 3, 4: 4})
    assert frequencies([]) == Counter()


def test_exact_fp_small_values():
    f = frequencies(SMALL)
    assert exact_fp(f, 0) == 4
    assert exact_fp(f, 1) == 10
    assert exact_fp(f, 2) == 30
    assert exact_fp(f, 3) == 100
    assert exact_fp(f, 0.5) == pytest.approx(1 + math.sqrt(2) + math.sqrt(3) + 2)
    with pytest.raises(ValueError):
        exact_fp(f, -1)


def test_exact_fp_is_exact_for_large_integers():
    f = Counter({1: 10**6, 2: 10**6 + 1})
    assert exact_fp(f, 3) == 10**18 + (10**6 + 1) ** 3


def test_norm_and_heavy_hitters():
    f = frequencies(SMALL)
    assert lp_norm(f, 2) == pytest.approx(math.sqrt(30))
    # 4 >= 0.7 * sqrt(30) = 3.83; 3 is not
    assert exact_heavy_hitters(f, 2, 0.7) == [4]
    assert exact_heavy_hitters(f, 1, 0.3) == [4, 3]


def test_heavy_hitter_boundary_is_inclusive():
    # f = (2, 2): ||f||_2 = 2 sqrt 2, eps = 1/sqrt 2 puts both exactly on the line
    f = Counter({1: 2, 2: 2})
    assert exact_heavy_hitters(f, 2, 1 / math.sqrt(2)) == [1, 2]


def test_entropy_matches_scipy():
    f = frequencies(SMALL)
    assert exact_entropy(f) == pytest.approx(stats.entropy([1, 2, 3, 4], base=2), abs=1e-14)
    assert exact_entropy(Counter({i: 5 for i in range(1, 1025)})) == pytest.approx(10.0)
    assert exact_entropy(Counter()) == 0.0


@given(st.lists(st.integers(1, 50), min_size=1, max_size=300))
def test_entropy_bounds(items):
    f = frequencies(items)
    h = exact_entropy(f)
    assert -1e-12 <= h <= math.log2(len(f)) + 1e-12


@given(st.floats(0.0, 1e15))
def test_power_of_two_ceiling(v):
    m = power_of_two_ceiling(v)
    assert m & (m - 1) == 0
    if v > 1:
        assert v <= m < 2 * v
    else:
        assert m == 1


@given(st.floats(1e-3, 1e12), st.floats(0.5, 1.0), st.integers(1, 60),
       st.sampled_from([1.0, 2.0, 3.0]))
@settings(max_examples=300)
def test_band_lookup_two_routes_agree(f, lam, levels, p):
    # the estimator's log2 lookup against the oracle's linear scan
    mtilde = power_of_two_ceiling(1e9)
    assert band_of(f, lam, mtilde, p, levels) == _scan_band(f**p, lam, mtilde, levels)


def test_level_contributions_sum_to_fp():
    rng = np.random.default_rng(0)
    items = rng.zipf(1.3, 20000)
    f = frequencies(items)
    for p in (1.0, 2.0):
        m = len(items)
        mt = power_of_two_ceiling(m**p)
        lc = exact_level_contributions(f, p, 0.75, mt, 64)
        assert math.fsum(lc.contributions.values()) + lc.remainder == pytest.approx(lc.fp, rel=1e-12)
        assert set(lc.significant(0.5, p, 10.0)) <= set(lc.contributions)


def test_level_contributions_validation():
    with pytest.raises(ValueError):
        exact_level_contributions({1: 2}, 2.0, 0.4, 8, 5)
    with pytest.raises(ValueError):
        exact_level_contributions({1: 2}, 2.0, 0.7, 6, 5)


def test_frequency_oracle_facade():
    o = FrequencyOracle(np.array(SMALL))
    assert o.m == 10
    assert o[4] == 4 and o[99] == 0
    assert o.fp(2) == 30
    assert o.top() == 4
    assert o.heavy_hitters(2, 0.7) == [4]
    assert o.entropy() == pytest.approx(stats.entropy([1, 2, 3, 4], base=2))
