import pytest
from hypothesis import given
from hypothesis import strategies as st

from fewstate.fp_estimator import FpEstimator, band_of
from fewstate.generators import gen_zipf
from fewstate.model import SeededPrf, StateMeter, derive_params, level_rate
from fewstate.oracle import FrequencyOracle


def test_band_edges():
    # lam * M = 1024: band i covers [1024 / 2^i, 2048 / 2^i)
    assert band_of(32, 1.0, 1024, 1) == 5
    assert band_of(31.9, 1.0, 1024, 1) == 6
    assert band_of(63.9, 1.0, 1024, 1) == 5
    assert band_of(16, 1.0, 1024, 1) == 6
    assert band_of(512, 1.0, 1024, 1) == 1
    assert band_of(2000, 1.0, 1024, 1) == 1
    assert band_of(0, 1.0, 1024, 1) is None
    assert band_of(1, 1.0, 1024, 1, levels=5) is None


@given(st.floats(1.0, 1e6), st.floats(0.5, 1.0))
def test_band_contains_value(f, lam):
    mt = 1 << 40
    i = band_of(f, lam, mt, 2.0)
    lo = lam * mt / 2.0**i
    assert lo <= f * f < 2 * lo or (i == 1 and f * f >= lam * mt)


def test_level_of_band():
    prm = derive_params(2**10, 2**12, 0.5, band_offset=5)
    est = FpEstimator(prm, SeededPrf(0))
    assert [est.level_of_band(i) for i in (1, 5, 6, 7, 12)] == [1, 1, 1, 2, 7]


def test_lambda_range_and_determinism():
    prm = derive_params(2**10, 2**12, 0.5)
    lams = {FpEstimator(prm, SeededPrf(s)).lam for s in range(50)}
    assert all(0.5 <= v <= 1 for v in lams)
    assert len(lams) == 50
    assert FpEstimator(prm, SeededPrf(3)).lam == FpEstimator(prm, SeededPrf(3)).lam


def _run(stream, prm, seed, **kw):
    meter = StateMeter()
    est = FpEstimator(prm, SeededPrf(seed), meter, **kw)
    for t, j in enumerate(stream.items.tolist(), 1):
        est.process(t, j)
        meter.end_update()
    return est, meter


def test_small_zipf_f2():
    s = gen_zipf(2**10, 2**13, 1.2, 1)
    prm = derive_params(2**10, 2**13, 0.5)
    est, meter = _run(s, prm, 0)
    truth = FrequencyOracle(s.items).fp(2)
    assert est.estimate() == pytest.approx(truth, rel=0.3)


def test_exact_mode_bands_match_oracle_bands():
    # with exact counters and rho = 1 every held count is f - 1, so each
    # level-1 row places the top items in the oracle's band (or the next)
    s = gen_zipf(2**8, 2**12, 1.3, 2)
    prm = derive_params(2**8, 2**12, 0.5, rho=1.0, k_lo=4096, k_hi=4096)
    est, _ = _run(s, prm, 1, exact_counters=True, rescale="literal")
    oracle = FrequencyOracle(s.items)
    grid = est.grids[(1, 0)]
    m = len(s)
    from fewstate.oracle import power_of_two_ceiling
    mt = power_of_two_ceiling(float(m) ** 2)
    for j, f in sorted(oracle.freq.items(), key=lambda kv: -kv[1])[:5]:
        fh = grid.level_estimate(j, 1)
        assert f - 1 <= fh <= f
        bi, bt = band_of(fh, est.lam, mt, 2), band_of(f, est.lam, mt, 2)
        assert bi in (bt, bt + 1)


def test_grid_rates():
    s = gen_zipf(2**12, 2**13, 0.5, 3)
    prm = derive_params(2**12, 2**13, 0.5)
    est, _ = _run(s, prm, 4)
    for (level, r), n_seen in ((k, est._clock[k]) for k in est.grids):
        if level <= 3:
            assert n_seen / len(s) == pytest.approx(level_rate(level), rel=0.25)
