"""F_p estimation for p in (0, 2] with p-stable projections.

Each row i holds <D_i, x> for a p-stable random vector D_i whose entries
are regenerated from the PRF when an item arrives.  On an insertion-only
stream the positive and negative parts of the projection only grow, so
each is stored in a monotone :class:`~fewstate.morris.ApproxAccumulator`
style level and the projection is recovered as their difference.

``StableBank`` runs several orders p over the same random draws (used by
the entropy estimator); ``StableSketch`` is the single-order front end.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .model import SeededPrf, StateMeter
from .morris import accumulate_levels


def sample_p_stable(p: float, r: float, theta: float) -> float:
    """Chambers-Mallows-Stuck draw from (r, theta).

    With r uniform on (0, 1] and theta uniform on (-pi/2, pi/2) the result is
    symmetric p-stable with characteristic function exp(-|t|^p).
    """
    if not 0 < p <= 2:
        raise ValueError("p must lie in (0, 2]")
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    if not -math.pi / 2 < theta < math.pi / 2:
        raise ValueError("theta must lie strictly inside (-pi/2, pi/2)")
    w = math.log(1.0 / r)
    head = math.sin(p * theta) / math.cos(theta) ** (1.0 / p)
    if p == 1:
        return head
    if w == 0:
        # r = 1: the tail factor is 0 or infinite depending on the sign of 1/p - 1
        return 0.0 if p > 1 else math.copysign(math.inf, head) if head else 0.0
    return head * (math.cos(theta * (1 - p)) / w) ** (1.0 / p - 1.0)


def _stable_matrix(ps: np.ndarray, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Vectorised draws: rows of ``ps`` (shape (k, 1)) against (r, theta) vectors."""
    w = -np.log(r)
    head = np.sin(ps * theta) / np.cos(theta) ** (1.0 / ps)
    with np.errstate(divide="ignore", over="ignore"):
        tail = (np.cos(theta * (1 - ps)) / w) ** (1.0 / ps - 1.0)
    return head * tail


def _abs_cdf(x: float, p: float) -> float:
    """P(|X| <= x) for the standard symmetric p-stable law."""
    if p == 1:
        return 2.0 / math.pi * math.atan(x)
    e = p / (1 - p)

    def amp(theta):
        return math.sin(p * theta) / math.cos(theta) ** (1 / p) * math.cos((1 - p) * theta) ** (1 / p - 1)

    def inside(theta):
        a = amp(theta)
        if a <= 0:
            return 1.0
        # W ~ Exp(1); |X| <= x is a tail event of W whose log-threshold is
        # e * log(a / x); work in logs to survive p close to 1
        z = math.exp(min(700.0, e * (math.log(a) - math.log(x))))
        return math.exp(-z) if p < 1 else -math.expm1(-z)

    # the integrand switches between ~1 and ~0 near amp(theta) = x over a
    # width ~ 1 / (|e| * dlog(amp)/dtheta), which is tiny for p close to 1;
    # quad needs breakpoints at that scale or it steps right over the switch
    brk = []
    try:
        mid = optimize.brentq(lambda th: amp(th) - x, 1e-12, math.pi / 2 - 1e-12, xtol=1e-15)
    except ValueError:
        mid = None
    if mid is not None:
        # difference quotient kept strictly inside (0, pi/2)
        lo_th = max(mid - 1e-7, 0.5 * mid)
        hi_th = min(mid + 1e-7, 0.5 * (mid + math.pi / 2))
        slope = (math.log(amp(hi_th)) - math.log(amp(lo_th))) / (hi_th - lo_th)
        width = 1.0 / (abs(e) * abs(slope)) if slope else 1e-3
        brk.append(mid)
        step = width
        while step < math.pi / 2:
            brk.extend(v for v in (mid - step, mid + step) if 0 < v < math.pi / 2)
            step *= 2
        brk.sort()
    val, _ = integrate.quad(inside, 0.0, math.pi / 2, points=brk or None, limit=400,
                            epsabs=1e-14, epsrel=1e-13)
    return 2.0 / math.pi * val


@lru_cache(maxsize=None)
def abs_median(p: float) -> float:
    """Median of |X| for the standard symmetric p-stable law."""
    if not 0 < p <= 2:
        raise ValueError("p must lie in (0, 2]")
    if p == 1:
        return 1.0
    hi = 1.0
    while _abs_cdf(hi, p) < 0.5:
        hi *= 2
    lo = hi / 2
    while _abs_cdf(lo, p) > 0.5:
        lo /= 2
    return optimize.brentq(lambda x: _abs_cdf(x, p) - 0.5, lo, hi, xtol=1e-15, rtol=1e-14)


class StableBank:
    """p-stable sketches for several orders sharing the same random draws.

    Args:
        ps: orders in (0, 2].
        rows: number of projections per order.
        prf: seeds the sketch entries and the rounding coins.
        a: accumulator base; smaller is more accurate and changes state more.
        meter: shared cost meter.
        exact: keep exact float sums instead of accumulator levels.
        coins: "shared" uses one uniform per update for every accumulator;
            "per-row" draws one uniform per row (shared across orders).
    """

    def __init__(self, ps, rows: int, prf: SeededPrf, a: float = 0.002,
                 meter: StateMeter | None = None, exact: bool = False,
                 coins: str = "shared"):
        ps = np.atleast_1d(np.asarray(ps, dtype=np.float64))
        if np.any(ps <= 0) or np.any(ps > 2):
            raise ValueError("every p must lie in (0, 2]")
        if rows < 1:
            raise ValueError("rows must be >= 1")
        if coins not in ("shared", "per-row"):
            raise ValueError(f"unknown coin mode {coins!r}")
        self.ps = ps
        self.rows = rows
        self.a = a
        self.exact = exact
        self.coins = coins
        self.meter = meter if meter is not None else StateMeter()
        self._theta_prf = prf.child("theta")
        self._radius_prf = prf.child("radius")
        self.rng = np.random.default_rng(prf.child("coins").key)
        self._row_ids = np.arange(rows, dtype=np.uint64)
        shape = (len(ps), rows)
        dtype = np.float64 if exact else np.int64
        self.plus = np.zeros(shape, dtype=dtype)
        self.minus = np.zeros(shape, dtype=dtype)
        self.meter.add_words(2 * len(ps) * rows)

    def entries(self, item: int) -> np.ndarray:
        """Column of D for ``item``: shape (len(ps), rows)."""
        keys = (np.uint64(item) << np.uint64(32)) | self._row_ids
        theta = math.pi * (self._theta_prf.open_uniform_array(keys) - 0.5)
        r = self._radius_prf.open_uniform_array(keys)
        return _stable_matrix(self.ps[:, None], r, theta)

    def process(self, item: int) -> None:
        col = self.entries(item)
        pos = col > 0
        weights = np.abs(col)
        if self.exact:
            self.plus += np.where(pos, weights, 0.0)
            self.minus += np.where(pos, 0.0, weights)
            if np.any(weights > 0):
                self.meter.dirty = True
            return
        if self.coins == "shared":
            u = self.rng.random()
        else:
            u = self.rng.random(self.rows)
        current = np.where(pos, self.plus, self.minus)
        new = accumulate_levels(current, weights, self.a, u)
        moved = new != current
        if moved.any():
            self.plus = np.where(pos, new, self.plus)
            self.minus = np.where(pos, self.minus, new)
            self.meter.dirty = True

    def _values(self, levels: np.ndarray) -> np.ndarray:
        if self.exact:
            return levels
        return np.expm1(levels * math.log1p(self.a)) / self.a

    def projections(self) -> np.ndarray:
        """Reconstructed <D_i, x> per order and row."""
        return self._values(self.plus) - self._values(self.minus)

    def cancellation_ratio(self) -> np.ndarray:
        """Per order, median over rows of (plus + minus) / |plus - minus|."""
        pv, mv = self._values(self.plus), self._values(self.minus)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.median((pv + mv) / np.abs(pv - mv), axis=1)

    def norm_estimates(self) -> np.ndarray:
        scale = np.array([abs_median(float(p)) for p in self.ps])
        return np.median(np.abs(self.projections()), axis=1) / scale

    def estimates(self) -> np.ndarray:
        """F_p estimate per order."""
        return self.norm_estimates() ** self.ps


class StableSketch(StableBank):
    """Single-order p-stable F_p sketch."""

    def __init__(self, p: float, rows: int, prf: SeededPrf, a: float = 0.002,
                 meter: StateMeter | None = None, exact: bool = False,
                 coins: str = "shared"):
        super().__init__([p], rows, prf, a, meter, exact, coins)
        self.p = p

    @classmethod
    def for_accuracy(cls, p: float, eps: float, prf: SeededPrf, **kw) -> StableSketch:
        return cls(p, math.ceil(64 / eps**2), prf, **kw)

    def estimate(self) -> float:
        return float(self.estimates()[0])
