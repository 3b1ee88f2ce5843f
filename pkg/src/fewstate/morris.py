"""Approximate counters that change state rarely.

A Morris counter keeps a level c per copy and bumps it with probability
(1 + a)^-c, so after f increments the level is about log_{1+a}(f) and the
number of level changes is logarithmic in f.  The estimate
((1 + a)^c - 1) / a is unbiased for a single copy; the median over
2*ceil(ln(1/delta)) + 1 copies gives a (1 +/- eps) guarantee with
a = eps^2 / 8.

:class:`ApproxAccumulator` generalises the idea to non-negative real
increments and is what the p-stable sketch uses.
"""

from __future__ import annotations

import math
import random

import numpy as np

from .model import StateMeter


def morris_base(eps: float) -> float:
    return eps * eps / 8.0


def morris_copies(delta: float) -> int:
    return 2 * math.ceil(math.log(1.0 / delta)) + 1


def level_value(level: int, a: float) -> float:
    """Value ((1 + a)^level - 1) / a represented by a level."""
    return math.expm1(level * math.log1p(a)) / a


_GAP_TABLES: dict[float, list[float]] = {}


def _gap_table(a: float, level: int) -> list[float]:
    """Cached 1 / log(1 - (1 + a)^-c) for c = 0..level (entry 0 unused)."""
    table = _GAP_TABLES.setdefault(a, [0.0])
    while len(table) <= level:
        c = len(table)
        table.append(1.0 / math.log1p(-((1.0 + a) ** (-c))))
    return table


def level_bound(count: int, a: float) -> int:
    """Level a single copy needs to represent ``count`` on average."""
    return math.ceil(math.log1p(a * count) / math.log1p(a))


class MorrisCounter:
    """Median-of-copies Morris counter.

    A copy at level c moves up on each increment with probability
    (1 + a)^-c.  Instead of flipping that coin every time, each copy draws
    the geometric number of increments until its next move; the two are
    equal in law, and the draw costs one random number per level change
    rather than one per increment.

    Args:
        a: base offset; a copy at level c increments with prob (1 + a)^-c.
        copies: number of independent copies (odd keeps the median clean).
        rng: source of randomness.
        meter: optional meter flagged whenever any level moves.
    """

    __slots__ = ("a", "levels", "rng", "meter", "_ticks", "_due", "_next_due", "_table")

    def __init__(self, a: float, copies: int = 1, rng: random.Random | None = None,
                 meter: StateMeter | None = None):
        if a <= 0:
            raise ValueError("a must be positive")
        if copies < 1:
            raise ValueError("copies must be >= 1")
        self.a = a
        self.levels = [0] * copies
        self.rng = rng if rng is not None else random.Random()
        self.meter = meter
        self._ticks = 0
        # a copy at level 0 moves on its very first increment
        self._due = [1] * copies
        self._next_due = 1
        self._table = _gap_table(a, 64)

    @classmethod
    def for_accuracy(cls, eps: float, delta: float, rng: random.Random | None = None,
                     meter: StateMeter | None = None) -> MorrisCounter:
        return cls(morris_base(eps), morris_copies(delta), rng=rng, meter=meter)

    @property
    def copies(self) -> int:
        return len(self.levels)

    def _gap(self, level: int) -> int:
        # trials up to and including the first success of a (1+a)^-level coin
        table = self._table
        if level >= len(table):
            table = self._table = _gap_table(self.a, 2 * level)
        return int(math.log1p(-self.rng.random()) * table[level]) + 1

    def increment(self) -> bool:
        """Process one increment; returns True when some level changed."""
        now = self._ticks = self._ticks + 1
        if now < self._next_due:
            return False
        due = self._due
        levels = self.levels
        table = self._table
        rand = self.rng.random
        log1p = math.log1p
        nxt = now + (1 << 62)
        for i in range(len(due)):
            d = due[i]
            if d == now:
                c = levels[i] + 1
                levels[i] = c
                if c >= len(table):
                    table = self._table = _gap_table(self.a, 2 * c)
                d = due[i] = now + int(log1p(-rand()) * table[c]) + 1
            if d < nxt:
                nxt = d
        self._next_due = nxt
        if self.meter is not None:
            self.meter.dirty = True
        return True

    @property
    def next_change(self) -> int:
        """Increment count at which some copy moves next."""
        return self._next_due

    def catch_up(self, total: int) -> bool:
        """Advance to ``total`` increments when no copy moves before the last.

        Callers that already track the exact number of increments (a clock)
        can skip :meth:`increment` until ``total`` reaches
        :attr:`next_change`; the skipped increments changed nothing.
        """
        if total < self._next_due:
            self._ticks = total
            return False
        self._ticks = total - 1
        return self.increment()

    def increment_many(self, count: int) -> int:
        """Apply ``count`` increments at once.

        Returns how many of them changed at least one level.  The meter is
        not touched; this is a bulk simulation helper.
        """
        end = self._ticks + count
        moves = set()
        due = self._due
        for i in range(len(due)):
            while due[i] <= end:
                moves.add(due[i])
                self.levels[i] += 1
                due[i] += self._gap(self.levels[i])
        self._ticks = end
        self._next_due = min(due)
        return len(moves)

    def copy_estimates(self) -> list[float]:
        return [level_value(c, self.a) for c in self.levels]

    def estimate(self) -> float:
        vals = sorted(self.copy_estimates())
        mid = len(vals) // 2
        if len(vals) % 2:
            return vals[mid]
        return 0.5 * (vals[mid - 1] + vals[mid])


class ExactCounter:
    """Plain integer counter with the Morris interface (for tests and audits)."""

    __slots__ = ("count", "meter")

    def __init__(self, meter: StateMeter | None = None):
        self.count = 0
        self.meter = meter

    def increment(self) -> bool:
        self.count += 1
        if self.meter is not None:
            self.meter.dirty = True
        return True

    def estimate(self) -> float:
        return float(self.count)


def _round_level(level: int, target: float, a: float, u: float) -> int:
    # smallest level whose value is >= target, then step down and randomise
    # between the two neighbours so the expected value equals target
    x = math.log1p(a * target) / math.log1p(a)
    lo = max(level, math.floor(x))
    while lo > level and level_value(lo, a) > target:
        lo -= 1
    while level_value(lo + 1, a) <= target:
        lo += 1
    v_lo = level_value(lo, a)
    v_hi = level_value(lo + 1, a)
    up = (target - v_lo) / (v_hi - v_lo)
    return lo + 1 if u < up else lo


class ApproxAccumulator:
    """Non-negative real accumulator stored as a single Morris-style level.

    Adding w moves the level to one of the two levels bracketing
    value + w, chosen so the stored value stays unbiased.  Levels never
    decrease.
    """

    __slots__ = ("a", "level", "rng", "meter")

    def __init__(self, a: float, rng: random.Random | None = None,
                 meter: StateMeter | None = None):
        if a <= 0:
            raise ValueError("a must be positive")
        self.a = a
        self.level = 0
        self.rng = rng if rng is not None else random.Random()
        self.meter = meter

    def value(self) -> float:
        return level_value(self.level, self.a)

    def add(self, w: float, u: float | None = None) -> bool:
        if w < 0:
            raise ValueError("accumulator only takes non-negative increments")
        if w == 0:
            return False
        if u is None:
            u = self.rng.random()
        new = _round_level(self.level, self.value() + w, self.a, u)
        if new == self.level:
            return False
        self.level = new
        if self.meter is not None:
            self.meter.dirty = True
        return True


def accumulate_levels(levels: np.ndarray, weights: np.ndarray, a: float,
                      u) -> np.ndarray:
    """Vectorised :meth:`ApproxAccumulator.add` over arrays of levels.

    ``u`` is either an array of uniforms (independent coins) or a single
    float shared by all entries.  Zero weights leave their level untouched.
    """
    la = math.log1p(a)
    cur = np.expm1(levels * la) / a
    target = cur + weights
    lo = np.floor(np.log1p(a * target) / la)
    lo = np.maximum(lo, levels)
    v_lo = np.expm1(lo * la) / a
    # floating floor can be off by one either way
    too_high = (v_lo > target) & (lo > levels)
    lo = np.where(too_high, lo - 1, lo)
    v_lo = np.where(too_high, np.expm1(lo * la) / a, v_lo)
    v_hi = np.expm1((lo + 1) * la) / a
    too_low = v_hi <= target
    lo = np.where(too_low, lo + 1, lo)
    v_lo = np.where(too_low, v_hi, v_lo)
    v_hi = np.where(too_low, np.expm1((lo + 1) * la) / a, v_hi)
    up = (target - v_lo) / (v_hi - v_lo)
    new = lo + (u < up)
    return np.where(weights > 0, new, levels).astype(levels.dtype)
