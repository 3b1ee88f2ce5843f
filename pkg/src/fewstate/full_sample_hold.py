"""FullSampleAndHold: a grid of SampleAndHold over nested time subsamples.

Row r, level x sees the updates whose time index survives subsampling at
rate min(1, 2^(1-x)) under the row's PRF.  An item's estimate at level x is
the median over rows; the reported level is the first x whose induced
stream length m_x is at least (estimate at x)^p, i.e. the first level where
the item is no longer too heavy to have been caught by sampling.
"""

from __future__ import annotations

import math

from .model import SeededPrf, SketchParams, StateMeter, level_rate, lower_median
from .morris import MorrisCounter
from .sample_hold import SampleAndHold

RESCALE_MODES = ("rescaled", "literal", "max")


class FullSampleAndHold:
    """Heavy-hitter grid.

    Args:
        params: derived constants; ``hh_reps`` rows and ``time_levels`` levels.
        prf: seed source for time subsampling and coins.
        meter: shared cost meter.
        exact_counters: hold exact counters instead of Morris counters.
        rescale: "rescaled" returns f^l / p_l, "literal" returns f^l,
            "max" returns the largest rescaled estimate over all levels.
        pruning: forwarded to every SampleAndHold instance.
    """

    def __init__(self, params: SketchParams, prf: SeededPrf, meter: StateMeter | None = None,
                 exact_counters: bool = False, rescale: str = "rescaled",
                 pruning: str = "age"):
        if rescale not in RESCALE_MODES:
            raise ValueError(f"rescale must be one of {RESCALE_MODES}")
        self.params = params
        self.meter = meter if meter is not None else StateMeter()
        self.exact_counters = exact_counters
        self.rescale = rescale
        self.pruning = pruning
        self.reps = params.hh_reps
        self.levels = params.time_levels
        self._time_prf = [prf.child(f"time/{r}") for r in range(self.reps)]
        self.rng = prf.child("coins").rng()
        # "global": every level samples at the rate derived for the whole
        # stream; "local": each level re-derives it from its expected length
        if params.level_rho == "local":
            self._level_params = [
                params.for_substream(params.n, max(1, math.ceil(params.m_bound * level_rate(x))))
                for x in range(1, self.levels + 1)
            ]
        else:
            self._level_params = [params] * self.levels
        self.instances: list[list[SampleAndHold | None]] = [
            [None] * self.levels for _ in range(self.reps)
        ]
        # local clocks: position of the update inside J_x; not sketch memory
        self._clock = [[0] * self.levels for _ in range(self.reps)]
        self.lengths: list[list[MorrisCounter | None]] = [
            [None] * self.levels for _ in range(self.reps)
        ]
        self.t = 0
        self._block_start = 0
        self._block = None

    _BLOCK = 4096

    def _levels_at(self, t: int):
        """Per row, the deepest level receiving time index t (capped at Y)."""
        if self._block is None or not self._block_start <= t < self._block_start + self._BLOCK:
            self._block_start = t
            ts = range(t, t + self._BLOCK)
            self._block = [
                [min(self.levels, v) for v in prf.max_level_array(ts).tolist()]
                for prf in self._time_prf
            ]
        off = t - self._block_start
        return [row[off] for row in self._block]

    def _instance(self, r: int, x: int) -> SampleAndHold:
        inst = self.instances[r][x]
        if inst is None:
            inst = SampleAndHold.from_params(self._level_params[x], self.rng, self.meter,
                                             exact=self.exact_counters, pruning=self.pruning)
            self.instances[r][x] = inst
            length = MorrisCounter(self.params.length_base, 1, self.rng, self.meter)
            self.meter.add_words(1)
            self.lengths[r][x] = length
        return inst

    def process(self, t: int, item: int) -> None:
        self.t = t
        off = t - self._block_start
        if self._block is None or not 0 <= off < self._BLOCK:
            self._levels_at(t)
            off = 0
        for r in range(self.reps):
            top = self._block[r][off]
            clock = self._clock[r]
            row = self.instances[r]
            lengths = self.lengths[r]
            for x in range(top):
                inst = row[x] or self._instance(r, x)
                tick = clock[x] = clock[x] + 1
                # fast path for an item that is already held and cannot
                # trigger maintenance; everything else goes through process()
                tracked = inst.tracked
                tc = tracked.get(item)
                if tc is not None and len(tracked) < inst.k:
                    tc.counter.increment()
                else:
                    inst.process(tick, item)
                # the length counter has seen exactly `tick` increments
                if tick >= lengths[x]._next_due:
                    lengths[x].catch_up(tick)

    def forwarded(self, r: int, t: int) -> list[int]:
        """Levels (1-based) whose instance in row r receives time index t."""
        return list(range(1, min(self.levels, self._time_prf[r].max_level(t)) + 1))

    # -- queries -----------------------------------------------------------

    def level_length(self, x: int) -> float:
        """Median over rows of the Morris estimate of |J_x| (x is 1-based)."""
        vals = [c.estimate() if c is not None else 0.0 for c in (row[x - 1] for row in self.lengths)]
        return lower_median(vals)

    def level_estimate(self, item: int, x: int) -> float:
        vals = [inst.estimate(item) if inst is not None else 0.0
                for inst in (row[x - 1] for row in self.instances)]
        return lower_median(vals)

    def selected_level(self, item: int) -> tuple[int, float]:
        """First level x with slack * m_x >= (estimate at x)^p, and that estimate."""
        p = self.params.p
        slack = self.params.level_slack
        for x in range(1, self.levels + 1):
            f = self.level_estimate(item, x)
            if slack * self.level_length(x) >= f**p:
                return x, f
        return self.levels, self.level_estimate(item, self.levels)

    def estimate(self, item: int) -> float:
        if self.rescale == "max":
            return max(self.level_estimate(item, x) / level_rate(x)
                       for x in range(1, self.levels + 1))
        x, f = self.selected_level(item)
        if self.rescale == "literal":
            return f
        return f / level_rate(x)

    def tracked_items(self) -> list[int]:
        seen: dict[int, None] = {}
        for row in self.instances:
            for inst in row:
                if inst is not None:
                    seen.update(dict.fromkeys(inst.tracked))
        return list(seen)

    def estimates(self) -> dict[int, float]:
        return {j: self.estimate(j) for j in self.tracked_items()}

    def report_heavy(self, norm: float | None, eps: float) -> list[tuple[int, float]]:
        """Tracked items whose estimate is at least (3 eps / 4) * norm."""
        if norm is None:
            raise ValueError("report_heavy needs an L_p norm (estimated or exact)")
        threshold = 0.75 * eps * norm
        hits = [(j, f) for j, f in self.estimates().items() if f >= threshold]
        return sorted(hits, key=lambda jf: (-jf[1], jf[0]))
