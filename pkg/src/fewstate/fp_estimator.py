"""F_p estimation for p >= 1 from heavy hitters of universe subsamples.

Items are bucketed into geometric bands by their estimated p-th power
frequency.  Band i's mass is read from the heavy-hitter grid run on the
universe subsample at level l(i) = max(1, i - offset): bands of light
items are estimated from sparser subsamples where those items become
heavy, and the band sum is rescaled by the inverse sampling rate.
"""

from __future__ import annotations

import math

from .full_sample_hold import FullSampleAndHold
from .model import SeededPrf, SketchParams, StateMeter, level_rate, lower_median
from .morris import MorrisCounter
from .oracle import power_of_two_ceiling


def band_of(value: float, lam: float, mtilde: float, p: float,
            levels: int | None = None) -> int | None:
    """Band i >= 1 with value^p in [lam*M/2^i, 2*lam*M/2^i).

    Values whose p-th power reaches lam*M (the top band's upper edge) are
    put in band 1 so that no mass above the top band is lost.  Returns None
    for value <= 0 or when the band index would exceed ``levels``.
    """
    if value <= 0:
        return None
    power = float(value) ** p
    top = lam * mtilde
    if power >= top:
        return 1
    i = math.floor(math.log2(top / power)) + 1
    # repair the float floor at band edges
    if power < top / 2.0**i:
        i += 1
    elif i > 1 and power >= 2 * top / 2.0**i:
        i -= 1
    if levels is not None and i > levels:
        return None
    return i


class FpEstimator:
    """Grid of FullSampleAndHold instances over nested universe subsamples."""

    def __init__(self, params: SketchParams, prf: SeededPrf, meter: StateMeter | None = None,
                 exact_counters: bool = False, rescale: str = "rescaled"):
        self.params = params
        self.meter = meter if meter is not None else StateMeter()
        self.exact_counters = exact_counters
        self.rescale = rescale
        self.levels = params.fp_levels
        self.reps = params.fp_reps
        self.prf = prf
        self._universe_prf = [prf.child(f"universe/{r}") for r in range(self.reps)]
        self.lam = 0.5 + 0.5 * prf.child("lambda").uniform(0)
        self.rng = prf.child("coins").rng()
        self.grids: dict[tuple[int, int], FullSampleAndHold] = {}
        self.lengths: dict[tuple[int, int], MorrisCounter] = {}
        self._clock: dict[tuple[int, int], int] = {}
        self.t = 0

    def level_of_band(self, i: int) -> int:
        return max(1, i - self.params.band_offset)

    def _grid(self, level: int, r: int) -> FullSampleAndHold:
        key = (level, r)
        grid = self.grids.get(key)
        if grid is None:
            rate = level_rate(level)
            sub = self.params.for_substream(
                max(2, math.ceil(self.params.n * rate)),
                max(1, math.ceil(self.params.m_bound * rate)),
            )
            grid = FullSampleAndHold(sub, self.prf.child(f"grid/{level}/{r}"), self.meter,
                                     exact_counters=self.exact_counters, rescale=self.rescale)
            self.grids[key] = grid
            self.lengths[key] = MorrisCounter(self.params.length_base, 1, self.rng, self.meter)
            self.meter.add_words(1)
            self._clock[key] = 0
        return grid

    def process(self, t: int, item: int) -> None:
        self.t = t
        for r in range(self.reps):
            top = min(self.levels, self._universe_prf[r].max_level(item))
            for level in range(1, top + 1):
                key = (level, r)
                grid = self.grids.get(key) or self._grid(level, r)
                tick = self._clock[key] = self._clock[key] + 1
                grid.process(tick, item)
                length = self.lengths[key]
                if tick >= length._next_due:
                    length.catch_up(tick)

    def band_sums(self, m: int | None = None) -> dict[int, list[float]]:
        """Per band i, the per-row sums of f^p over items landing in band i."""
        m = self.t if m is None else m
        if m <= 0:
            return {}
        p = self.params.p
        mtilde = power_of_two_ceiling(float(m) ** p)
        sums: dict[int, list[float]] = {}
        for (level, r), grid in sorted(self.grids.items()):
            for f in grid.estimates().values():
                i = band_of(f, self.lam, mtilde, p, self.levels)
                if i is None or self.level_of_band(i) != level:
                    continue
                sums.setdefault(i, [0.0] * self.reps)[r] += f**p
        return sums

    def estimate(self, m: int | None = None) -> float:
        total = 0.0
        for i, per_row in sorted(self.band_sums(m).items()):
            total += lower_median(per_row) / level_rate(self.level_of_band(i))
        return total
