"""Classical heavy-hitter sketches, metered like everything else.

These change state on almost every update; they are here as the
comparison point for the sampling-based sketches.
"""

from __future__ import annotations

import numpy as np

from .model import SeededPrf, StateMeter


class MisraGries:
    """At most k counters; each estimate undercounts by at most m / (k + 1)."""

    def __init__(self, k: int, meter: StateMeter | None = None):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.counts: dict[int, int] = {}
        self.meter = meter if meter is not None else StateMeter()
        self.meter.add_words(k)
        self.m = 0

    def process(self, t: int, item: int) -> None:
        self.m += 1
        counts = self.counts
        if item in counts:
            counts[item] += 1
        elif len(counts) < self.k:
            counts[item] = 1
        else:
            for j in list(counts):
                if counts[j] == 1:
                    del counts[j]
                else:
                    counts[j] -= 1
        self.meter.dirty = True

    def estimate(self, item: int) -> float:
        return float(self.counts.get(item, 0))

    def report(self, eps: float, norm: float | None = None) -> list[tuple[int, float]]:
        """Items that may have frequency >= eps * norm (norm defaults to m)."""
        norm = self.m if norm is None else norm
        cut = eps * norm - self.m / (self.k + 1)
        hits = [(j, float(c)) for j, c in self.counts.items() if c > 0 and c >= cut]
        return sorted(hits, key=lambda jc: (-jc[1], jc[0]))


class SpaceSaving:
    """k counters; a new item replaces the minimum and inherits its count + 1."""

    def __init__(self, k: int, meter: StateMeter | None = None):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.counts: dict[int, int] = {}
        self.meter = meter if meter is not None else StateMeter()
        self.meter.add_words(2 * k)
        self.m = 0

    def process(self, t: int, item: int) -> None:
        self.m += 1
        counts = self.counts
        if item in counts:
            counts[item] += 1
        elif len(counts) < self.k:
            counts[item] = 1
        else:
            victim = min(counts, key=lambda j: (counts[j], j))
            floor = counts.pop(victim)
            counts[item] = floor + 1
        self.meter.dirty = True

    def estimate(self, item: int) -> float:
        return float(self.counts.get(item, 0))

    def report(self, eps: float, norm: float | None = None) -> list[tuple[int, float]]:
        norm = self.m if norm is None else norm
        hits = [(j, float(c)) for j, c in self.counts.items() if c >= eps * norm]
        return sorted(hits, key=lambda jc: (-jc[1], jc[0]))


_PRIME = (1 << 61) - 1


class CountMin:
    """d rows of w counters with pairwise independent hashes; never undercounts."""

    def __init__(self, width: int, depth: int, prf: SeededPrf, meter: StateMeter | None = None):
        if width < 1 or depth < 1:
            raise ValueError("width and depth must be >= 1")
        self.width = width
        self.depth = depth
        coef = prf.child("countmin").bits_array(np.arange(2 * depth))
        self._a = [int(c) % (_PRIME - 1) + 1 for c in coef[:depth]]
        self._b = [int(c) % _PRIME for c in coef[depth:]]
        self.table = np.zeros((depth, width), dtype=np.int64)
        self.meter = meter if meter is not None else StateMeter()
        self.meter.add_words(width * depth)
        self.m = 0

    def _cells(self, item: int) -> list[int]:
        return [((a * item + b) % _PRIME) % self.width for a, b in zip(self._a, self._b)]

    def process(self, t: int, item: int) -> None:
        self.m += 1
        for row, col in enumerate(self._cells(item)):
            self.table[row, col] += 1
        self.meter.dirty = True

    def estimate(self, item: int) -> float:
        return float(min(self.table[row, col] for row, col in enumerate(self._cells(item))))

    def report(self, eps: float, norm: float | None = None, universe: int | None = None,
               candidates=None) -> list[tuple[int, float]]:
        """Items among ``candidates`` (default 1..universe) with estimate >= eps * norm."""
        norm = self.m if norm is None else norm
        if candidates is None:
            if universe is None:
                raise ValueError("count-min report needs candidates or a universe size")
            candidates = range(1, universe + 1)
        hits = []
        for j in candidates:
            est = self.estimate(j)
            if est >= eps * norm:
                hits.append((j, est))
        return sorted(hits, key=lambda jc: (-jc[1], jc[0]))
