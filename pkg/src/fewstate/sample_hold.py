"""SampleAndHold: reservoir sampling plus held approximate counters.

Each update either bumps the counter of an item already held, starts a
counter for an item sitting in the reservoir, or (with probability rho)
overwrites a random reservoir slot.  Counters are pruned by dyadic age
class: whenever some class holds k counters, k is redrawn and every class
keeps only its ceil(k/2) counters with the largest estimates.  Competing
only within an age class is what protects a young heavy item from older
counters that have had more time to grow.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from typing import Callable, Protocol

from .model import SketchParams, StateMeter
from .morris import ExactCounter, MorrisCounter, morris_base, morris_copies


class Counter(Protocol):
    def increment(self) -> bool: ...
    def estimate(self) -> float: ...


@dataclass
class TrackedCounter:
    item: int
    counter: Counter
    init_time: int


def age_class(t: int, init_time: int) -> int:
    """Class z > 0 with init_time in (t - 2^(z+1), t - 2^z], or 0 if age < 2."""
    age = t - init_time
    return age.bit_length() - 1 if age >= 2 else 0


def counter_factory(params: SketchParams, rng: random.Random, meter: StateMeter,
                    exact: bool = False) -> Callable[[], Counter]:
    if exact:
        return lambda: ExactCounter(meter)
    a = morris_base(params.counter_eps)
    copies = morris_copies(params.counter_delta)
    return lambda: MorrisCounter(a, copies, rng=rng, meter=meter)


class SampleAndHold:
    """One SampleAndHold instance.

    Args:
        rho: probability that an unmatched, untracked update is sampled.
        k_range: inclusive range the reservoir/counter budget k is drawn from.
        rng: coin source (sampling, slot choice, k draws, Morris coins).
        meter: shared cost meter.
        make_counter: zero-argument factory for held counters.
        pruning: "age" (per age class) or "global" (ablation: prune the
            globally smallest counters whenever k counters are held).
    """

    def __init__(self, rho: float, k_range: tuple[int, int], rng: random.Random,
                 meter: StateMeter | None = None,
                 make_counter: Callable[[], Counter] | None = None,
                 pruning: str = "age"):
        if not 0 < rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if pruning not in ("age", "global"):
            raise ValueError(f"unknown pruning mode {pruning!r}")
        self.rho = rho
        self.k_lo, self.k_hi = k_range
        if not 1 <= self.k_lo <= self.k_hi:
            raise ValueError(f"bad k range {k_range}")
        self.rng = rng
        self.meter = meter if meter is not None else StateMeter()
        self.make_counter = make_counter or (lambda: MorrisCounter(0.00125, 11, rng, self.meter))
        self.pruning = pruning

        self.k = rng.randint(self.k_lo, self.k_hi)
        self.meter.add_words(self.k)
        self.slots: dict[int, int] = {}       # slot index -> item (absent = empty)
        self._held: dict[int, int] = {}       # item -> number of slots holding it
        self.tracked: dict[int, TrackedCounter] = {}
        self._init_times: list[int] = []      # sorted init times of tracked counters
        self._by_init: dict[int, int] = {}    # init time -> item
        self.samples_taken = 0
        self.prune_events = 0
        self._skip = self._draw_skip()

    @classmethod
    def from_params(cls, params: SketchParams, rng: random.Random,
                    meter: StateMeter | None = None, exact: bool = False,
                    pruning: str = "age") -> SampleAndHold:
        meter = meter if meter is not None else StateMeter()
        return cls(params.rho, (params.k_lo, params.k_hi), rng, meter,
                   counter_factory(params, rng, meter, exact), pruning)

    # -- update path -------------------------------------------------------

    def _draw_skip(self) -> int:
        # number of unmatched updates to pass over before the next accepted
        # sample; same law as flipping a rho-coin on each of them
        if self.rho >= 1:
            return 0
        u = self.rng.random()
        return int(math.log1p(-u) / math.log1p(-self.rho))

    def process(self, t: int, item: int) -> None:
        tc = self.tracked.get(item)
        if tc is not None:
            tc.counter.increment()
        elif item in self._held:
            self._start_counter(t, item)
        elif self._skip:
            self._skip -= 1
        else:
            self._sample(item)
            self._skip = self._draw_skip()
        if len(self.tracked) >= self.k:
            self._maintain(t)

    def _start_counter(self, t: int, item: int) -> None:
        counter = self.make_counter()
        counter.increment()
        self.tracked[item] = TrackedCounter(item, counter, t)
        self._init_times.append(t)
        self._by_init[t] = item
        self.meter.dirty = True
        self.meter.add_words(1)

    def _sample(self, item: int) -> None:
        self.samples_taken += 1
        slot = self.rng.randrange(self.k)
        old = self.slots.get(slot)
        if old == item:
            return
        if old is not None:
            self._release(old)
        self.slots[slot] = item
        self._held[item] = self._held.get(item, 0) + 1
        self.meter.dirty = True

    def _release(self, item: int) -> None:
        left = self._held[item] - 1
        if left:
            self._held[item] = left
        else:
            del self._held[item]

    # -- maintenance -------------------------------------------------------

    def class_sizes(self, t: int) -> dict[int, int]:
        sizes: dict[int, int] = {}
        for tc in self.tracked.values():
            z = age_class(t, tc.init_time)
            if z:
                sizes[z] = sizes.get(z, 0) + 1
        return sizes

    def _class_count(self, t: int, z: int) -> int:
        lo = bisect.bisect_right(self._init_times, t - (1 << (z + 1)))
        hi = bisect.bisect_right(self._init_times, t - (1 << z))
        return hi - lo

    def _maintain(self, t: int) -> None:
        if self.pruning == "global":
            self._prune_global()
            return
        # a class only grows when a counter ages into it, i.e. when some
        # counter has init time exactly t - 2^z
        z = 1
        while (1 << z) < t:
            if (t - (1 << z)) in self._by_init and self._class_count(t, z) >= self.k:
                self._prune_by_age(t)
                return
            z += 1

    def _redraw_k(self) -> None:
        old = self.k
        new = self.rng.randint(self.k_lo, self.k_hi)
        if new < old:
            dropped = sorted(self.rng.sample(range(old), old - new))
            kept: dict[int, int] = {}
            for slot, item in self.slots.items():
                pos = bisect.bisect_left(dropped, slot)
                if pos < len(dropped) and dropped[pos] == slot:
                    self._release(item)
                else:
                    kept[slot - pos] = item
            self.slots = kept
        self.k = new
        self.meter.add_words(new - old)
        self.meter.dirty = True

    @staticmethod
    def _rank_key(tc: TrackedCounter):
        return (-tc.counter.estimate(), tc.init_time, tc.item)

    def _discard(self, victims: list[TrackedCounter]) -> None:
        for tc in victims:
            del self.tracked[tc.item]
            del self._by_init[tc.init_time]
        self._init_times = sorted(tc.init_time for tc in self.tracked.values())
        self.meter.add_words(-len(victims))
        self.meter.dirty = True

    def _prune_by_age(self, t: int) -> None:
        self.prune_events += 1
        self._redraw_k()
        keep = math.ceil(self.k / 2)
        classes: dict[int, list[TrackedCounter]] = {}
        for tc in self.tracked.values():
            z = age_class(t, tc.init_time)
            if z:
                classes.setdefault(z, []).append(tc)
        victims = []
        for members in classes.values():
            if len(members) > keep:
                members.sort(key=self._rank_key)
                victims.extend(members[keep:])
        self._discard(victims)

    def _prune_global(self) -> None:
        self.prune_events += 1
        self._redraw_k()
        keep = math.ceil(self.k / 2)
        ranked = sorted(self.tracked.values(), key=self._rank_key)
        self._discard(ranked[keep:])

    # -- queries -----------------------------------------------------------

    def estimate(self, item: int) -> float:
        tc = self.tracked.get(item)
        return tc.counter.estimate() if tc is not None else 0.0

    def report(self) -> dict[int, float]:
        return {item: tc.counter.estimate() for item, tc in self.tracked.items()}

    def reservoir(self) -> list[int | None]:
        return [self.slots.get(i) for i in range(self.k)]
