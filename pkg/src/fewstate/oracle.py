"""Exact reference quantities computed from the full stream.

Used as ground truth for accuracy checks, never inside a sketch.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np


def frequencies(items) -> Counter:
    arr = np.asarray(items, dtype=np.int64)
    if arr.size == 0:
        return Counter()
    values, counts = np.unique(arr, return_counts=True)
    return Counter(dict(zip(values.tolist(), counts.tolist())))


def _powers(freqs, p: float):
    if float(p).is_integer():
        e = int(p)
        return [f**e for f in freqs]  # exact integers
    return [float(f) ** p for f in freqs]


def exact_fp(freq: Counter | dict, p: float) -> float | int:
    """F_p = sum_j f_j^p.

    Integer p is summed exactly as Python ints; otherwise the terms go
    through a correctly rounded float sum.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    freqs = [f for f in freq.values() if f > 0]
    if p == 0:
        return float(len(freqs))
    terms = _powers(freqs, p)
    if terms and isinstance(terms[0], int):
        return sum(terms)
    return math.fsum(terms)


def lp_norm(freq, p: float) -> float:
    return exact_fp(freq, p) ** (1.0 / p)


def exact_heavy_hitters(freq, p: float, eps: float) -> list[int]:
    """Items j with f_j >= eps * ||f||_p, sorted by decreasing frequency."""
    fp = exact_fp(freq, p)
    if isinstance(fp, int) and float(p).is_integer():
        # compare f^p >= eps^p * F_p to dodge rounding in the p-th root
        e = int(p)
        hits = [j for j, f in freq.items() if f**e >= eps**e * fp * (1 - 1e-12)]
    else:
        threshold = eps * fp ** (1.0 / p)
        hits = [j for j, f in freq.items() if f >= threshold * (1 - 1e-12)]
    return sorted(hits, key=lambda j: (-freq[j], j))


def exact_entropy(freq) -> float:
    """Shannon entropy in bits of the empirical distribution f / m."""
    total = sum(freq.values())
    if total == 0:
        return 0.0
    terms = [-(f / total) * math.log2(f / total) for f in freq.values() if f > 0]
    return math.fsum(terms)


def power_of_two_ceiling(value: float) -> int:
    """Smallest power of two M with value <= M (so value <= M < 2 value)."""
    if value <= 1:
        return 1
    m = 1 << (math.ceil(value) - 1).bit_length()
    while m // 2 >= value:
        m //= 2
    return m


def _scan_band(power: float, lam: float, mtilde: int, levels: int) -> int | None:
    # linear scan; deliberately not shared with the estimator's band lookup
    if power >= lam * mtilde:
        return 1
    for i in range(1, levels + 1):
        lo = lam * mtilde / 2.0**i
        if lo <= power < 2 * lo:
            return i
    return None


@dataclass
class LevelContributions:
    """Exact per-band mass C_i and the mass falling below the last band."""

    contributions: dict[int, float]
    remainder: float
    fp: float
    mtilde: int
    lam: float

    def fraction(self, i: int) -> float:
        return self.contributions.get(i, 0.0) / self.fp if self.fp else 0.0

    def significant(self, eps: float, p: float, log_nm: float) -> list[int]:
        """Bands whose fraction of F_p is at least eps / (2 p log(nm))."""
        cut = eps / (2 * p * log_nm)
        return sorted(i for i in self.contributions if self.fraction(i) >= cut)


def exact_level_contributions(freq, p: float, lam: float, mtilde: int,
                              levels: int) -> LevelContributions:
    """Split F_p into the bands [lam*M/2^i, 2*lam*M/2^i), i = 1..levels.

    Mass at or above lam*M is credited to band 1, matching the estimator.
    """
    if not 0.5 <= lam <= 1:
        raise ValueError("lam must lie in [1/2, 1]")
    if mtilde < 1 or mtilde & (mtilde - 1):
        raise ValueError("mtilde must be a power of two")
    by_value = Counter(f for f in freq.values() if f > 0)
    contrib: dict[int, list[float]] = {}
    below = []
    for f, mult in by_value.items():
        power = float(f) ** p
        i = _scan_band(power, lam, mtilde, levels)
        if i is None:
            below.append(power * mult)
        else:
            contrib.setdefault(i, []).append(power * mult)
    return LevelContributions(
        contributions={i: math.fsum(v) for i, v in sorted(contrib.items())},
        remainder=math.fsum(below),
        fp=float(exact_fp(freq, p)),
        mtilde=mtilde,
        lam=lam,
    )


class FrequencyOracle:
    """Exact frequency vector of a stream, with the derived statistics."""

    def __init__(self, items):
        self.freq = frequencies(items)
        self.m = sum(self.freq.values())

    def __getitem__(self, item: int) -> int:
        return self.freq.get(item, 0)

    def fp(self, p: float) -> float | int:
        return exact_fp(self.freq, p)

    def norm(self, p: float) -> float:
        return lp_norm(self.freq, p)

    def heavy_hitters(self, p: float, eps: float) -> list[int]:
        return exact_heavy_hitters(self.freq, p, eps)

    def entropy(self) -> float:
        return exact_entropy(self.freq)

    def top(self) -> int:
        return max(self.freq, key=lambda j: (self.freq[j], -j))

    def level_contributions(self, p: float, lam: float, mtilde: int,
                            levels: int) -> LevelContributions:
        return exact_level_contributions(self.freq, p, lam, mtilde, levels)
