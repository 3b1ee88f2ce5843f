"""Stream events, the state-change cost model, seeded randomness and parameters.

Every sketch in this package reports its cost through a :class:`StateMeter`.
A sketch flags the meter as dirty whenever it mutates persistent state while
handling an update; the driver closes the update with
:meth:`StateMeter.end_update`, which counts at most one state change per
update no matter how many mutations happened inside it.

All "uniformly at random" choices come from :class:`SeededPrf`, a keyed
64-bit mixing function, so that identical seeds reproduce identical runs.
"""

from __future__ import annotations

import dataclasses
import decimal
import hashlib
import logging
import math
import random
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

_MASK = (1 << 64) - 1
_TWO_53 = float(1 << 53)

PRESETS = ("paper", "practical")


class Update(NamedTuple):
    """One stream event: 1-based time index and 1-based item id."""

    t: int
    item: int


@dataclass
class StateMeter:
    """Counts per-update state changes and peak space in words."""

    total_state_changes: int = 0
    updates: int = 0
    words: int = 0
    peak_words: int = 0
    dirty: bool = False

    def mark_dirty(self) -> None:
        self.dirty = True

    def add_words(self, count: int) -> None:
        self.words += count
        if self.words > self.peak_words:
            self.peak_words = self.words

    def end_update(self) -> None:
        """Close the current update, recording X_t = 1 iff anything changed."""
        self.updates += 1
        if self.dirty:
            self.total_state_changes += 1
            self.dirty = False
        if self.words > self.peak_words:
            self.peak_words = self.words


def _mix64(z: int) -> int:
    # splitmix64 finalizer; a bijection on 64-bit words
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _tag_hash(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


class SeededPrf:
    """Keyed pseudo-random function from integers to 53-bit uniforms.

    ``prf.uniform(x)`` depends only on ``(seed, tag, x)``.  Distinct inputs
    give outputs that behave as independent uniforms on [0, 1); there is no
    cryptographic claim.
    """

    __slots__ = ("seed", "tag", "key")

    def __init__(self, seed: int, tag: str = ""):
        self.seed = int(seed) & _MASK
        self.tag = tag
        self.key = _mix64(self.seed ^ _tag_hash(tag))

    def __repr__(self) -> str:
        return f"SeededPrf(seed={self.seed}, tag={self.tag!r})"

    def child(self, tag: str) -> SeededPrf:
        return SeededPrf(self.key, tag)

    def rng(self) -> random.Random:
        """A sequential generator seeded from this PRF's key."""
        return random.Random(self.key)

    def bits(self, x: int) -> int:
        return _mix64(_mix64(x & _MASK) ^ self.key) >> 11

    def uniform(self, x: int) -> float:
        return self.bits(x) / _TWO_53

    def bits_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs).astype(np.uint64)
        return _mix64_array(_mix64_array(xs) ^ np.uint64(self.key)) >> np.uint64(11)

    def uniform_array(self, xs) -> np.ndarray:
        return self.bits_array(xs).astype(np.float64) / _TWO_53

    def open_uniform_array(self, xs) -> np.ndarray:
        """Uniforms strictly inside (0, 1)."""
        return (self.bits_array(xs).astype(np.float64) + 0.5) / _TWO_53

    def max_level(self, x: int) -> int:
        """Largest level whose nested subsample at rate 2^(1-level) contains x.

        ``uniform(x) < 2**(1 - level)`` iff ``bits(x) < 2**(54 - level)``, so
        the answer is read off the bit length.
        """
        return 54 - self.bits(x).bit_length()

    def max_level_array(self, xs) -> np.ndarray:
        b = self.bits_array(xs).astype(np.float64)  # exact: values < 2**53
        _, exponent = np.frexp(b)
        return (54 - exponent).astype(np.int64)


def level_rate(level: int) -> float:
    """Sampling rate min(1, 2^(1-level)) of a nested subsample."""
    return 1.0 if level <= 1 else 2.0 ** (1 - level)


def universe_member(prf: SeededPrf, item: int, level: int) -> bool:
    if level < 1:
        raise ValueError("level must be >= 1")
    return prf.max_level(item) >= level


def time_member(prf: SeededPrf, t: int, level: int) -> bool:
    if level < 1:
        raise ValueError("level must be >= 1")
    return prf.max_level(t) >= level


def lower_median(values) -> float:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass(frozen=True)
class SketchParams:
    """Every constant the sketches derive from (n, m, eps, delta, p).

    ``log_nm`` is the logarithm the formulas use: log2(n*m) under the ``paper``
    preset, the constant ``log_factor`` under the practical preset.
    ``rho`` is the sampling rate actually used (at most 1); ``rho_formula``
    is the value before clamping.
    """

    n: int
    m_bound: int
    eps: float
    delta: float
    p: float
    preset: str
    gamma: float
    log_nm: float
    rho: float
    rho_formula: float
    kappa1: float
    kappa2: float
    kappa: float
    k_lo: int
    k_hi: int
    hh_reps: int
    time_levels: int
    fp_levels: int
    fp_reps: int
    band_offset: int
    counter_eps: float
    counter_delta: float
    length_base: float
    level_slack: float
    level_rho: str
    knobs: dict = field(default_factory=dict, compare=False)

    def for_substream(self, n: int, m_bound: int) -> SketchParams:
        """Parameters for a sketch run on a subsampled stream."""
        return derive_params(n, m_bound, self.eps, self.delta, self.p, self.preset, **self.knobs)

    def replace(self, **changes) -> SketchParams:
        return dataclasses.replace(self, **changes)


_PRACTICAL_DEFAULTS = {
    "gamma": 2.0,
    "log_factor": 1.0,
    "kappa_const": 4.0,
    "k_factor": 200.0,
    "hh_reps": 3,
    "fp_reps": 3,
    "counter_eps": 0.2,
    "counter_delta": 0.5,
    "length_base": 0.25,
    "level_slack": None,
    "level_rho": "global",
}


def _budget_range(n: int, m: int, eps: float, p: float) -> tuple[decimal.Decimal, decimal.Decimal]:
    """The counter budget range [200 p kappa lg^2, 202 p kappa lg^2].

    Evaluated with 40 significant digits: the bounds are rounded to integers
    and double precision is off by a few units once they pass 2^50.
    """
    D = decimal.Decimal
    with decimal.localcontext() as ctx:
        ctx.prec = 40
        lg = D(n * m).ln() / D(2).ln()
        q = D(p)
        kappa = lg ** (11 + 3 * q) / D(eps) ** (4 + 4 * q)
        if p >= 2:
            kappa *= D(min(n, m)) ** (1 - 2 / q)
        scale = q * kappa * lg**2
        return 200 * scale, 202 * scale


def derive_params(
    n: int,
    m_bound: int,
    eps: float,
    delta: float = 0.1,
    p: float = 2.0,
    preset: str = "practical",
    **knobs,
) -> SketchParams:
    """Derive sampling rate, counter budget and grid sizes.

    The ``paper`` preset evaluates the SampleAndHold formulas verbatim
    (gamma = 2^20 p, polylog factors with log = log2(n m), hidden constants
    set to 1).  The ``practical`` preset keeps the shape in n, m and p but
    swaps gamma and the polylog factors for small constants given in
    ``knobs`` (see ``_PRACTICAL_DEFAULTS``).  Any derived value can also be
    forced through ``knobs`` (``rho``, ``band_offset``, ``k_lo``/``k_hi``).
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if n < 2:
        raise ValueError("n must be >= 2")
    if m_bound < 1:
        raise ValueError("m_bound must be >= 1")
    if knobs.get("level_rho", "global") not in ("global", "local"):
        raise ValueError("level_rho must be 'global' or 'local'")
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    unknown = set(knobs) - set(_PRACTICAL_DEFAULTS) - {"rho", "band_offset", "k_lo", "k_hi"}
    if unknown:
        raise ValueError(f"unknown parameter overrides: {sorted(unknown)}")

    m = m_bound
    log2_nm = math.log2(n * m)
    base = n if m >= n else m

    if preset == "paper":
        gamma = 2.0**20 * p
        lg = log2_nm
        poly = lg ** (11 + 3 * p) / eps ** (4 + 4 * p)
        kappa1 = poly
        kappa2 = base ** (1 - 2 / p) * poly
        rho = gamma**2 * base ** (1 - 1 / p) * lg**4 / (eps**2 * m)
        kappa = kappa1 if p < 2 else kappa2
        k_lo_real, k_hi_real = _budget_range(n, m, eps, p)
        hh_reps = math.ceil(math.log2(n))
        fp_reps = max(1, math.ceil(math.log2(max(2.0, math.log2(n)))))
        counter_eps = eps / (8 * log2_nm)
        counter_delta = 1.0 / (n * m)
        length_base = knobs.get("length_base", _PRACTICAL_DEFAULTS["length_base"])
        level_slack = float(knobs.get("level_slack") or 1.0)
        level_rho = knobs.get("level_rho", "global")
    else:
        cfg = {**_PRACTICAL_DEFAULTS, **knobs}
        gamma = float(cfg["gamma"])
        lg = float(cfg["log_factor"])
        kappa1 = float(cfg["kappa_const"])
        kappa2 = float(cfg["kappa_const"]) * base ** (1 - 2 / p)
        rho = gamma**2 * base ** (1 - 1 / p) * lg**4 / (eps**2 * m)
        kappa = kappa1 if p < 2 else kappa2
        k_lo_real = cfg["k_factor"] * p * kappa * lg**2
        k_hi_real = cfg["k_factor"] * 1.01 * p * kappa * lg**2
        hh_reps = int(cfg["hh_reps"])
        fp_reps = int(cfg["fp_reps"])
        counter_eps = float(cfg["counter_eps"])
        counter_delta = float(cfg["counter_delta"])
        length_base = float(cfg["length_base"])
        level_slack = cfg["level_slack"]
        if level_slack is None:
            # the constant the heavy-hitter analysis carries in its level test
            level_slack = 2 * 800**p / eps ** (2 * p)
        level_slack = float(level_slack)
        level_rho = cfg["level_rho"]

    rho = rho_formula = knobs.get("rho", rho)
    if rho > 1:
        logger.debug("sampling rate %.3g exceeds 1 for n=%d m=%d; clamping", rho, n, m)
        rho = 1.0

    k_lo = max(1, math.ceil(k_lo_real))
    k_hi = max(k_lo, math.floor(k_hi_real))
    k_lo = int(knobs.get("k_lo", k_lo))
    k_hi = int(knobs.get("k_hi", max(k_hi, k_lo)))

    band_offset = knobs.get("band_offset")
    if band_offset is None:
        band_offset = math.floor(math.log2(gamma**2 * log2_nm / eps**2))

    return SketchParams(
        n=n,
        m_bound=m,
        eps=eps,
        delta=delta,
        p=p,
        preset=preset,
        gamma=gamma,
        log_nm=lg,
        rho=rho,
        rho_formula=rho_formula,
        kappa1=kappa1,
        kappa2=kappa2,
        kappa=kappa,
        k_lo=k_lo,
        k_hi=k_hi,
        hh_reps=hh_reps,
        time_levels=math.ceil(math.log2(m)) + 1,
        fp_levels=math.ceil(p * log2_nm),
        fp_reps=fp_reps,
        band_offset=int(band_offset),
        counter_eps=counter_eps,
        counter_delta=counter_delta,
        length_base=length_base,
        level_slack=level_slack,
        level_rho=level_rho,
        knobs=dict(knobs),
    )
