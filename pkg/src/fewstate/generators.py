"""Seeded stream constructions and the plain-text stream file format.

Streams are numpy int64 arrays of 1-based item ids wrapped in
:class:`Stream`, which also records the universe size and generator
metadata (planted item, block position, and so on).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .model import Update


@dataclass
class Stream:
    items: np.ndarray
    n: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.items = np.asarray(self.items, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.items.size)

    @property
    def m(self) -> int:
        return len(self)

    def __iter__(self) -> Iterator[Update]:
        for t, item in enumerate(self.items.tolist(), start=1):
            yield Update(t, item)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Stream):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.items, other.items)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def nearest_root(n: int, p: float) -> int:
    """n^(1/p) rounded to the nearest integer, robust to float error."""
    b = round(n ** (1.0 / p))
    if float(p).is_integer():
        e = int(p)
        # fix cases like 4096 ** (1/3) = 15.999999999999998
        for cand in (b - 1, b, b + 1):
            if cand > 0 and cand**e == n:
                return cand
    return b


def gen_permutation(n: int, seed: int) -> Stream:
    return Stream(_rng(seed).permutation(n) + 1, n, {"kind": "permutation"})


def _planted_block(n: int, block: int, seed: int, kind: str) -> Stream:
    rng = _rng(seed)
    planted = int(rng.integers(1, n + 1))
    start = int(rng.integers(0, n - block + 1))
    others = np.arange(1, n + 1)
    others = others[others != planted]
    singles = rng.choice(others, size=n - block, replace=False)
    items = np.concatenate([singles[:start], np.full(block, planted), singles[start:]])
    meta = {"kind": kind, "planted": planted, "block": block, "start": start + 1}
    return Stream(items, n, meta)


def gen_lowerbound_pair(n: int, p: float, seed: int) -> tuple[Stream, Stream]:
    """The pair of streams from the F_p lower bound.

    S1: a block of b = round(n^(1/p)) copies of one random item at a random
    position, with the other n - b updates distinct singletons.
    S2: a random permutation of [n].  F_p(S1) = (n - b) + b^p, F_p(S2) = n.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    b = nearest_root(n, p)
    if b < 2:
        raise ValueError(f"n^(1/p) rounds to {b}; need at least 2")
    s1 = _planted_block(n, b, seed, "lowerbound-S1")
    s1.meta["p"] = p
    s2 = gen_permutation(n, seed + 1)
    s2.meta["kind"] = "lowerbound-S2"
    return s1, s2


def gen_planted_hh(n: int, p: float, eps: float, seed: int) -> Stream:
    """One item with frequency ceil(eps * n^(1/p)) in a contiguous block; the rest singletons."""
    if n < 4:
        raise ValueError("n must be at least 4")
    block = math.ceil(eps * n ** (1.0 / p) - 1e-9)
    block = max(1, min(n, block))
    s = _planted_block(n, block, seed, "planted-hh")
    s.meta.update(p=p, eps=eps)
    return s


def gen_zipf(n: int, m: int, s: float, seed: int) -> Stream:
    """m i.i.d. draws with P(item = j) proportional to j^-s on [n]."""
    if s < 0:
        raise ValueError("zipf exponent must be >= 0")
    weights = np.arange(1, n + 1, dtype=np.float64) ** (-s)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    u = _rng(seed).random(m)
    items = np.minimum(np.searchsorted(cdf, u, side="right"), n - 1) + 1
    return Stream(items, n, {"kind": "zipf", "s": s})


def gen_uniform(d: int, copies: int, seed: int) -> Stream:
    """Each of d items exactly ``copies`` times, in random order."""
    items = np.repeat(np.arange(1, d + 1), copies)
    return Stream(_rng(seed).permutation(items), d, {"kind": "uniform", "copies": copies})


def gen_pseudoheavy(n: int, seed: int) -> Stream:
    """Stream that defeats pruning by globally smallest counters.

    sqrt(n) blocks of sqrt(n) updates.  There are n^(1/4) special blocks,
    each holding n^(1/4) pseudo-heavy items n^(1/4) times.  Each special
    block is followed by n^(1/8) blocks containing n^(1/8) copies of the
    single heavy item (total frequency sqrt(n)) padded with fresh
    singletons.  All remaining blocks are fresh singletons.  Item ids are
    relabelled by a seeded permutation of [n].
    """
    root8 = round(n ** 0.125)
    if root8 < 2 or root8**8 != n:
        raise ValueError(f"n={n} is not a perfect 8th power >= 2^8")
    rng = _rng(seed)
    width = root8**4            # sqrt(n): block length and number of blocks
    quarter = root8**2          # n^(1/4)
    eighth = root8              # n^(1/8)

    heavy = 1
    pseudo = np.arange(2, 2 + width)            # sqrt(n) pseudo-heavy ids
    next_fresh = 2 + width

    def fresh(count):
        nonlocal next_fresh
        out = np.arange(next_fresh, next_fresh + count)
        next_fresh += count
        return out

    blocks = []
    for s in range(quarter):
        group = pseudo[s * quarter:(s + 1) * quarter]
        blocks.append(rng.permutation(np.repeat(group, quarter)))
        for _ in range(eighth):
            blk = np.concatenate([np.full(eighth, heavy), fresh(width - eighth)])
            blocks.append(rng.permutation(blk))
    while len(blocks) < width:
        blocks.append(fresh(width))
    raw = np.concatenate(blocks)

    relabel = rng.permutation(n) + 1
    items = relabel[raw - 1]
    meta = {
        "kind": "pseudoheavy",
        "heavy": int(relabel[heavy - 1]),
        "heavy_frequency": width,
        "pseudo_frequency": quarter,
        "pseudo_count": width,
    }
    return Stream(items, n, meta)


# -- file format -------------------------------------------------------------


class StreamFormatError(ValueError):
    pass


class MalformedHeaderError(StreamFormatError):
    pass


class ItemOutOfRangeError(StreamFormatError):
    pass


class TruncatedStreamError(StreamFormatError):
    pass


def write_stream(path, stream: Stream) -> None:
    with open(path, "w") as fh:
        fh.write(f"n={stream.n} m={len(stream)}\n")
        if len(stream):
            fh.write("\n".join(map(str, stream.items.tolist())))
            fh.write("\n")


def _parse_header(line: str) -> tuple[int, int]:
    fields = dict(tok.split("=", 1) for tok in line.split() if "=" in tok)
    if set(fields) != {"n", "m"} or len(line.split()) != 2:
        raise MalformedHeaderError(f"expected 'n=<int> m=<int>', got {line.strip()!r}")
    try:
        n, m = int(fields["n"]), int(fields["m"])
    except ValueError as exc:
        raise MalformedHeaderError(f"non-integer header value in {line.strip()!r}") from exc
    if n < 1 or m < 0:
        raise MalformedHeaderError(f"invalid header values n={n} m={m}")
    return n, m


def read_stream(path) -> Stream:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise MalformedHeaderError("empty file")
    n, m = _parse_header(lines[0])
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) < m:
        raise TruncatedStreamError(f"header promises {m} items, found {len(body)}")
    if len(body) > m:
        raise StreamFormatError(f"header promises {m} items, found {len(body)}")
    try:
        items = np.array([int(ln) for ln in body], dtype=np.int64)
    except ValueError as exc:
        raise StreamFormatError(f"non-integer item: {exc}") from exc
    bad = np.flatnonzero((items < 1) | (items > n))
    if bad.size:
        i = int(bad[0])
        raise ItemOutOfRangeError(f"line {i + 2}: item {items[i]} outside [1, {n}]")
    return Stream(items, n, {"kind": "file", "path": str(path)})
