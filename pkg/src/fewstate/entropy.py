"""Shannon entropy from frequency moments at orders just around p = 1.

The Renyi entropy R(p) = log2(F_p / m^p) / (1 - p) tends to the Shannon
entropy as p -> 1.  We estimate F_p at k + 1 Chebyshev-spaced orders
p_i = 1 + g(cos(i pi / k)), interpolate R as a polynomial in the
Chebyshev variable z, and read it off at z* = 1 - 1/k^2, the point where
g vanishes (p = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .model import SeededPrf, StateMeter
from .stable import StableBank


@dataclass(frozen=True)
class EntropyNodes:
    k: int
    scale: float
    z: np.ndarray
    p: np.ndarray
    eps_node: float

    @property
    def z_star(self) -> float:
        return 1.0 - 1.0 / self.k**2

    def g(self, z):
        k2 = self.k**2
        return self.scale * (k2 * (np.asarray(z) - 1) + 1) / (2 * k2 + 1)


def build_nodes(eps: float, m: int) -> EntropyNodes:
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if m < 4:
        raise ValueError("m must be at least 4")
    log_m = math.log2(m)
    k = math.ceil(math.log2(1 / eps) + math.log2(log_m))
    scale = 1.0 / (2 * (k + 1) * log_m)
    z = np.cos(np.arange(k + 1) * math.pi / k)
    k2 = k * k
    p = 1.0 + scale * (k2 * (z - 1) + 1) / (2 * k2 + 1)
    if np.any(p <= 0) or np.any(p >= 2) or np.any(p == 1):
        raise ValueError(f"node orders out of range: {p}")
    eps_node = eps / (12 * (k + 1) ** 3 * log_m)
    return EntropyNodes(k, scale, z, p, eps_node)


def renyi_values(nodes: EntropyNodes, moments, m: float, reference: float | None = None) -> np.ndarray:
    """R_i = log2(F_{p_i} / m^{p_i}) / (1 - p_i).

    ``reference`` replaces m inside the logarithm when given (an estimate of
    F_1 from the same sketch, so that its error cancels near p = 1).
    """
    moments = np.asarray(moments, dtype=np.float64)
    if np.any(moments <= 0):
        raise ValueError("moment estimates must be positive")
    base = float(m if reference is None else reference)
    y = np.log2(moments) - nodes.p * math.log2(base)
    return y / (1 - nodes.p)


def interpolate_entropy(nodes: EntropyNodes, renyi) -> float:
    poly = BarycentricInterpolator(nodes.z, np.asarray(renyi, dtype=np.float64))
    return float(poly(nodes.z_star))


def estimate_entropy(nodes: EntropyNodes, moments, m: float, reference: float | None = None) -> float:
    """Entropy estimate in bits from per-node moments."""
    return interpolate_entropy(nodes, renyi_values(nodes, moments, m, reference))


def entropy_to_exp(h: float) -> float:
    """The multiplicative form 2^H."""
    return 2.0**h


class EntropyEstimator:
    """Streaming entropy estimate from one p-stable bank over all node orders.

    The bank carries one extra order p = 1 whose estimate of F_1 normalises
    the other orders (see :func:`renyi_values`).  All orders share the same
    sketch entries and rounding coins, so their errors move together.
    """

    def __init__(self, eps: float, m_bound: int, prf: SeededPrf, rows: int | None = None,
                 a: float = 0.002, meter: StateMeter | None = None, exact: bool = False,
                 coins: str = "per-row", normalise: bool = True):
        self.nodes = build_nodes(eps, m_bound)
        self.rows = rows if rows is not None else math.ceil(64 / eps**2)
        self.normalise = normalise
        ps = np.append(self.nodes.p, 1.0)
        self.bank = StableBank(ps, self.rows, prf, a=a, meter=meter, exact=exact, coins=coins)
        self.m = 0

    @property
    def meter(self) -> StateMeter:
        return self.bank.meter

    def process(self, item: int) -> None:
        self.m += 1
        self.bank.process(item)

    def moments(self) -> np.ndarray:
        return self.bank.estimates()[:-1]

    def estimate(self) -> float:
        if self.m == 0:
            return 0.0
        est = self.bank.estimates()
        reference = est[-1] if self.normalise else None
        return estimate_entropy(self.nodes, est[:-1], self.m, reference)
