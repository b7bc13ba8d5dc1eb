"""Closed-form planning for the birthday attack.

Probabilities are exact ``Fraction`` values; the binomials involved (e.g.
C(10**7, 21)) are far beyond double range, so floats only appear when a
report is rendered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "InvalidParams",
    "GIB",
    "PlanReport",
    "TimeEstimate",
    "success_probability",
    "expected_iterations",
    "optimal_split",
    "memory_estimate",
    "time_estimate",
    "multicollision_expectation",
    "choose_q",
    "increase_ratio",
    "plan",
]

GIB = 2**30


class InvalidParams(ValueError):
    """Parameters outside the domain of a formula or attack."""


def _check_split(n: int, b: int, h1: int, h2: int, b2: int | None) -> int:
    b2 = b if b2 is None else b2
    if min(n + 1, b, b2, h1, h2) < 0:
        raise InvalidParams("parameters must be non-negative")
    if b + b2 > n + 1:
        raise InvalidParams(f"windows of size {b} and {b2} do not fit in {n + 1} indices")
    if h1 > b or h2 > b2:
        raise InvalidParams(f"split ({h1},{h2}) does not fit windows ({b},{b2})")
    return b2


def success_probability(n: int, b: int, h1: int, h2: int, b2: int | None = None) -> Fraction:
    """Chance that random disjoint windows split a fixed weight-(h1+h2) set as (h1, h2).

    ``C(b,h1) C(b,h2) / C(n+1, h1+h2)``. ``b2`` gives the second window a
    different size (full partitions of an odd pool).
    """
    b2 = _check_split(n, b, h1, h2, b2)
    return Fraction(math.comb(b, h1) * math.comb(b2, h2), math.comb(n + 1, h1 + h2))


def expected_iterations(prob: Fraction) -> float:
    if prob <= 0:
        raise InvalidParams("probability must be positive")
    return float(1 / Fraction(prob))


def optimal_split(ell: int) -> tuple[int, int]:
    if ell < 0:
        raise InvalidParams("ell must be >= 0")
    return ell // 2, ell - ell // 2


def memory_estimate(n: int, b: int, h1: int, q: int, element_bits: float, nice: bool = False) -> int:
    """Bits needed by a round: stored digests and masks, plus the pool.

    An explicit pool costs ``(n+1) * element_bits``; a nice pool is charged
    ``n * ceil(log2 n)`` for its compact description.
    """
    stored = (4 * q + b) * math.comb(b, h1)
    if nice:
        pool = n * math.ceil(math.log2(n)) if n > 1 else 0
    else:
        pool = (n + 1) * element_bits
    return math.ceil(stored + pool)


@dataclass(frozen=True)
class TimeEstimate:
    multiplications: int
    lookups: int
    bit_operations: float
    per_worker_multiplications: float
    per_worker_bit_operations: float


def time_estimate(b: int, h1: int, h2: int, modulus_bits: int, workers: int = 1) -> TimeEstimate:
    """Modular multiplications to build and probe one round, ``C(b,h1) * (h1+h2)``.

    Inversions are not counted. Bit cost uses ``M = L log2 L`` for an
    ``L``-bit modulus; each probe adds one O(1) table lookup.
    """
    if workers < 1:
        raise InvalidParams("workers must be >= 1")
    s_b = math.comb(b, h1)
    mults = s_b * (h1 + h2)
    L = max(modulus_bits, 2)
    m_cost = L * math.log2(L)
    bits = mults * m_cost + s_b
    return TimeEstimate(mults, s_b, bits, mults / workers, bits / workers)


def multicollision_expectation(n: int, m: int, r: int) -> float:
    """Expected number of r-multicollisions among n draws from m values."""
    if m < 1 or r < 2:
        raise InvalidParams("need m >= 1 and r >= 2")
    return float(Fraction(n**r, math.factorial(r) * m ** (r - 1)))


def choose_q(s: int) -> int:
    """Hex digits of digest to keep so ``s`` values avoid 3-multicollisions."""
    if s < 1:
        raise InvalidParams("s must be >= 1")
    kappa = 1.5 * math.log2(s)
    return min(32, max(1, math.ceil(kappa / 4)))


def increase_ratio(n: int, b: int, h: int) -> float:
    """log of P(b+1, h) / P(b, h+1), each at its balanced split.

    Positive values mean growing the window beats growing the weight.
    """
    if h + 1 > b:
        raise InvalidParams("need h + 1 <= b")
    p_wider = success_probability(n, b + 1, *optimal_split(h))
    p_heavier = success_probability(n, b, *optimal_split(h + 1))
    return math.log(p_wider / p_heavier)


@dataclass(frozen=True)
class PlanReport:
    n: int
    b: int
    ell: int
    h1: int
    h2: int
    q: int
    probability: Fraction
    expected_iterations: float
    memory_bits: int
    time_multiplications: int

    @property
    def probability_float(self) -> float:
        return float(self.probability)

    @property
    def memory_gib(self) -> float:
        return self.memory_bits / 8 / GIB

    def as_row(self) -> dict:
        return {
            "n": self.n,
            "b": self.b,
            "h1": self.h1,
            "h2": self.h2,
            "Q": self.q,
            "prob": repr(float(self.probability)),
            "exp_iters": repr(self.expected_iterations),
            "mem_bits": self.memory_bits,
            "time_mults": self.time_multiplications,
        }

    def render(self) -> str:
        return "\n".join([
            f"n = {self.n}  (pool size {self.n + 1})",
            f"b = {self.b}",
            f"ell = {self.ell}  split (h1, h2) = ({self.h1}, {self.h2})",
            f"Q = {self.q} hex digits",
            f"success probability = {float(self.probability):.6g}",
            f"expected iterations = {self.expected_iterations:.6g}",
            f"memory = {self.memory_bits} bits  ({self.memory_gib:.6g} GiB)",
            f"time = {self.time_multiplications} modular multiplications per round",
        ])


def plan(
    n: int,
    b: int,
    ell: int,
    q: int | None = None,
    element_bits: float | None = None,
    nice: bool = False,
    h1: int | None = None,
) -> PlanReport:
    """Bundle every estimate for one parameter choice.

    ``q`` defaults to :func:`choose_q` over both half sets; ``element_bits``
    defaults to ``log2(n + 1)``.
    """
    if h1 is None:
        h1, h2 = optimal_split(ell)
    else:
        h2 = ell - h1
    prob = success_probability(n, b, h1, h2)
    if q is None:
        q = choose_q(math.comb(b, h1) + math.comb(b, h2))
    if element_bits is None:
        element_bits = math.log2(n + 1)
    mem = memory_estimate(n, b, h1, q, element_bits, nice)
    t = time_estimate(b, h1, h2, 1)
    return PlanReport(n, b, ell, h1, h2, q, prob, expected_iterations(prob), mem, t.multiplications)
