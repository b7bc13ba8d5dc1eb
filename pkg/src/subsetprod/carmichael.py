"""Carmichael numbers: Korselt and lambda tests, Erdos prime pools, generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from itertools import product as cartesian

import numpy as np

from .modmath import first_primes, is_prime, primes_up_to
from .mspp import (
    DEFAULT_MEMORY_CAP,
    AttackFailed,
    AttackParams,
    AttackStats,
    MsppInstance,
    NiceSet,
    ba_mspp,
)

__all__ = [
    "InvalidFactorization",
    "FactorizationUnavailable",
    "LimitTooLarge",
    "PoolTooSmall",
    "CarmichaelCertificate",
    "ExponentPool",
    "CarmichaelSearchConfig",
    "carmichael_lambda",
    "factorize",
    "carmichael_certificate",
    "is_carmichael",
    "build_prime_pool",
    "estimate_pool_size",
    "generate_carmichael",
    "scan_carmichael",
]

TRIAL_DIVISION_LIMIT = 10**14
SCAN_LIMIT = 10**8


class InvalidFactorization(ValueError):
    pass


class FactorizationUnavailable(ValueError):
    pass


class LimitTooLarge(ValueError):
    pass


class PoolTooSmall(ValueError):
    pass


def _lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


def carmichael_lambda(factorization) -> int:
    """Exponent of the unit group mod n, from ``[(prime, exponent), ...]``."""
    seen = set()
    parts = []
    for p, a in factorization:
        if a < 1 or p in seen or not is_prime(p):
            raise InvalidFactorization(f"bad factor {p}^{a}")
        seen.add(p)
        phi = (p - 1) * p ** (a - 1)
        if p == 2 and a > 2:
            phi //= 2
        parts.append(phi)
    return reduce(_lcm, parts, 1)


def factorize(n: int) -> list[tuple[int, int]]:
    """Trial division; refuses numbers above ``TRIAL_DIVISION_LIMIT``."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > TRIAL_DIVISION_LIMIT:
        raise FactorizationUnavailable(f"{n} is too large to factor by trial division; supply its factors")
    out = []
    for p in primes_up_to(math.isqrt(n)):
        if p * p > n:
            break
        if n % p == 0:
            a = 0
            while n % p == 0:
                n //= p
                a += 1
            out.append((p, a))
    if n > 1:
        out.append((n, 1))
    return out


@dataclass(frozen=True)
class CarmichaelCertificate:
    N: int
    prime_factors: tuple[int, ...]
    squarefree: bool
    korselt: bool
    composite: bool
    lambda_criterion: bool | None = None

    @property
    def ok(self) -> bool:
        return self.squarefree and self.korselt and self.composite

    def render(self) -> str:
        return "\n".join([
            f"N = {self.N}",
            f"factors = {','.join(map(str, self.prime_factors))}",
            f"factor_count = {len(self.prime_factors)}",
            f"squarefree = {str(self.squarefree).lower()}",
            f"korselt = {str(self.korselt).lower()}",
            f"composite = {str(self.composite).lower()}",
        ]) + "\n"


def carmichael_certificate(N: int, factors=None) -> CarmichaelCertificate:
    """Run the Korselt checks on ``N``.

    ``factors`` may be a list of primes (with repetition) or of
    ``(prime, exponent)`` pairs. Without it ``N`` is factored by trial division.
    The lambda criterion is evaluated as an independent cross-check.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    if factors is None:
        fact = factorize(N)
    else:
        counts: dict[int, int] = {}
        for f in factors:
            p, a = f if isinstance(f, tuple) else (f, 1)
            counts[p] = counts.get(p, 0) + a
        fact = sorted(counts.items())
        if math.prod(p**a for p, a in fact) != N or not all(is_prime(p) for p, _ in fact):
            raise InvalidFactorization("supplied factors do not form a prime factorization of N")
    squarefree = all(a == 1 for _, a in fact)
    composite = sum(a for _, a in fact) >= 2
    korselt = all((N - 1) % (p - 1) == 0 for p, _ in fact)
    lam = (N - 1) % carmichael_lambda(fact) == 0 if composite else None
    if squarefree and composite and lam != korselt:
        raise AssertionError("Korselt and lambda criteria disagree")
    primes = tuple(p for p, a in fact for _ in range(a))
    return CarmichaelCertificate(N, primes, squarefree, korselt, composite, lam)


def is_carmichael(N: int, factors=None) -> bool:
    if N < 2 or (factors is None and N % 2 == 0):
        return False
    return carmichael_certificate(N, factors).ok


# ---------------------------------------------------------------------------
# Erdos pools


class ExponentPool(NiceSet):
    """Primes ``q_1^a_1 ... q_r^a_r + 1`` stored as exponent tuples (one byte each)."""

    kind = "exponents"

    def __init__(self, base_primes, exponents: np.ndarray):
        self.base_primes = tuple(base_primes)
        self.exponents = np.asarray(exponents, dtype=np.uint8).reshape(-1, len(self.base_primes))

    def __len__(self) -> int:
        return self.exponents.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        row = self.exponents[i]
        return math.prod(q ** int(a) for q, a in zip(self.base_primes, row)) + 1

    def tuple_of(self, i: int) -> tuple[int, ...]:
        return tuple(int(a) for a in self.exponents[i])

    def index_of(self, p: int) -> int:
        d = p - 1
        row = []
        for q in self.base_primes:
            a = 0
            while d % q == 0:
                d //= q
                a += 1
            row.append(a)
        if d != 1:
            raise KeyError(p)
        hits = np.nonzero((self.exponents == np.array(row, dtype=np.uint8)).all(axis=1))[0]
        if len(hits) == 0:
            raise KeyError(p)
        return int(hits[0])

    def storage_bits(self) -> int:
        return 8 * self.exponents.size

    def describe(self) -> str:
        return f"exponents over {self.base_primes}, {len(self)} members"

    def __repr__(self):
        return f"ExponentPool(base={self.base_primes}, size={len(self)})"


def _check_exponents(H) -> tuple[int, ...]:
    H = tuple(int(h) for h in H)
    if not H or H[-1] < 1 or any(a < b for a, b in zip(H, H[1:])):
        raise ValueError("exponent vector must be non-increasing with last entry >= 1")
    if H[0] > 255:
        raise ValueError("exponents above 255 do not fit the one-byte storage")
    return H


def build_prime_pool(H) -> tuple[int, ExponentPool]:
    """Return ``(Lambda, pool)`` with pool = {p prime : p-1 | Lambda, p does not divide Lambda}.

    Divisors are walked as exponent tuples with the last coordinate fastest.
    """
    H = _check_exponents(H)
    qs = first_primes(len(H))
    lam = math.prod(q**h for q, h in zip(qs, H))
    rows = []
    for exps in cartesian(*(range(h + 1) for h in H)):
        p = math.prod(q**a for q, a in zip(qs, exps)) + 1
        if lam % p and is_prime(p):
            rows.append(exps)
    arr = np.array(rows, dtype=np.uint8).reshape(-1, len(H))
    return lam, ExponentPool(qs, arr)


def estimate_pool_size(H) -> float:
    """Heuristic pool size ``g(L) * prod(h_j + (q_j - 2)/(q_j - 1))``, ``g(L) = L / (phi(L) ln sqrt(2L))``."""
    H = _check_exponents(H)
    qs = first_primes(len(H))
    lam = math.prod(q**h for q, h in zip(qs, H))
    if lam < 3:
        raise ValueError("Lambda must be >= 3")
    phi = math.prod((q - 1) * q ** (h - 1) for q, h in zip(qs, H))
    g = lam / (phi * math.log(math.sqrt(2 * lam)))
    return g * math.prod(h + (q - 2) / (q - 1) for q, h in zip(qs, H))


# ---------------------------------------------------------------------------
# generation


@dataclass
class CarmichaelSearchConfig:
    H: tuple[int, ...]
    ell: int
    b: int | None = None
    q: int = 12
    iterations: int = 1000
    seed: int = 0
    workers: int = 1
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP
    lam: int = field(init=False)
    pool: ExponentPool = field(init=False, repr=False)

    def __post_init__(self):
        self.H = _check_exponents(self.H)
        self.lam, self.pool = build_prime_pool(self.H)

    @property
    def r(self) -> int:
        return len(self.H)

    def attack_params(self) -> AttackParams:
        b = self.b
        if b is None:
            b = (len(self.pool) + 1) // 2
        return AttackParams(b=b, ell=self.ell, q=self.q, iterations=self.iterations, seed=self.seed,
                            workers=self.workers)


def _pool_product_mod(pool: ExponentPool, modulus: int) -> int:
    acc = 1
    for i in range(len(pool)):
        acc = acc * pool[i] % modulus
    return acc


def generate_carmichael(config: CarmichaelSearchConfig, mode: str = "one", *,
                        stats: AttackStats | None = None, sweep_splits: bool = False,
                        digest: str = "md5", on_round=None) -> CarmichaelCertificate:
    """Find a Carmichael number from subsets of the Erdos pool.

    ``mode="one"``: a weight-ell subset with product 1 mod Lambda; ``N`` is
    its product (ell factors). ``mode="B"``: a weight-ell subset ``T`` whose
    product equals that of the whole pool mod Lambda; ``N`` is the product of
    the complement (|pool| - ell factors). ``mode="both"`` tries "one" then "B".

    Every verified subset of the successful round is turned into a number and
    the smallest is returned, so a full-partition window with ``sweep_splits``
    yields the least Carmichael number reachable at weight ell.
    Raises :class:`AttackFailed` when the inner attack runs out of rounds.
    """
    if mode not in ("one", "B", "both"):
        raise ValueError("mode must be 'one', 'B' or 'both'")
    pool = config.pool
    if len(pool) < max(2, config.ell):
        raise PoolTooSmall(f"pool has {len(pool)} members, need at least {max(2, config.ell)}")
    if mode == "one" and config.ell < 2:
        raise ValueError("target-one mode needs ell >= 2 (a Carmichael number has several factors)")
    lam = config.lam
    params = config.attack_params()

    if mode == "one" or (mode == "both" and config.ell >= 2):
        inst = MsppInstance(lam, 1, pool)
        try:
            sols = ba_mspp(inst, params, stats=stats, sweep_splits=sweep_splits, collect_all=True,
                        memory_cap_bytes=config.memory_cap_bytes, digest=digest, on_round=on_round)
        except AttackFailed:
            if mode == "one":
                raise
        else:
            certs = [_certify(s.elements) for s in sols if s.weight >= 2]
            if certs:
                return min(certs, key=lambda c: c.N)

    target = _pool_product_mod(pool, lam)
    inst = MsppInstance(lam, target, pool)
    sols = ba_mspp(inst, params, stats=stats, sweep_splits=sweep_splits, collect_all=True,
                        memory_cap_bytes=config.memory_cap_bytes, digest=digest, on_round=on_round)
    members = [pool[i] for i in range(len(pool))]
    certs = []
    for sol in sols:
        excluded = set(sol.indices)
        factors = [p for i, p in enumerate(members) if i not in excluded]
        if len(factors) >= 2:
            certs.append(_certify(factors))
    if not certs:
        raise AttackFailed(params.iterations)
    return min(certs, key=lambda c: c.N)


def _certify(factors) -> CarmichaelCertificate:
    factors = sorted(factors)
    cert = carmichael_certificate(math.prod(factors), factors)
    if not cert.ok:
        raise AssertionError(f"generated number fails Korselt: {cert}")
    return cert


def scan_carmichael(limit: int) -> list[int]:
    """All Carmichael numbers up to ``limit`` in increasing order."""
    if limit > SCAN_LIMIT:
        raise LimitTooLarge(f"limit {limit} above {SCAN_LIMIT}")
    out = []
    # base-2 Fermat filter, then Korselt on the survivors
    for n in range(3, limit + 1, 2):
        if pow(2, n - 1, n) == 1 and not is_prime(n) and is_carmichael(n):
            out.append(n)
    return out
