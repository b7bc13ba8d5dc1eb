"""Integer and modular arithmetic substrate.

Python ints are already arbitrary precision, so ring elements are plain
``int`` values kept reduced to ``[0, modulus)``.
"""

from __future__ import annotations

import math
import random
from itertools import compress
from dataclasses import dataclass
from typing import Iterator

import numpy as np

__all__ = [
    "NotInvertible",
    "ModRing",
    "mod_mul",
    "mod_pow",
    "mod_inv",
    "is_prime",
    "primes_up_to",
    "iter_primes",
    "first_primes",
    "gen_safe_prime",
    "make_rng",
    "rand_int",
]


class NotInvertible(ArithmeticError):
    """Raised when an element shares a factor with the modulus."""

    def __init__(self, value: int, modulus: int):
        self.value = value
        self.modulus = modulus
        self.gcd = math.gcd(value, modulus)
        super().__init__(f"{value} is not invertible mod {modulus} (gcd = {self.gcd})")


@dataclass(frozen=True)
class ModRing:
    modulus: int

    def __post_init__(self):
        if self.modulus < 2:
            raise ValueError("modulus must be >= 2")

    def __call__(self, x: int) -> int:
        return x % self.modulus


def mod_mul(a: int, b: int, ring: ModRing | int) -> int:
    m = ring.modulus if isinstance(ring, ModRing) else ring
    return a * b % m


def mod_pow(base: int, exp: int, ring: ModRing | int) -> int:
    """Square-and-multiply exponentiation; ``exp = 0`` gives 1."""
    m = ring.modulus if isinstance(ring, ModRing) else ring
    if exp < 0:
        raise ValueError("negative exponent, use mod_inv first")
    result = 1 % m
    base %= m
    while exp:
        if exp & 1:
            result = result * base % m
        base = base * base % m
        exp >>= 1
    return result


def mod_inv(a: int, ring: ModRing | int) -> int:
    m = ring.modulus if isinstance(ring, ModRing) else ring
    try:
        return pow(a, -1, m)
    except ValueError:
        raise NotInvertible(a, m) from None


# ---------------------------------------------------------------------------
# primality

_TRIAL_BOUND = 1000
# bases 2..17 are deterministic below 341_550_071_728_321
_DETERMINISTIC_LIMIT = 341_550_071_728_321
_DETERMINISTIC_BASES = (2, 3, 5, 7, 11, 13, 17)


def _trial_primes() -> tuple[int, ...]:
    sieve = bytearray([1]) * _TRIAL_BOUND
    sieve[0:2] = b"\x00\x00"
    for p in range(2, int(_TRIAL_BOUND**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytes(len(range(p * p, _TRIAL_BOUND, p)))
    return tuple(i for i, v in enumerate(sieve) if v)


_TRIAL_PRIMES = _trial_primes()


def _strong_probable_prime(n: int, a: int, d: int, s: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_prime(n: int, rounds: int = 40) -> bool:
    """Trial division by primes below 1000, then Miller-Rabin.

    Below 3.4e14 a fixed base set makes the answer exact. Above it, ``rounds``
    bases are drawn from an RNG seeded by ``n`` itself so repeated calls agree.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if n < 2:
        return False
    for p in _TRIAL_PRIMES:
        if n % p == 0:
            return n == p
    if n < _TRIAL_BOUND * _TRIAL_BOUND:
        return True
    d, s = n - 1, 0
    while not d & 1:
        d >>= 1
        s += 1
    if n < _DETERMINISTIC_LIMIT:
        bases = _DETERMINISTIC_BASES
    else:
        rng = random.Random(n)
        bases = [rng.randrange(2, n - 1) for _ in range(rounds)]
    return all(_strong_probable_prime(n, a, d, s) for a in bases)


# ---------------------------------------------------------------------------
# prime enumeration

_SEGMENT = 1 << 18


def iter_primes(limit: int | None = None, segment: int = _SEGMENT) -> Iterator[int]:
    """Segmented sieve of Eratosthenes; unbounded when ``limit`` is None.

    Memory per segment is ``segment`` bytes plus the base primes up to the
    square root of the current segment end.
    """
    base: list[int] = []
    base_limit = 1
    lo = 2
    while limit is None or lo <= limit:
        hi = lo + segment if limit is None else min(lo + segment, limit + 1)
        root = math.isqrt(hi - 1)
        if root > base_limit:
            base = _simple_sieve(root)
            base_limit = root
        seg = bytearray([1]) * (hi - lo)
        for p in base:
            start = max(p * p, (lo + p - 1) // p * p)
            if start >= hi:
                continue
            seg[start - lo :: p] = bytes(len(range(start, hi, p)))
        yield from compress(range(lo, hi), seg)
        lo = hi


def _simple_sieve(limit: int) -> list[int]:
    if limit < 2:
        return []
    bs = bytearray([1]) * (limit + 1)
    bs[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(limit) + 1):
        if bs[p]:
            bs[p * p :: p] = bytes(len(range(p * p, limit + 1, p)))
    return [i for i, v in enumerate(bs) if v]


def primes_up_to(limit: int) -> list[int]:
    return list(iter_primes(limit))


def first_primes(k: int) -> list[int]:
    """The first ``k`` primes, ``2`` first."""
    if k < 0:
        raise ValueError("k must be >= 0")
    out: list[int] = []
    if k == 0:
        return out
    for p in iter_primes():
        out.append(p)
        if len(out) == k:
            break
    return out


# ---------------------------------------------------------------------------
# randomness


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator: Philox keyed by the 64-bit seed.

    ``stream`` selects the top word of the 256-bit counter, so every stream
    (e.g. one per attack round) is reproducible on its own.
    """
    bitgen = np.random.Philox(key=seed & 0xFFFFFFFFFFFFFFFF, counter=[0, 0, 0, stream & 0xFFFFFFFFFFFFFFFF])
    return np.random.Generator(bitgen)


def _randbits(rng: np.random.Generator, bits: int) -> int:
    words = (bits + 63) // 64
    raw = rng.integers(0, 1 << 64, size=words, dtype=np.uint64, endpoint=False)
    value = 0
    for w in raw:
        value = (value << 64) | int(w)
    return value >> (64 * words - bits)


def rand_int(rng: np.random.Generator, lo: int, hi: int) -> int:
    """Uniform integer in ``[lo, hi)`` of any size (rejection sampling)."""
    span = hi - lo
    if span <= 0:
        raise ValueError("empty range")
    bits = span.bit_length()
    while True:
        x = _randbits(rng, bits)
        if x < span:
            return lo + x


def gen_safe_prime(bits: int, seed: int = 0) -> int:
    """Random safe prime ``p = 2q + 1`` with exactly ``bits`` bits."""
    if bits < 3:
        raise ValueError("no safe prime has fewer than 3 bits")
    if bits <= 20:
        # q must be odd, which rules out 5 = 2*2 + 1
        candidates = [
            p for p in range(1 << (bits - 1), 1 << bits) if p % 4 == 3 and is_prime(p) and is_prime((p - 1) // 2)
        ]
        rng = make_rng(seed)
        return candidates[int(rng.integers(len(candidates)))]
    rng = make_rng(seed)
    small = _TRIAL_PRIMES[1:]
    while True:
        q = _randbits(rng, bits - 1) | (1 << (bits - 2)) | 1
        # walk q upwards over a window, sieving both q and 2q+1
        for _ in range(4096):
            if q.bit_length() != bits - 1:
                break
            p = 2 * q + 1
            if all(q % r and p % r for r in small if r < q):
                if is_prime(q) and is_prime(p):
                    return p
            q += 2
