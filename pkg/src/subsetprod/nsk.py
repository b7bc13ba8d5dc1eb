"""Naccache-Stern knapsack cryptosystem and the birthday attack on it.

A message bit ``m_i`` selects ``u_i = p_i^(1/s) mod p`` in the ciphertext
product, where ``p_i`` is the (i+1)-th prime. Recovering ``m`` from ``c`` and
the public key is a modular subset product instance over the ``u_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

from .mspp import (
    DEFAULT_MEMORY_CAP,
    AttackFailed,
    AttackParams,
    AttackStats,
    InvalidParams,
    MsppInstance,
    ba_mspp,
    window_sizes,
)
from .modmath import first_primes, gen_safe_prime, is_prime, iter_primes, make_rng, mod_inv, rand_int
from .planner import choose_q, optimal_split

__all__ = [
    "MalformedCiphertext",
    "WeightTooLarge",
    "InconsistentKnownBits",
    "NskPublicKey",
    "NskSecretKey",
    "Message",
    "dimension_for",
    "keygen",
    "keygen_from_prime",
    "encrypt",
    "decrypt",
    "reduce_high_weight",
    "high_weight_map",
    "attack",
    "attack_known_bits",
]


class MalformedCiphertext(ValueError):
    pass


class WeightTooLarge(ValueError):
    pass


class InconsistentKnownBits(ValueError):
    pass


@dataclass(frozen=True)
class NskPublicKey:
    p: int
    n: int
    u: tuple[int, ...]

    def __post_init__(self):
        if len(self.u) != self.n + 1:
            raise ValueError("public key needs n+1 elements")

    @property
    def small_primes(self) -> list[int]:
        return first_primes(self.n + 1)


@dataclass(frozen=True)
class NskSecretKey:
    s: int
    s_inv: int


@dataclass(frozen=True)
class Message:
    """An (n+1)-bit message, bit i at position 2**i."""

    value: int
    length: int

    def __post_init__(self):
        if not 0 <= self.value < 1 << self.length:
            raise ValueError(f"message {self.value} does not fit in {self.length} bits")

    @classmethod
    def from_bits(cls, bits) -> "Message":
        bits = list(bits)
        return cls(sum(int(b) << i for i, b in enumerate(bits)), len(bits))

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> i) & 1 for i in range(self.length))

    @property
    def hamming_weight(self) -> int:
        return bin(self.value).count("1")

    def __int__(self) -> int:
        return self.value


def dimension_for(p: int) -> int:
    """Largest n with ``p_0 * ... * p_n < p``."""
    acc = 1
    n = -1
    for q in iter_primes():
        if acc * q >= p:
            return n
        acc *= q
        n += 1


def keygen_from_prime(p: int, s: int | None = None, seed: int = 0) -> tuple[NskPublicKey, NskSecretKey]:
    """Key pair over a given prime ``p`` (no safe-prime check)."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    n = dimension_for(p)
    if n < 0:
        raise ValueError("p too small for a non-empty message space")
    if s is None:
        rng = make_rng(seed, 1)
        while True:
            s = rand_int(rng, 2, p - 1)
            if math.gcd(s, p - 1) == 1:
                break
    if math.gcd(s, p - 1) != 1:
        raise ValueError("s must be coprime to p - 1")
    s_inv = mod_inv(s, p - 1)
    u = tuple(pow(q, s_inv, p) for q in first_primes(n + 1))
    return NskPublicKey(p, n, u), NskSecretKey(s, s_inv)


def keygen(bits: int, seed: int = 0, allow_unsafe_prime: bool = False) -> tuple[NskPublicKey, NskSecretKey]:
    """Key pair over a random ``bits``-bit safe prime.

    With ``allow_unsafe_prime`` and ``bits < 64`` any prime of that size is
    accepted; toy sizes have very few safe primes.
    """
    if bits < 5:
        raise ValueError("bits must be >= 5")
    if allow_unsafe_prime and bits < 64:
        rng = make_rng(seed, 2)
        while True:
            p = rand_int(rng, 1 << (bits - 1), 1 << bits)
            if is_prime(p):
                break
    else:
        p = gen_safe_prime(bits, seed)
    return keygen_from_prime(p, seed=seed)


def _as_message(pk: NskPublicKey, m) -> Message:
    if isinstance(m, Message):
        msg = m
    else:
        msg = Message(int(m), pk.n + 1)
    if msg.length != pk.n + 1:
        raise ValueError(f"message has {msg.length} bits, key expects {pk.n + 1}")
    return msg


def encrypt(pk: NskPublicKey, m) -> int:
    msg = _as_message(pk, m)
    c = 1
    v = msg.value
    i = 0
    while v:
        if v & 1:
            c = c * pk.u[i] % pk.p
        v >>= 1
        i += 1
    return c


def _exponents(pk: NskPublicKey, sk: NskSecretKey, c: int) -> list[int]:
    if not 0 < c < pk.p:
        raise MalformedCiphertext("ciphertext outside Z_p*")
    w = pow(c, sk.s, pk.p)
    exps = []
    for q in pk.small_primes:
        e = 0
        while w % q == 0:
            w //= q
            e += 1
        exps.append(e)
    if w != 1:
        raise MalformedCiphertext("c^s mod p is not smooth over the key's small primes")
    return exps


def decrypt(pk: NskPublicKey, sk: NskSecretKey, c: int, allow_powers: bool = False) -> Message:
    """Recover the message from ``c^s mod p``.

    Each small prime ``p_i`` dividing ``c^s mod p`` sets bit ``i``. Strict mode
    rejects anything that is not a product of distinct ``p_i``. With
    ``allow_powers`` the exponent of ``p_i`` is used as the digit at ``2**i``.
    """
    exps = _exponents(pk, sk, c)
    if not allow_powers and any(e > 1 for e in exps):
        raise MalformedCiphertext("repeated small prime in c^s mod p")
    value = sum(e << i for i, e in enumerate(exps))
    return Message(value, max(pk.n + 1, value.bit_length()))


def high_weight_map(m: int, n: int) -> int:
    """The involution ``m -> 2^(n+1) + 2^n - m - 1``."""
    return (1 << (n + 1)) + (1 << n) - m - 1


def reduce_high_weight(pk: NskPublicKey, c: int) -> tuple[int, Callable[[int], int]]:
    """``c' = c^-1 u_n^2 prod_{i<n} u_i``, and the map from its plaintext back to ``m``.

    When ``m_n = 1`` the plaintext of ``c'`` is an ordinary message of weight
    ``n + 2 - H_m``; when ``m_n = 0`` it carries the digit 2 at position n.
    """
    p, n = pk.p, pk.n
    cp = mod_inv(c, p) * pk.u[n] * pk.u[n] % p
    for i in range(n):
        cp = cp * pk.u[i] % p
    return cp, lambda m_prime: high_weight_map(int(m_prime), n)


# ---------------------------------------------------------------------------
# attack


def _search(pk, target, weight, indices, *, b, q, iterations, seed, workers, sweep_splits, stats,
            memory_cap_bytes, digest, on_round=None) -> list[int]:
    """Weight-``weight`` subset of ``indices`` whose u-product is ``target``."""
    pool = [pk.u[i] for i in indices]
    size = len(pool)
    if weight > size:
        raise AttackFailed(0)
    if weight == 0:
        if target % pk.p == 1:
            return []
        raise AttackFailed(0)
    if b is None:
        b = (size + 1) // 2
    b1, b2 = window_sizes(size, b)
    h1, h2 = optimal_split(weight)
    if h2 > b2 or h1 > b1:
        raise WeightTooLarge(f"weight {weight} does not fit windows ({b1}, {b2})")
    if q is None:
        q = choose_q(math.comb(b1, h1) + math.comb(b2, h2))
    params = AttackParams(b=b, ell=weight, q=q, iterations=iterations, seed=seed, workers=workers)
    inst = MsppInstance(pk.p, target, pool)
    sol = ba_mspp(inst, params, sweep_splits=sweep_splits, stats=stats, memory_cap_bytes=memory_cap_bytes,
                  digest=digest, on_round=on_round)
    return [indices[i] for i in sol.indices]


def _bits_to_message(pk, ones) -> Message:
    return Message(sum(1 << i for i in ones), pk.n + 1)


def attack(
    pk: NskPublicKey,
    c: int,
    weight: int,
    *,
    b: int | None = None,
    q: int | None = None,
    iterations: int = 200,
    seed: int = 0,
    workers: int = 1,
    reduce: bool = True,
    at_most: bool = False,
    sweep_splits: bool = False,
    stats: AttackStats | None = None,
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP,
    digest: str = "md5",
    on_round: Callable[[dict], None] | None = None,
) -> Message:
    """Recover the message of ``c`` given its Hamming weight.

    ``b`` defaults to a full partition of the n+1 indices (the odd index goes
    to the first window); ``q`` defaults to :func:`choose_q`. Weights of at
    least ``b`` go through :func:`reduce_high_weight` unless ``reduce`` is
    False. ``at_most`` treats ``weight`` as an upper bound and tries
    ``weight, weight-1, ..., 0``.
    """
    if at_most:
        for w in range(weight, -1, -1):
            try:
                return attack(pk, c, w, b=b, q=q, iterations=iterations, seed=seed, workers=workers,
                              reduce=reduce, sweep_splits=sweep_splits, stats=stats,
                              memory_cap_bytes=memory_cap_bytes, digest=digest, on_round=on_round)
            except (AttackFailed, WeightTooLarge):
                continue
        raise AttackFailed(iterations)

    n = pk.n
    if not 0 <= weight <= n + 1:
        raise InvalidParams(f"weight must be in [0, {n + 1}]")
    kw = dict(q=q, iterations=iterations, seed=seed, workers=workers, sweep_splits=sweep_splits,
              stats=stats, memory_cap_bytes=memory_cap_bytes, digest=digest, on_round=on_round)
    full = list(range(n + 1))
    window = b if b is not None else (n + 2) // 2

    if weight >= window:
        if not reduce:
            raise WeightTooLarge(f"weight {weight} >= b = {window}; enable the high-weight reduction")
        eps = n + 1 - weight
        if eps + 1 >= window:
            raise WeightTooLarge(f"weight {weight} is too far from both 0 and n+1 for b = {window}")
        cp, back = reduce_high_weight(pk, c)
        # m_n = 1: c' is an ordinary ciphertext of weight eps + 1 (bit n set)
        try:
            ones = _search(pk, cp, eps + 1, full, b=b, **kw)
            if n in ones:
                m = Message(back(sum(1 << i for i in ones)), n + 1)
                if encrypt(pk, m) == c:
                    return m
        except (AttackFailed, WeightTooLarge):
            pass
        # m_n = 0: c' / u_n^2 is a weight eps - 1 product over indices 0..n-1
        if eps >= 1:
            target = cp * pow(pk.u[n], -2, pk.p) % pk.p
            sub_b = None if b is None else min(b, (n + 1) // 2)
            ones = _search(pk, target, eps - 1, full[:-1], b=sub_b, **kw)
            m_prime = (1 << (n + 1)) + sum(1 << i for i in ones)
            m = Message(back(m_prime), n + 1)
            if encrypt(pk, m) == c:
                return m
        raise AttackFailed(iterations)

    ones = _search(pk, c, weight, full, b=b, **kw)
    m = _bits_to_message(pk, ones)
    if encrypt(pk, m) != c:
        raise AssertionError("recovered message does not re-encrypt to c")
    return m


def attack_known_bits(
    pk: NskPublicKey,
    c: int,
    weight: int,
    known: Mapping[int, int],
    *,
    b: int | None = None,
    q: int | None = None,
    iterations: int = 200,
    seed: int = 0,
    workers: int = 1,
    sweep_splits: bool = False,
    stats: AttackStats | None = None,
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP,
    digest: str = "md5",
    on_round: Callable[[dict], None] | None = None,
) -> Message:
    """Attack with some bit positions already known.

    Windows are drawn from the unknown positions only; the known 1-bits are
    divided out of ``c`` first and written back into the result.
    """
    if not known:
        return attack(pk, c, weight, b=b, q=q, iterations=iterations, seed=seed, workers=workers,
                      sweep_splits=sweep_splits, stats=stats, memory_cap_bytes=memory_cap_bytes, digest=digest,
                      on_round=on_round)
    n = pk.n
    for i, bit in known.items():
        if not 0 <= i <= n or bit not in (0, 1):
            raise InconsistentKnownBits(f"bad known bit {i}:{bit}")
    known_ones = [i for i, bit in known.items() if bit]
    residual = weight - len(known_ones)
    free = [i for i in range(n + 1) if i not in known]
    if residual < 0 or residual > len(free):
        raise InconsistentKnownBits(f"known bits leave an impossible residual weight {residual}")
    target = c
    for i in known_ones:
        target = target * mod_inv(pk.u[i], pk.p) % pk.p

    if residual == 0 or not free:
        ones = []
        if target != 1:
            raise InconsistentKnownBits("known bits do not reproduce the ciphertext")
    else:
        ones = _search(pk, target, residual, free, b=b, q=q, iterations=iterations, seed=seed,
                       workers=workers, sweep_splits=sweep_splits, stats=stats,
                       memory_cap_bytes=memory_cap_bytes, digest=digest, on_round=on_round)
    m = _bits_to_message(pk, sorted(known_ones + ones))
    if encrypt(pk, m) != c:
        raise InconsistentKnownBits("recovered message does not re-encrypt to c")
    return m
