"""Modular subset product problem: instances and the two birthday solvers.

``solve_exhaustive`` splits the index set once and tabulates every half
product. ``ba_mspp`` is the memory-lean variant: each round samples two
disjoint windows of ``b`` indices, stores truncated digests of all weight-h1
products over the first window and streams weight-h2 quotients over the
second window against them.
"""

from __future__ import annotations

import hashlib
import logging
import math
import multiprocessing as mp
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .modmath import NotInvertible, make_rng
from .planner import InvalidParams, optimal_split

log = logging.getLogger(__name__)

__all__ = [
    "MsppError",
    "NoSolution",
    "AttackFailed",
    "BudgetExceeded",
    "InvalidParams",
    "NiceSet",
    "IntegerRange",
    "MsppInstance",
    "SubsetSolution",
    "AttackParams",
    "AttackStats",
    "HalfSet",
    "DEFAULT_MEMORY_CAP",
    "truncated_digest",
    "sample_disjoint_windows",
    "enumerate_fixed_weight",
    "rank_fixed_weight",
    "unrank_fixed_weight",
    "solve_exhaustive",
    "ba_mspp",
]

DEFAULT_MEMORY_CAP = 2 * 1024**3
PROGRESS_EVERY = 1 << 22
DIGESTS = ("md5", "blake2b")


class MsppError(Exception):
    pass


class NoSolution(MsppError):
    """The exhaustive solver proved there is no subset with the target product."""


class AttackFailed(MsppError):
    """All rounds of the randomized attack missed. Not a proof of unsolvability."""

    def __init__(self, rounds: int):
        self.rounds = rounds
        super().__init__(f"no solution found after {rounds} rounds")


class BudgetExceeded(MsppError):
    pass


# ---------------------------------------------------------------------------
# pools


class NiceSet(Sequence):
    """A pool whose i-th element is computed on demand instead of stored."""

    kind: str = "nice"

    def describe(self) -> str:
        raise NotImplementedError


class IntegerRange(NiceSet):
    """The consecutive integers ``lo, lo+1, ..., hi`` (inclusive)."""

    kind = "range"

    def __init__(self, lo: int, hi: int):
        if hi < lo:
            raise ValueError("empty range")
        self.lo = lo
        self.hi = hi

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return self.lo + i

    def __iter__(self):
        return iter(range(self.lo, self.hi + 1))

    def describe(self) -> str:
        return f"{self.lo}..{self.hi}"

    def __repr__(self):
        return f"IntegerRange({self.lo}, {self.hi})"


def _pool_coprime(pool: Sequence[int], modulus: int) -> None:
    if isinstance(pool, IntegerRange) and pool.hi < modulus and pool.lo >= 1:
        from .modmath import is_prime

        if is_prime(modulus):
            return
    gcd = math.gcd
    for i, u in enumerate(pool):
        if gcd(u, modulus) != 1:
            raise NotInvertible(u, modulus)


@dataclass
class MsppInstance:
    """Find a subset of ``pool`` whose product is ``target`` mod ``modulus``."""

    modulus: int
    target: int
    pool: Sequence[int]
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.modulus < 2:
            raise InvalidParams("modulus must be >= 2")
        self.target %= self.modulus
        if self.validate:
            if math.gcd(self.target, self.modulus) != 1:
                raise NotInvertible(self.target, self.modulus)
            _pool_coprime(self.pool, self.modulus)

    @property
    def n(self) -> int:
        """Largest pool index (the pool is u_0..u_n)."""
        return len(self.pool) - 1

    def density(self, factorization: Sequence[tuple[int, int]]) -> float:
        """|pool| / log2(phi(modulus)), given the modulus' factorization."""
        phi = 1
        check = 1
        for p, e in factorization:
            phi *= (p - 1) * p ** (e - 1)
            check *= p**e
        if check != self.modulus:
            raise ValueError("factorization does not multiply to the modulus")
        return len(self.pool) / math.log2(phi) if phi > 1 else math.inf

    def product(self, indices) -> int:
        acc = 1
        for i in indices:
            acc = acc * self.pool[i] % self.modulus
        return acc


@dataclass(frozen=True)
class SubsetSolution:
    indices: tuple[int, ...]
    elements: tuple[int, ...]
    certificate: int
    rounds_used: int | None = None

    @classmethod
    def verified(cls, instance: MsppInstance, indices, rounds_used: int | None = None) -> "SubsetSolution":
        idx = tuple(sorted(set(indices)))
        if len(idx) != len(list(indices)):
            raise ValueError("repeated index in candidate solution")
        cert = instance.product(idx)
        if cert != instance.target:
            raise ValueError(f"candidate product {cert} != target {instance.target}")
        return cls(idx, tuple(instance.pool[i] for i in idx), cert, rounds_used)

    @property
    def weight(self) -> int:
        return len(self.indices)


# ---------------------------------------------------------------------------
# fixed-weight patterns (colex order == increasing integer order)


def enumerate_fixed_weight(b: int, h: int, start: int = 0, stop: int | None = None) -> Iterator[int]:
    """Yield b-bit masks of popcount ``h`` with colex rank in ``[start, stop)``.

    Bit ``j`` of a mask selects position ``j`` of the window.
    """
    if not 0 <= h <= b:
        raise InvalidParams(f"need 0 <= h <= b, got h={h}, b={b}")
    total = math.comb(b, h)
    stop = total if stop is None else min(stop, total)
    if start >= stop:
        return
    if h == 0:
        yield 0
        return
    m = unrank_fixed_weight(start, b, h)
    for _ in range(stop - start):
        yield m
        # Gosper's hack: next integer with the same popcount
        c = m & -m
        r = m + c
        m = (((r ^ m) >> 2) // c) | r


def rank_fixed_weight(mask: int) -> int:
    rank = 0
    i = 1
    while mask:
        low = mask & -mask
        rank += math.comb(low.bit_length() - 1, i)
        mask ^= low
        i += 1
    return rank


def unrank_fixed_weight(rank: int, b: int, h: int) -> int:
    if not 0 <= rank < math.comb(b, h):
        raise IndexError(rank)
    mask = 0
    top = b
    for i in range(h, 0, -1):
        c = top - 1
        while math.comb(c, i) > rank:
            c -= 1
        mask |= 1 << c
        rank -= math.comb(c, i)
        top = c
    return mask


# ---------------------------------------------------------------------------
# digests and windows


def _digest_bytes(x: int, digest: str) -> bytes:
    data = str(x).encode("ascii")
    if digest == "md5":
        return hashlib.md5(data).digest()
    if digest == "blake2b":
        return hashlib.blake2b(data, digest_size=16).digest()
    raise InvalidParams(f"unknown digest {digest!r}; choose from {DIGESTS}")


def truncated_digest(x: int, q: int, digest: str = "md5") -> int:
    """First ``4q`` bits of the 128-bit digest of ``x``'s decimal encoding."""
    if not 1 <= q <= 32:
        raise InvalidParams("q must be in [1, 32]")
    return int.from_bytes(_digest_bytes(x, digest), "big") >> (128 - 4 * q)


def _digest_fn(q: int, digest: str) -> Callable[[int], int]:
    shift = 128 - 4 * q
    from_bytes = int.from_bytes
    if digest == "md5":
        md5 = hashlib.md5
        return lambda x: from_bytes(md5(str(x).encode()).digest(), "big") >> shift
    if digest == "blake2b":
        b2 = hashlib.blake2b
        return lambda x: from_bytes(b2(str(x).encode(), digest_size=16).digest(), "big") >> shift
    raise InvalidParams(f"unknown digest {digest!r}; choose from {DIGESTS}")


def window_sizes(pool_size: int, b: int) -> tuple[int, int]:
    """Sizes of (I1, I2). A full partition of an odd pool gives I1 the extra index."""
    if 2 * b <= pool_size:
        return b, b
    if b == (pool_size + 1) // 2:
        return b, pool_size - b
    raise InvalidParams(f"b={b} too large for a pool of {pool_size}")


def sample_disjoint_windows(n: int, b: int, rng) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Draw disjoint index windows from ``{0..n}``.

    Small windows (2b < sqrt(n)) use rejection sampling and never touch the
    whole index set; otherwise a shuffled prefix is taken.
    """
    size = n + 1
    b1, b2 = window_sizes(size, b)
    need = b1 + b2
    if need * need < n:
        chosen: list[int] = []
        seen: set[int] = set()
        while len(chosen) < need:
            for x in rng.integers(0, size, size=need - len(chosen)):
                x = int(x)
                if x not in seen:
                    seen.add(x)
                    chosen.append(x)
                    if len(chosen) == need:
                        break
    else:
        chosen = [int(x) for x in rng.permutation(size)[:need]]
    return tuple(sorted(chosen[:b1])), tuple(sorted(chosen[b1:]))


# ---------------------------------------------------------------------------
# parameters, stats, half set


@dataclass
class AttackParams:
    b: int
    ell: int
    h1: int | None = None
    h2: int | None = None
    q: int = 12
    iterations: int = 100
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.ell < 0:
            raise InvalidParams("ell must be >= 0")
        if self.h1 is None and self.h2 is None:
            self.h1, self.h2 = optimal_split(self.ell)
        elif self.h1 is None:
            self.h1 = self.ell - self.h2
        elif self.h2 is None:
            self.h2 = self.ell - self.h1
        if self.h1 < 0 or self.h2 < 0 or self.h1 + self.h2 != self.ell:
            raise InvalidParams(f"need h1 + h2 = ell with h1, h2 >= 0; got {self.h1}+{self.h2} vs {self.ell}")
        if not 1 <= self.q <= 32:
            raise InvalidParams("q must be in [1, 32]")
        if self.iterations < 1:
            raise InvalidParams("iterations must be >= 1")
        if self.workers < 1:
            raise InvalidParams("workers must be >= 1")
        if self.b < 0:
            raise InvalidParams("b must be >= 0")

    def check_pool(self, pool_size: int) -> tuple[int, int]:
        b1, b2 = window_sizes(pool_size, self.b)
        if self.h1 > b1 or self.h2 > b2:
            raise InvalidParams(f"split ({self.h1},{self.h2}) does not fit windows of size ({b1},{b2})")
        return b1, b2


@dataclass
class AttackStats:
    rounds: int = 0
    multiplications: int = 0
    verify_multiplications: int = 0
    inversions: int = 0
    probes: int = 0
    stored: int = 0
    digest_matches: int = 0
    false_matches: int = 0
    verified: int = 0
    chunks: int = 0


class HalfSet:
    """Truncated digest -> list of stored window masks."""

    __slots__ = ("entries", "count")

    def __init__(self):
        self.entries: dict[int, object] = {}
        self.count = 0

    def add(self, key: int, mask: int) -> None:
        cur = self.entries.get(key)
        if cur is None:
            self.entries[key] = mask
        elif isinstance(cur, list):
            cur.append(mask)
        else:
            self.entries[key] = [cur, mask]
        self.count += 1

    def merge(self, other: "HalfSet") -> None:
        for key, val in other.entries.items():
            for mask in val if isinstance(val, list) else (val,):
                self.add(key, mask)

    def get(self, key: int) -> list[int]:
        cur = self.entries.get(key)
        if cur is None:
            return []
        return cur if isinstance(cur, list) else [cur]

    def __len__(self) -> int:
        return self.count

    @staticmethod
    def memory_bits(q: int, b: int, entries: int) -> int:
        return (4 * q + b) * entries


# ---------------------------------------------------------------------------
# round kernels (module level so forked workers can run them)


def _masked_product(vals, mask: int, start: int, modulus: int) -> int:
    x = start
    while mask:
        low = mask & -mask
        x = x * vals[low.bit_length() - 1] % modulus
        mask ^= low
    return x


def _build(vals1, h1, modulus, q, digest, lo, hi) -> HalfSet:
    hs = HalfSet()
    key = _digest_fn(q, digest)
    b1 = len(vals1)
    for mask in enumerate_fixed_weight(b1, h1, lo, hi):
        hs.add(key(_masked_product(vals1, mask, 1, modulus)), mask)
    return hs


def _probe(vals1, inv2, target, h2, modulus, q, digest, halfset, lo, hi, collect_all, best=None):
    """Scan weight-h2 quotients with colex rank in [lo, hi).

    Returns (verified matches as (rank, mask1, mask2), probes, digest matches).
    ``best`` is a shared rank; a worker stops once it is past a verified hit.
    """
    key = _digest_fn(q, digest)
    found = []
    probes = 0
    dmatch = 0
    b2 = len(inv2)
    rank = lo
    for mask2 in enumerate_fixed_weight(b2, h2, lo, hi):
        if best is not None and not collect_all and (probes & 0x3FF) == 0 and best.value < rank:
            break
        y = _masked_product(inv2, mask2, target, modulus)
        probes += 1
        cands = halfset.get(key(y))
        if cands:
            for mask1 in cands:
                dmatch += 1
                if _masked_product(vals1, mask1, 1, modulus) == y:
                    found.append((rank, mask1, mask2))
                    if not collect_all:
                        break
            if found and not collect_all:
                if best is not None:
                    with best.get_lock():
                        if rank < best.value:
                            best.value = rank
                break
        rank += 1
    return found, probes, dmatch


_SHARED: dict = {}


def _build_task(bounds):
    s = _SHARED
    return _build(s["vals1"], s["h1"], s["modulus"], s["q"], s["digest"], *bounds)


def _probe_task(bounds):
    s = _SHARED
    return _probe(
        s["vals1"], s["inv2"], s["target"], s["h2"], s["modulus"], s["q"], s["digest"],
        s["halfset"], bounds[0], bounds[1], s["collect_all"], s["best"],
    )


def _split_range(lo: int, hi: int, parts: int) -> list[tuple[int, int]]:
    step, extra = divmod(hi - lo, parts)
    out = []
    for k in range(parts):
        nxt = lo + step + (1 if k < extra else 0)
        if nxt > lo:
            out.append((lo, nxt))
        lo = nxt
    return out


def _run_split(vals1, inv2, target, modulus, h1, h2, q, digest, cap_bytes, workers, collect_all, stats):
    """One (h1, h2) collision search over fixed windows, with chunking."""
    b1, b2 = len(vals1), len(inv2)
    stored_total = math.comb(b1, h1)
    probe_total = math.comb(b2, h2)
    need_bits = HalfSet.memory_bits(q, b1, stored_total)
    cap_bits = cap_bytes * 8
    chunks = max(1, math.ceil(need_bits / cap_bits))
    if chunks > stored_total:
        raise BudgetExceeded(f"a single half-set entry ({4 * q + b1} bits) exceeds the memory cap")
    if chunks > 1:
        log.info("half set needs %d bits; splitting into %d chunks", need_bits, chunks)
    found = []
    for lo, hi in _split_range(0, stored_total, chunks):
        stats.chunks += 1
        if workers > 1:
            ctx = mp.get_context("fork")
            _SHARED.update(vals1=vals1, h1=h1, modulus=modulus, q=q, digest=digest)
            with ctx.Pool(workers) as pool:
                shards = pool.map(_build_task, _split_range(lo, hi, workers))
            halfset = shards[0]
            for sh in shards[1:]:
                halfset.merge(sh)
        else:
            halfset = _build(vals1, h1, modulus, q, digest, lo, hi)
        stats.multiplications += h1 * (hi - lo)
        stats.stored += len(halfset)

        if workers > 1:
            best = ctx.Value("q", probe_total)
            _SHARED.update(inv2=inv2, target=target, h2=h2, halfset=halfset, collect_all=collect_all, best=best)
            with ctx.Pool(workers) as pool:
                parts = pool.map(_probe_task, _split_range(0, probe_total, workers))
            _SHARED.clear()
            chunk_found = []
            for f, p, d in parts:
                chunk_found.extend(f)
                stats.probes += p
                stats.digest_matches += d
                stats.multiplications += h2 * p
            chunk_found.sort()
            if chunk_found and not collect_all:
                chunk_found = chunk_found[:1]
        else:
            chunk_found, p, d = _probe(vals1, inv2, target, h2, modulus, q, digest, halfset, 0, probe_total, collect_all)
            stats.probes += p
            stats.digest_matches += d
            stats.multiplications += h2 * p
        del halfset
        found.extend(chunk_found)
        if found and not collect_all:
            break
    return found


# ---------------------------------------------------------------------------
# solvers


def solve_exhaustive(instance: MsppInstance, memory_cap_bytes: int = DEFAULT_MEMORY_CAP) -> SubsetSolution:
    """Tabulate all products over indices ``0..ceil(n/2)`` and scan the rest.

    Complete: raises :class:`NoSolution` only when no subset works.
    """
    n = instance.n
    m = instance.modulus
    if n < 0:
        if instance.target == 1 % m:
            return SubsetSolution.verified(instance, ())
        raise NoSolution("empty pool and target != 1")
    alpha = min(n, -(-n // 2))
    left = list(range(alpha + 1))
    right = list(range(alpha + 1, n + 1))
    entry_bytes = 2 * (m.bit_length() // 8 + 1) + 64
    if (1 << len(left)) * entry_bytes > memory_cap_bytes:
        raise BudgetExceeded(f"2^{len(left)} half products exceed the {memory_cap_bytes}-byte cap")

    prods = [1 % m]
    for i in left:
        u = instance.pool[i] % m
        prods += [x * u % m for x in prods]
    table: dict[int, int] = {}
    for mask, x in enumerate(prods):
        table.setdefault(x, mask)
    del prods

    quot = [instance.target]
    for i in right:
        v = pow(instance.pool[i], -1, m)
        quot += [x * v % m for x in quot]
    for mask2, y in enumerate(quot):
        mask1 = table.get(y)
        if mask1 is not None:
            idx = [left[j] for j in range(len(left)) if mask1 >> j & 1]
            idx += [right[j] for j in range(len(right)) if mask2 >> j & 1]
            return SubsetSolution.verified(instance, idx)
    raise NoSolution("no subset of the pool has the target product")


def ba_mspp(
    instance: MsppInstance,
    params: AttackParams,
    *,
    sweep_splits: bool = False,
    collect_all: bool = False,
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP,
    digest: str = "md5",
    stats: AttackStats | None = None,
    on_round: Callable[[dict], None] | None = None,
):
    """Randomized, memory-efficient birthday attack.

    Returns the first verified :class:`SubsetSolution` (lowest probe rank in
    the first successful round), or with ``collect_all`` the list of every
    verified solution found in that round. Raises :class:`AttackFailed` after
    ``params.iterations`` empty rounds.
    """
    if digest not in DIGESTS:
        raise InvalidParams(f"unknown digest {digest!r}")
    m = instance.modulus
    size = len(instance.pool)
    if params.ell == 0:
        if instance.target != 1 % m:
            raise InvalidParams("ell = 0 only makes sense for target 1")
        return [SubsetSolution.verified(instance, (), 1)] if collect_all else SubsetSolution.verified(instance, (), 1)
    params.check_pool(size)
    if stats is None:
        stats = AttackStats()
    if sweep_splits:
        splits = [(x, params.ell - x) for x in range(params.ell + 1)]
    else:
        splits = [(params.h1, params.h2)]

    next_report = PROGRESS_EVERY
    for rnd in range(params.iterations):
        t0 = time.perf_counter()
        before = (stats.probes, stats.digest_matches, stats.stored)
        rng = make_rng(params.seed, rnd)
        I1, I2 = sample_disjoint_windows(instance.n, params.b, rng)
        vals1 = [instance.pool[i] % m for i in I1]
        inv2 = []
        for i in I2:
            try:
                inv2.append(pow(instance.pool[i], -1, m))
            except ValueError:
                raise NotInvertible(instance.pool[i], m) from None
        stats.inversions += len(I2)
        stats.rounds += 1

        solutions: list[SubsetSolution] = []
        for x, y in splits:
            if x > len(I1) or y > len(I2):
                continue
            hits = _run_split(vals1, inv2, instance.target, m, x, y, params.q, digest, memory_cap_bytes,
                              params.workers, collect_all, stats)
            for _, mask1, mask2 in hits:
                idx = [I1[j] for j in range(len(I1)) if mask1 >> j & 1]
                idx += [I2[j] for j in range(len(I2)) if mask2 >> j & 1]
                stats.verify_multiplications += len(idx)
                sol = SubsetSolution.verified(instance, idx, rnd + 1)
                if sol.indices not in {s.indices for s in solutions}:
                    solutions.append(sol)
            if solutions and not collect_all:
                break
        stats.verified += len(solutions)
        stats.false_matches = stats.digest_matches - stats.verified

        if stats.probes >= next_report:
            log.info("round %d: %d probes, %d digest matches", rnd + 1, stats.probes, stats.digest_matches)
            next_report = (stats.probes // PROGRESS_EVERY + 1) * PROGRESS_EVERY
        if on_round is not None:
            on_round({
                "round": rnd + 1,
                "seed": params.seed,
                "stream": rnd,
                "I1": list(I1),
                "I2": list(I2),
                "halfset_size": stats.stored - before[2],
                "probes": stats.probes - before[0],
                "matches": stats.digest_matches - before[1],
                "verified": len(solutions),
                "wall_time": time.perf_counter() - t0,
                "peak_memory_bytes": min(
                    HalfSet.memory_bits(params.q, len(I1), math.comb(len(I1), params.h1)) // 8, memory_cap_bytes
                ),
            })
        if solutions:
            return solutions if collect_all else solutions[0]
    raise AttackFailed(params.iterations)
