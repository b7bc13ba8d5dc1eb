import hashlib
import math
import random
from itertools import combinations

import pytest
from hypothesis import assume, given, settings, strategies as st

from subsetprod.modmath import NotInvertible, is_prime, make_rng
from subsetprod.mspp import (
    AttackFailed,
    AttackParams,
    AttackStats,
    BudgetExceeded,
    HalfSet,
    IntegerRange,
    InvalidParams,
    MsppInstance,
    NoSolution,
    SubsetSolution,
    ba_mspp,
    enumerate_fixed_weight,
    rank_fixed_weight,
    sample_disjoint_windows,
    solve_exhaustive,
    truncated_digest,
    unrank_fixed_weight,
    window_sizes,
)


def brute_force(inst):
    """All index sets with the target product (oracle)."""
    out = []
    size = len(inst.pool)
    for k in range(size + 1):
        for idx in combinations(range(size), k):
            if inst.product(idx) == inst.target:
                out.append(idx)
    return out


def planted(size, ell, bits=61, seed=0):
    """Pool of random units mod a large prime with one weight-ell subset hitting the target."""
    rnd = random.Random(seed)
    p = (1 << bits) - 1  # Mersenne prime, collisions are negligible
    pool = [rnd.randrange(2, p) for _ in range(size)]
    secret = tuple(sorted(rnd.sample(range(size), ell)))
    target = math.prod(pool[i] for i in secret) % p
    return MsppInstance(p, target, pool), secret


# ---------------------------------------------------------------------------
# fixed-weight enumeration


@pytest.mark.parametrize("b,h", [(0, 0), (1, 0), (1, 1), (5, 2), (8, 4), (10, 10), (12, 3)])
def test_enumeration_is_all_masks_in_increasing_order(b, h):
    masks = list(enumerate_fixed_weight(b, h))
    oracle = sorted(sum(1 << i for i in c) for c in combinations(range(b), h))
    assert masks == oracle
    assert len(masks) == math.comb(b, h)


def test_enumeration_rejects_weight_above_width():
    with pytest.raises(InvalidParams):
        list(enumerate_fixed_weight(3, 4))


@given(st.integers(1, 40), st.data())
def test_rank_unrank_roundtrip(b, data):
    h = data.draw(st.integers(0, b))
    r = data.draw(st.integers(0, math.comb(b, h) - 1))
    mask = unrank_fixed_weight(r, b, h)
    assert bin(mask).count("1") == h and mask < (1 << b)
    assert rank_fixed_weight(mask) == r


@given(st.integers(2, 14), st.data())
def test_enumeration_slices_concatenate(b, data):
    h = data.draw(st.integers(0, b))
    total = math.comb(b, h)
    cut = data.draw(st.integers(0, total))
    whole = list(enumerate_fixed_weight(b, h))
    assert list(enumerate_fixed_weight(b, h, 0, cut)) + list(enumerate_fixed_weight(b, h, cut)) == whole
    for r, m in enumerate(whole):
        assert rank_fixed_weight(m) == r


# ---------------------------------------------------------------------------
# digests, windows, half set


@given(st.integers(0, 10**60), st.integers(1, 32))
def test_truncated_digest_is_hex_prefix(x, q):
    assert truncated_digest(x, q) == int(hashlib.md5(str(x).encode()).hexdigest()[:q], 16)
    assert truncated_digest(x, q, "blake2b") == int(
        hashlib.blake2b(str(x).encode(), digest_size=16).hexdigest()[:q], 16
    )


def test_window_sizes():
    assert window_sizes(20, 10) == (10, 10)
    assert window_sizes(21, 10) == (10, 10)
    assert window_sizes(21, 11) == (11, 10)
    assert window_sizes(6, 3) == (3, 3)
    with pytest.raises(InvalidParams):
        window_sizes(20, 11)


@given(st.integers(1, 2000), st.data(), st.integers(0, 2**32))
@settings(max_examples=80)
def test_windows_disjoint_sorted_in_range(size, data, seed):
    b = data.draw(st.integers(0, (size + 1) // 2))
    b1, b2 = window_sizes(size, b)
    I1, I2 = sample_disjoint_windows(size - 1, b, make_rng(seed))
    assert (len(I1), len(I2)) == (b1, b2)
    assert list(I1) == sorted(I1) and list(I2) == sorted(I2)
    assert not set(I1) & set(I2)
    assert all(0 <= i < size for i in I1 + I2)


def test_windows_sparse_sampling_on_huge_pool():
    I1, I2 = sample_disjoint_windows(10**7 - 2, 12, make_rng(1, 0))
    assert len(set(I1 + I2)) == 24


def test_halfset_multicollisions_and_merge():
    a, b = HalfSet(), HalfSet()
    a.add(7, 0b11)
    a.add(7, 0b101)
    b.add(7, 0b110)
    b.add(9, 0b1001)
    a.merge(b)
    assert a.get(7) == [0b11, 0b101, 0b110]
    assert a.get(9) == [0b1001]
    assert a.get(1) == []
    assert len(a) == 4
    assert HalfSet.memory_bits(12, 50, 10) == (48 + 50) * 10


# ---------------------------------------------------------------------------
# instances


def test_instance_reduces_target_and_checks_units():
    inst = MsppInstance(11, 25, [2, 3, 4])
    assert inst.target == 3 and inst.n == 2
    with pytest.raises(NotInvertible):
        MsppInstance(12, 5, [5, 6, 7])
    with pytest.raises(NotInvertible):
        MsppInstance(12, 4, [5, 7])


def test_integer_range_pool():
    r = IntegerRange(2, 10)
    assert len(r) == 9 and r[0] == 2 and r[-1] == 10 and list(r)[3] == 5
    with pytest.raises(IndexError):
        r[9]
    inst = MsppInstance(10000019, 190238, IntegerRange(2, 10**7))
    assert inst.n == 10**7 - 2


def test_density():
    inst = MsppInstance(17, 3, list(range(1, 9)))
    assert inst.density([(17, 1)]) == pytest.approx(8 / 4)
    with pytest.raises(ValueError):
        inst.density([(13, 1)])


def test_verified_solution_rejects_wrong_subset():
    inst = MsppInstance(11, 6, [2, 3, 5])
    sol = SubsetSolution.verified(inst, [1, 0])
    assert sol.indices == (0, 1) and sol.elements == (2, 3) and sol.certificate == 6 and sol.weight == 2
    with pytest.raises(ValueError):
        SubsetSolution.verified(inst, [2])
    with pytest.raises(ValueError):
        SubsetSolution.verified(inst, [0, 0, 1])


# ---------------------------------------------------------------------------
# exhaustive solver


@given(
    st.sampled_from([7, 11, 13, 31, 101, 221, 256, 1009]),
    st.lists(st.integers(1, 5000), min_size=0, max_size=10),
    st.integers(1, 5000),
)
@settings(max_examples=150)
def test_exhaustive_agrees_with_brute_force(m, pool, target):
    assume(math.gcd(target, m) == 1 and all(math.gcd(u, m) == 1 for u in pool))
    inst = MsppInstance(m, target, pool)
    oracle = brute_force(inst)
    if oracle:
        sol = solve_exhaustive(inst)
        assert sol.indices in oracle
    else:
        with pytest.raises(NoSolution):
            solve_exhaustive(inst)


def test_exhaustive_budget():
    inst = MsppInstance(1009, 5, list(range(2, 40)))
    with pytest.raises(BudgetExceeded):
        solve_exhaustive(inst, memory_cap_bytes=1000)


# ---------------------------------------------------------------------------
# randomized attack


def test_attack_recovers_planted_subset():
    inst, secret = planted(24, 6, seed=3)
    sol = ba_mspp(inst, AttackParams(b=12, ell=6, iterations=50, seed=1))
    assert sol.indices == secret
    assert inst.product(sol.indices) == inst.target
    assert sol.rounds_used >= 1


def test_attack_recovers_with_partial_windows():
    inst, secret = planted(40, 4, seed=5)
    sol = ba_mspp(inst, AttackParams(b=10, ell=4, iterations=2000, seed=2))
    assert sol.indices == secret and sol.rounds_used >= 1


def test_attack_is_deterministic_for_a_seed():
    inst, _ = planted(40, 4, seed=6)
    a = ba_mspp(inst, AttackParams(b=10, ell=4, iterations=2000, seed=9))
    b = ba_mspp(inst, AttackParams(b=10, ell=4, iterations=2000, seed=9))
    assert a == b


def test_workers_do_not_change_the_answer():
    inst, _ = planted(40, 4, seed=7)
    s1, s2 = AttackStats(), AttackStats()
    a = ba_mspp(inst, AttackParams(b=10, ell=4, iterations=2000, seed=4, workers=1), stats=s1)
    b = ba_mspp(inst, AttackParams(b=10, ell=4, iterations=2000, seed=4, workers=2), stats=s2)
    assert a == b
    assert s1.rounds == s2.rounds


def test_chunking_under_a_small_cap_gives_the_same_answer():
    inst, secret = planted(30, 6, seed=8)
    params = AttackParams(b=15, ell=6, iterations=500, seed=3)
    full, chunked = AttackStats(), AttackStats()
    a = ba_mspp(inst, params, stats=full)
    entry_bits = 4 * params.q + 15
    cap = entry_bits * 100 // 8  # about 100 entries per chunk, C(15,3) = 455 stored
    b = ba_mspp(inst, params, stats=chunked, memory_cap_bytes=cap)
    assert a == b and a.indices == secret
    assert chunked.chunks > full.chunks


def test_chunking_with_workers():
    inst, secret = planted(30, 6, seed=8)
    params = AttackParams(b=15, ell=6, iterations=500, seed=3, workers=2)
    sol = ba_mspp(inst, params, memory_cap_bytes=(4 * 12 + 15) * 100 // 8)
    assert sol.indices == secret


def test_budget_exceeded_when_one_entry_does_not_fit():
    inst, _ = planted(30, 6, seed=8)
    with pytest.raises(BudgetExceeded):
        ba_mspp(inst, AttackParams(b=15, ell=6, iterations=5, seed=3), memory_cap_bytes=1)


def test_short_digests_produce_false_matches_that_are_rejected():
    inst, secret = planted(30, 6, seed=10)
    stats = AttackStats()
    sol = ba_mspp(inst, AttackParams(b=15, ell=6, q=1, iterations=500, seed=2), stats=stats)
    assert sol.indices == secret
    assert stats.false_matches > 0
    assert stats.digest_matches == stats.false_matches + stats.verified


def test_multiplication_counter_matches_enumeration_sizes():
    inst, _ = planted(60, 6, seed=11)
    stats = AttackStats()
    with pytest.raises(AttackFailed):
        ba_mspp(inst, AttackParams(b=9, ell=5, iterations=3, seed=0), stats=stats)
    per_round = 2 * math.comb(9, 2) + 3 * math.comb(9, 3)
    assert stats.rounds == 3
    assert stats.multiplications == 3 * per_round
    assert stats.inversions == 3 * 9


def test_attack_failed_reports_rounds():
    inst, _ = planted(60, 6, seed=12)
    with pytest.raises(AttackFailed) as err:
        ba_mspp(inst, AttackParams(b=5, ell=2, iterations=4, seed=0))
    assert err.value.rounds == 4


def test_sweep_splits_finds_unbalanced_partitions():
    # the planted set sits entirely in one half when windows cover the pool
    inst, secret = planted(12, 3, seed=13)
    found = ba_mspp(inst, AttackParams(b=6, ell=3, iterations=200, seed=0), sweep_splits=True)
    assert found.indices == secret


def test_collect_all_returns_every_solution_in_the_round():
    inst = MsppInstance(120, 1, [11, 7, 31, 13, 61, 41])
    sols = ba_mspp(inst, AttackParams(b=3, ell=4, iterations=10, seed=0), sweep_splits=True, collect_all=True)
    prods = sorted(math.prod(s.elements) for s in sols)
    assert prods == [41041, 172081, 852841]
    oracle = [idx for idx in brute_force(inst) if len(idx) == 4]
    assert sorted(s.indices for s in sols) == sorted(oracle)


def test_on_round_records():
    inst, _ = planted(40, 4, seed=14)
    records = []
    sol = ba_mspp(inst, AttackParams(b=10, ell=4, iterations=2000, seed=1), on_round=records.append)
    assert len(records) == sol.rounds_used
    last = records[-1]
    assert last["verified"] == 1 and last["halfset_size"] == math.comb(10, 2)
    assert set(last) >= {"round", "seed", "I1", "I2", "probes", "matches", "wall_time", "peak_memory_bytes"}


def test_weight_zero_and_bad_params():
    inst = MsppInstance(11, 1, [2, 3])
    assert ba_mspp(inst, AttackParams(b=1, ell=0)).indices == ()
    with pytest.raises(InvalidParams):
        ba_mspp(MsppInstance(11, 2, [2, 3]), AttackParams(b=1, ell=0))
    with pytest.raises(InvalidParams):
        AttackParams(b=3, ell=2, q=33)
    with pytest.raises(InvalidParams):
        AttackParams(b=3, ell=4, h1=1, h2=1)
    with pytest.raises(InvalidParams):
        ba_mspp(MsppInstance(11, 2, [2, 3, 4, 5]), AttackParams(b=2, ell=5))
    with pytest.raises(InvalidParams):
        ba_mspp(inst, AttackParams(b=1, ell=1), digest="sha1")


@given(st.integers(0, 2**31), st.integers(2, 6))
@settings(max_examples=25, deadline=None)
def test_attack_solutions_always_verify(seed, ell):
    inst, _ = planted(16, ell, bits=31, seed=seed)
    try:
        sols = ba_mspp(inst, AttackParams(b=8, ell=ell, q=2, iterations=30, seed=seed), collect_all=True)
    except AttackFailed:
        return
    for s in sols:
        assert inst.product(s.indices) == inst.target and s.weight == ell


def test_paper_style_range_instance_small():
    p = 10007
    assert is_prime(p)
    inst = MsppInstance(p, 1234, IntegerRange(2, 10000))
    sol = ba_mspp(inst, AttackParams(b=8, ell=4, iterations=200, seed=0))
    assert math.prod(sol.elements) % p == 1234
