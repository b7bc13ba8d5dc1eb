"""Naccache-Stern knapsack: key, encryption and the low-weight message attack."""
import random
import time

from subsetprod.nsk import attack, attack_known_bits, decrypt, encrypt, keygen
from subsetprod.planner import choose_q

t0 = time.perf_counter()
pk, sk = keygen(600, seed=3)
print(f"600-bit safe prime in {time.perf_counter() - t0:.1f} s, n = {pk.n}")

rnd = random.Random(1)
for weight in (4, 5, 6):
    ones = sorted(rnd.sample(range(pk.n + 1), weight))
    m = sum(1 << i for i in ones)
    c = encrypt(pk, m)
    assert int(decrypt(pk, sk, c)) == m
    t0 = time.perf_counter()
    got = attack(pk, c, weight, b=pk.n // 2, seed=weight)
    print(f"weight {weight}: bits {ones} recovered={int(got) == m} in {time.perf_counter() - t0:.2f} s")

# messages with almost every bit set map to low weight
m = (1 << (pk.n + 1)) - 1 - (1 << 7) - (1 << 40)
got = attack(pk, encrypt(pk, m), bin(m).count("1"), seed=0)
print("weight", bin(m).count("1"), "recovered:", int(got) == m)

# leaked bits shrink the search
ones = sorted(rnd.sample(range(pk.n + 1), 7))
m = sum(1 << i for i in ones)
known = {ones[0]: 1, ones[1]: 1, ones[2]: 1}
got = attack_known_bits(pk, encrypt(pk, m), 7, known, seed=0)
print("weight 7 with three leaked ones:", int(got) == m)
print("Q for b=42, ell=8:", choose_q(2 * 111930))
