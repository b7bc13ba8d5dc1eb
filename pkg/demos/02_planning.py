"""Planning numbers: memory per round, success probability and digest length."""
import math

import numpy as np

from subsetprod.planner import (
    GIB,
    choose_q,
    increase_ratio,
    memory_estimate,
    optimal_split,
    success_probability,
)

# memory for b=50, Q=12 over the range 2..10**7 as ell grows
n = 10**7 - 2
for bits_label, bits in (("log2(1e7)", math.log2(10**7)), ("ceil", math.ceil(math.log2(10**7)))):
    row = []
    for ell in range(9, 22, 2):
        h1, _ = optimal_split(ell)
        row.append(memory_estimate(n, 50, h1, 12, bits) / 8 / GIB)
    print(f"B = {bits_label:10s}", np.array2string(np.array(row), precision=4))

# with two windows covering the pool the split count is hypergeometric
b = 10
probs = [float(success_probability(2 * b - 1, b, h1, 6 - h1)) for h1 in range(7)]
print("\nP(split h1, 6-h1) over 20 indices:", np.round(probs, 4), "sum", round(sum(probs), 12))

# growing the window pays off more than growing the weight
h = np.arange(2, 31)
ratio = np.array([increase_ratio(23000, 35, int(x)) for x in h])
print("\nlog ratio wider/heavier at n=23000, b=35:")
print(np.round(ratio, 2))

# digest length for the stored and probed sets
for b, ell in ((42, 8), (116, 13), (50, 21)):
    h1, h2 = optimal_split(ell)
    s = math.comb(b, h1) + math.comb(b, h2)
    print(f"b={b:3d} ell={ell:2d}  S={s:.3e}  Q={choose_q(s)}")
