"""Carmichael numbers from subsets of an Erdos prime pool."""
import time

from subsetprod.carmichael import (
    CarmichaelSearchConfig,
    build_prime_pool,
    estimate_pool_size,
    generate_carmichael,
    scan_carmichael,
)

print("up to 75361:", scan_carmichael(75361))

lam, pool = build_prime_pool((3, 1, 1))
print("\nLambda =", lam, "pool =", list(pool))
cfg = CarmichaelSearchConfig(H=(3, 1, 1), ell=4, b=3, seed=0)
cert = generate_carmichael(cfg, "one", sweep_splits=True)
print(cert.render())

# a larger Lambda: keep most of the pool and drop a few primes
H = (5, 3, 2, 1, 1, 1, 1)
cfg = CarmichaelSearchConfig(H=H, ell=6, b=40, iterations=2000, seed=7)
print("Lambda =", cfg.lam, "pool size", len(cfg.pool), "estimate", round(estimate_pool_size(H)))
print("exponent rows stored in", cfg.pool.storage_bits(), "bits")
t0 = time.perf_counter()
cert = generate_carmichael(cfg, "B")
print(f"{len(cert.prime_factors)} prime factors, {len(str(cert.N))} digits, {time.perf_counter() - t0:.2f} s")
print("korselt:", cert.korselt, "squarefree:", cert.squarefree)
