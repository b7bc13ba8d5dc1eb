"""Birthday attacks on the modular subset product problem, with planning
formulas, Carmichael number generation and Naccache-Stern knapsack tools."""

from .carmichael import (
    CarmichaelCertificate,
    CarmichaelSearchConfig,
    build_prime_pool,
    carmichael_certificate,
    generate_carmichael,
    is_carmichael,
    scan_carmichael,
)
from .modmath import NotInvertible, gen_safe_prime, is_prime, mod_inv, mod_pow
from .mspp import (
    AttackFailed,
    AttackParams,
    AttackStats,
    IntegerRange,
    MsppInstance,
    NoSolution,
    SubsetSolution,
    ba_mspp,
    solve_exhaustive,
)
from .nsk import Message, NskPublicKey, NskSecretKey, attack, attack_known_bits, decrypt, encrypt, keygen
from .planner import InvalidParams, PlanReport, choose_q, memory_estimate, plan, success_probability

__version__ = "0.1.0"
