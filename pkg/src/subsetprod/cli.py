"""Command-line entry point.

Exit status: 0 on success, 1 when an attack runs out of rounds or no
solution exists, 2 for usage, parse and parameter errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import secrets
import sys
import time
from io import StringIO
from pathlib import Path
from statistics import mean

from . import carmichael as cm
from . import io
from . import nsk
from .modmath import NotInvertible, make_rng
from .mspp import (
    DEFAULT_MEMORY_CAP,
    DIGESTS,
    AttackFailed,
    AttackParams,
    AttackStats,
    BudgetExceeded,
    InvalidParams,
    MsppError,
    NoSolution,
    ba_mspp,
    solve_exhaustive,
)
from .planner import plan

log = logging.getLogger("subsetprod")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
PLAN_COLUMNS = ["n", "b", "h1", "h2", "Q", "prob", "exp_iters", "mem_bits", "time_mults"]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _int_range(text: str) -> range:
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            raise ValueError
        lo_i, hi_i = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo..hi, got {text!r}") from None
    if hi_i < lo_i:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return range(lo_i, hi_i + 1)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _known_bits(text: str) -> dict[int, int]:
    out = {}
    for item in text.split(","):
        idx, sep, bit = item.partition(":")
        try:
            if not sep:
                raise ValueError
            out[int(idx)] = int(bit)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected idx:bit pairs, got {item!r}") from None
    return out


class RunLog:
    """JSON-lines log of attack rounds; a no-op without a path."""

    def __init__(self, path: str | None, command: str, seed: int):
        self.fh = open(path, "a", encoding="utf-8") if path else None
        self.command = command
        self.seed = seed

    def __call__(self, record: dict) -> None:
        if self.fh is None:
            return
        row = {"time": time.time(), "command": self.command, **record}
        self.fh.write(json.dumps(row, sort_keys=True) + "\n")
        self.fh.flush()

    def event(self, **fields) -> None:
        self({"event": True, "seed": self.seed, **fields})

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _read_ciphertext(value: str) -> int:
    text = Path(value).read_text(encoding="utf-8") if not value.strip().isdigit() else value
    try:
        return int(text.strip())
    except ValueError:
        raise io.FormatError("ciphertext must be a decimal integer") from None


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args, runlog: RunLog) -> int:
    inst = io.read_instance(args.instance)
    if args.exhaustive:
        sol = solve_exhaustive(inst, memory_cap_bytes=args.memory_cap_bytes)
        _emit(io.format_solution(sol), args.output)
        return EXIT_OK
    if args.ell is None or args.b is None:
        raise UsageError("solve needs --ell and --b (or --exhaustive)")
    params = AttackParams(b=args.b, ell=args.ell, h1=args.h1, q=args.q, iterations=args.iter,
                          seed=args.seed, workers=args.workers)
    stats = AttackStats()
    result = ba_mspp(inst, params, sweep_splits=args.sweep_splits, collect_all=args.collect_all,
                     memory_cap_bytes=args.memory_cap_bytes, digest=args.digest, stats=stats, on_round=runlog)
    sols = result if isinstance(result, list) else [result]
    log.info("solved in %d rounds (%d probes, %d false matches)", stats.rounds, stats.probes, stats.false_matches)
    if args.output:
        io.write_solution(args.output, sols[0], args.seed)
        for k, extra in enumerate(sols[1:], 1):
            io.write_solution(f"{args.output}.{k}", extra, args.seed)
    else:
        _emit("".join(io.format_solution(s, args.seed) for s in sols), None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# plan


def cmd_plan(args, runlog: RunLog) -> int:
    common = dict(q=args.q, element_bits=args.element_bits, nice=args.nice)
    if args.sweep_h or args.sweep_b:
        rows = []
        if args.sweep_h:
            if args.b is None:
                raise UsageError("--sweep-h needs --b")
            rows = [plan(args.n, args.b, ell, **common) for ell in args.sweep_h]
        else:
            if args.ell is None:
                raise UsageError("--sweep-b needs --ell")
            rows = [plan(args.n, b, args.ell, **common) for b in args.sweep_b]
        buf = _csv_text(PLAN_COLUMNS, [r.as_row() for r in rows])
        _emit(buf, args.output)
        return EXIT_OK
    if args.b is None or args.ell is None:
        raise UsageError("plan needs --b and --ell (or a sweep)")
    report = plan(args.n, args.b, args.ell, h1=args.h1, **common)
    _emit(report.render() + "\n", args.output)
    return EXIT_OK


def _csv_text(columns, rows) -> str:
    buf = StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# bench


BENCH_COLUMNS = ["kind", "weight", "rep", "seed", "rounds_used", "seconds", "solved"]


def cmd_bench(args, runlog: RunLog) -> int:
    """Repeated seeded runs; wall times are machine dependent."""
    if (args.instance is None) == (args.nsk_bits is None):
        raise UsageError("bench needs exactly one of --instance or --nsk-bits")
    rows = []
    if args.instance is not None:
        if args.ell is None or args.b is None:
            raise UsageError("bench --instance needs --ell and --b")
        inst = io.read_instance(args.instance)
        weights = [args.ell]
    else:
        weights = args.weights or [4]
        pk, _ = nsk.keygen(args.nsk_bits, seed=args.seed, allow_unsafe_prime=args.allow_unsafe_prime)

    for w in weights:
        for rep in range(args.reps):
            seed = args.seed + rep if args.vary_seed else args.seed
            t0 = time.perf_counter()
            try:
                if args.instance is not None:
                    params = AttackParams(b=args.b, ell=w, q=args.q or 12, iterations=args.iter, seed=seed,
                                          workers=args.workers)
                    sol = ba_mspp(inst, params, memory_cap_bytes=args.memory_cap_bytes, digest=args.digest,
                                  on_round=runlog)
                    rounds = sol.rounds_used
                else:
                    rng = make_rng(seed, 2 + w)
                    ones = sorted(int(i) for i in rng.choice(pk.n + 1, size=w, replace=False))
                    c = nsk.encrypt(pk, sum(1 << i for i in ones))
                    stats = AttackStats()
                    nsk.attack(pk, c, w, b=args.b, q=args.q, iterations=args.iter, seed=seed,
                               workers=args.workers, stats=stats, memory_cap_bytes=args.memory_cap_bytes,
                               digest=args.digest, on_round=runlog)
                    rounds = stats.rounds
                solved = 1
            except AttackFailed as exc:
                rounds, solved = exc.rounds, 0
            rows.append({"kind": "run", "weight": w, "rep": rep, "seed": seed, "rounds_used": rounds,
                         "seconds": f"{time.perf_counter() - t0:.6f}", "solved": solved})
        mine = [r for r in rows if r["kind"] == "run" and r["weight"] == w]
        rows.append({
            "kind": "mean", "weight": w, "rep": len(mine), "seed": args.seed,
            "rounds_used": f"{mean(r['rounds_used'] for r in mine):.6f}",
            "seconds": f"{mean(float(r['seconds']) for r in mine):.6f}",
            "solved": sum(r["solved"] for r in mine),
        })
    log.info("bench timings are machine dependent")
    _emit(_csv_text(BENCH_COLUMNS, rows), args.output)
    if args.fit_output:
        fit = [{"H_m": r["weight"], "mean_seconds": r["seconds"],
                "log2_mean_seconds": f"{math.log2(max(float(r['seconds']), 1e-9)):.6f}"}
               for r in rows if r["kind"] == "mean"]
        Path(args.fit_output).write_text(_csv_text(["H_m", "mean_seconds", "log2_mean_seconds"], fit),
                                         encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# carmichael


def cmd_carmichael_gen(args, runlog: RunLog) -> int:
    config = cm.CarmichaelSearchConfig(
        H=tuple(args.exponents), ell=args.ell, b=args.b, q=args.q, iterations=args.iter, seed=args.seed,
        workers=args.workers, memory_cap_bytes=args.memory_cap_bytes,
    )
    log.info("Lambda = %d, pool size %d", config.lam, len(config.pool))
    cert = cm.generate_carmichael(config, args.mode, sweep_splits=args.sweep_splits, digest=args.digest,
                                  on_round=runlog)
    _emit(cert.render(), args.output)
    return EXIT_OK


def cmd_carmichael_scan(args, runlog: RunLog) -> int:
    found = cm.scan_carmichael(args.limit)
    _emit("".join(f"{n}\n" for n in found), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# nsk


def cmd_nsk_keygen(args, runlog: RunLog) -> int:
    pk, sk = nsk.keygen(args.bits, seed=args.seed, allow_unsafe_prime=args.allow_unsafe_prime)
    io.write_public_key(args.pub, pk)
    io.write_secret_key(args.sec, sk)
    log.info("key: p has %d bits, n = %d", pk.p.bit_length(), pk.n)
    return EXIT_OK


def cmd_nsk_encrypt(args, runlog: RunLog) -> int:
    pk = io.read_public_key(args.pub)
    if (args.message is None) == (args.random_weight is None):
        raise UsageError("give exactly one of --message or --random-weight")
    if args.message is not None:
        m = int(args.message, 0)
    else:
        if not 0 <= args.random_weight <= pk.n + 1:
            raise UsageError(f"--random-weight must be in [0, {pk.n + 1}]")
        rng = make_rng(args.seed, 2)
        ones = rng.choice(pk.n + 1, size=args.random_weight, replace=False)
        m = sum(1 << int(i) for i in ones)
        if args.message_out:
            Path(args.message_out).write_text(f"{m}\n", encoding="utf-8")
    _emit(f"{nsk.encrypt(pk, m)}\n", args.output)
    return EXIT_OK


def cmd_nsk_decrypt(args, runlog: RunLog) -> int:
    pk = io.read_public_key(args.pub)
    sk = io.read_secret_key(args.sec, pk)
    m = nsk.decrypt(pk, sk, _read_ciphertext(args.ciphertext))
    _emit(f"{int(m)}\n", args.output)
    return EXIT_OK


def cmd_nsk_attack(args, runlog: RunLog) -> int:
    pk = io.read_public_key(args.pub)
    c = _read_ciphertext(args.ciphertext)
    stats = AttackStats()
    kw = dict(b=args.b, q=args.q, iterations=args.iter, seed=args.seed, workers=args.workers,
              sweep_splits=args.sweep_splits, stats=stats, memory_cap_bytes=args.memory_cap_bytes,
              digest=args.digest, on_round=runlog)
    if args.known:
        m = nsk.attack_known_bits(pk, c, args.weight, args.known, **kw)
    else:
        m = nsk.attack(pk, c, args.weight, reduce=not args.no_reduce, at_most=args.at_most, **kw)
    log.info("recovered after %d rounds", stats.rounds)
    _emit(f"{int(m)}\n", args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _attack_flags(p: argparse.ArgumentParser, ell: bool = True) -> None:
    if ell:
        p.add_argument("--ell", type=int, help="subset weight")
    p.add_argument("--b", type=int, help="window size")
    p.add_argument("--q", type=int, default=None, help="hex digits of digest kept")
    p.add_argument("--iter", type=int, default=None, help="maximum rounds")
    p.add_argument("--sweep-splits", action="store_true", help="try every (h1, h2) split per round")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subsetprod", description="Modular subset product attacks and tools")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (default: fresh entropy, printed)")
    parser.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
    parser.add_argument("--memory-cap-bytes", type=int, default=DEFAULT_MEMORY_CAP)
    parser.add_argument("--digest", choices=DIGESTS, default="md5")
    parser.add_argument("--log", default=None, help="append a JSON-lines run log here")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an instance file")
    p.add_argument("instance")
    _attack_flags(p)
    p.add_argument("--h1", type=int, default=None)
    p.add_argument("--exhaustive", action="store_true", help="deterministic meet-in-the-middle")
    p.add_argument("--collect-all", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_solve, default_iter=100, default_q=12)

    p = sub.add_parser("plan", help="planning estimates")
    p.add_argument("--n", type=int, required=True, help="pool size minus one")
    p.add_argument("--b", type=int)
    p.add_argument("--ell", type=int)
    p.add_argument("--h1", type=int)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--element-bits", type=float, default=None)
    p.add_argument("--nice", action="store_true", help="pool has a compact description")
    sweep = p.add_mutually_exclusive_group()
    sweep.add_argument("--sweep-h", type=_int_range, help="CSV over ell in lo..hi")
    sweep.add_argument("--sweep-b", type=_int_range, help="CSV over b in lo..hi")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="repeated timed runs as CSV (machine dependent)")
    p.add_argument("--instance")
    p.add_argument("--nsk-bits", type=int)
    p.add_argument("--allow-unsafe-prime", action="store_true")
    p.add_argument("--weights", type=_int_list, help="NSK message weights")
    _attack_flags(p)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--vary-seed", action="store_true", help="use seed + rep instead of a fixed seed")
    p.add_argument("--fit-output", help="write H_m, mean seconds CSV for curve fitting")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bench, default_iter=200, default_q=None)

    p = sub.add_parser("carmichael", help="Carmichael numbers")
    csub = p.add_subparsers(dest="carmichael_command", required=True)
    g = csub.add_parser("gen", help="generate from an Erdos pool")
    g.add_argument("--exponents", type=_int_list, required=True, help="non-increasing, e.g. 3,1,1")
    g.add_argument("--mode", choices=["one", "B", "both"], default="one")
    _attack_flags(g)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_carmichael_gen, default_iter=1000, default_q=12)
    s = csub.add_parser("scan", help="list Carmichael numbers up to a limit")
    s.add_argument("--limit", type=int, required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_carmichael_scan)

    p = sub.add_parser("nsk", help="Naccache-Stern knapsack")
    nsub = p.add_subparsers(dest="nsk_command", required=True)
    k = nsub.add_parser("keygen")
    k.add_argument("--bits", type=int, required=True)
    k.add_argument("--pub", required=True)
    k.add_argument("--sec", required=True)
    k.add_argument("--allow-unsafe-prime", action="store_true", help="toy keys below 64 bits")
    k.set_defaults(func=cmd_nsk_keygen)
    e = nsub.add_parser("encrypt")
    e.add_argument("--pub", required=True)
    e.add_argument("--message", help="integer message (0x/0b prefixes accepted)")
    e.add_argument("--random-weight", type=int, help="draw a random message of this weight")
    e.add_argument("--message-out", help="write the drawn message here")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_nsk_encrypt)
    d = nsub.add_parser("decrypt")
    d.add_argument("--pub", required=True)
    d.add_argument("--sec", required=True)
    d.add_argument("ciphertext", help="decimal value or a file holding it")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_nsk_decrypt)
    a = nsub.add_parser("attack")
    a.add_argument("--pub", required=True)
    a.add_argument("ciphertext", help="decimal value or a file holding it")
    a.add_argument("--weight", type=int, required=True)
    a.add_argument("--known", type=_known_bits, default=None, help="idx:bit,...")
    a.add_argument("--at-most", action="store_true", help="treat --weight as an upper bound")
    a.add_argument("--no-reduce", action="store_true", help="disable the high-weight reduction")
    _attack_flags(a, ell=False)
    a.add_argument("-o", "--output")
    a.set_defaults(func=cmd_nsk_attack, default_iter=200, default_q=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    log.setLevel(logging.INFO)
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed = {args.seed}", file=sys.stderr)
    if args.workers is None:
        args.workers = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1
    if getattr(args, "iter", None) is None and hasattr(args, "default_iter"):
        args.iter = args.default_iter
    if getattr(args, "q", None) is None and hasattr(args, "default_q"):
        args.q = args.default_q
    if args.workers < 1 or args.memory_cap_bytes < 1:
        print("error: --workers and --memory-cap-bytes must be positive", file=sys.stderr)
        return EXIT_USAGE

    command = " ".join(filter(None, [args.command, getattr(args, "carmichael_command", None),
                                     getattr(args, "nsk_command", None)]))
    runlog = RunLog(args.log, command, args.seed)
    try:
        runlog.event(status="start")
        code = args.func(args, runlog)
        runlog.event(status="ok")
        return code
    except (AttackFailed, NoSolution) as exc:
        runlog.event(status="fail", error=str(exc))
        print(f"fail: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except NotInvertible as exc:
        print(f"error: NotInvertible: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, InvalidParams, BudgetExceeded, MsppError, io.FormatError, nsk.MalformedCiphertext,
            nsk.WeightTooLarge, nsk.InconsistentKnownBits, cm.PoolTooSmall, cm.LimitTooLarge,
            cm.InvalidFactorization, cm.FactorizationUnavailable, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        runlog.close()


if __name__ == "__main__":
    sys.exit(main())
