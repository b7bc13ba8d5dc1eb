"""Text file formats: instances, solutions, NSK keys, Carmichael certificates.

All big integers are written as decimal strings.
"""

from __future__ import annotations

from pathlib import Path

from .mspp import IntegerRange, MsppInstance, SubsetSolution
from .nsk import NskPublicKey, NskSecretKey

__all__ = [
    "FormatError",
    "parse_key_values",
    "read_instance",
    "write_instance",
    "format_solution",
    "write_solution",
    "read_solution",
    "write_public_key",
    "read_public_key",
    "write_secret_key",
    "read_secret_key",
]


class FormatError(ValueError):
    pass


def parse_key_values(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise FormatError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _int(fields: dict[str, str], key: str) -> int:
    try:
        return int(fields[key])
    except KeyError:
        raise FormatError(f"missing {key!r}") from None
    except ValueError:
        raise FormatError(f"{key!r} is not a decimal integer") from None


def _int_list(value: str, key: str) -> list[int]:
    value = value.strip()
    if not value:
        return []
    try:
        return [int(x) for x in value.split(",")]
    except ValueError:
        raise FormatError(f"{key!r} must be comma-separated decimals") from None


def read_instance(path, validate: bool = True) -> MsppInstance:
    """Parse ``modulus``, ``target`` and one of ``elements`` / ``range = lo..hi``."""
    fields = parse_key_values(Path(path).read_text(encoding="utf-8"))
    modulus = _int(fields, "modulus")
    target = _int(fields, "target")
    if ("elements" in fields) == ("range" in fields):
        raise FormatError("give exactly one of 'elements' or 'range'")
    if "elements" in fields:
        pool = _int_list(fields["elements"], "elements")
    else:
        lo, sep, hi = fields["range"].partition("..")
        if not sep:
            raise FormatError("range must look like lo..hi")
        try:
            pool = IntegerRange(int(lo), int(hi))
        except ValueError as exc:
            raise FormatError(f"bad range: {exc}") from None
    return MsppInstance(modulus, target, pool, validate=validate)


def write_instance(path, instance: MsppInstance) -> None:
    lines = [f"modulus = {instance.modulus}", f"target = {instance.target}"]
    if isinstance(instance.pool, IntegerRange):
        lines.append(f"range = {instance.pool.describe()}")
    else:
        lines.append("elements = " + ",".join(map(str, instance.pool)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_solution(solution: SubsetSolution, seed: int | None = None) -> str:
    lines = [
        "indices = " + ",".join(map(str, solution.indices)),
        "elements = " + ",".join(map(str, solution.elements)),
        f"certificate = {solution.certificate}",
        f"rounds_used = {solution.rounds_used if solution.rounds_used is not None else 0}",
        f"seed = {seed if seed is not None else ''}",
    ]
    return "\n".join(lines) + "\n"


def write_solution(path, solution: SubsetSolution, seed: int | None = None) -> None:
    Path(path).write_text(format_solution(solution, seed), encoding="utf-8")


def read_solution(path) -> dict:
    fields = parse_key_values(Path(path).read_text(encoding="utf-8"))
    return {
        "indices": _int_list(fields.get("indices", ""), "indices"),
        "elements": _int_list(fields.get("elements", ""), "elements"),
        "certificate": _int(fields, "certificate"),
        "rounds_used": _int(fields, "rounds_used"),
        "seed": int(fields["seed"]) if fields.get("seed") else None,
    }


def write_public_key(path, pk: NskPublicKey) -> None:
    Path(path).write_text("\n".join(map(str, [pk.p, pk.n, *pk.u])) + "\n", encoding="utf-8")


def read_public_key(path) -> NskPublicKey:
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    try:
        nums = [int(x) for x in lines]
    except ValueError:
        raise FormatError("public key lines must be decimal integers") from None
    if len(nums) < 3:
        raise FormatError("public key needs p, n and at least one u")
    p, n, u = nums[0], nums[1], tuple(nums[2:])
    if len(u) != n + 1:
        raise FormatError(f"expected {n + 1} key elements, found {len(u)}")
    return NskPublicKey(p, n, u)


def write_secret_key(path, sk: NskSecretKey) -> None:
    Path(path).write_text(f"{sk.s}\n", encoding="utf-8")


def read_secret_key(path, pk: NskPublicKey) -> NskSecretKey:
    text = Path(path).read_text(encoding="utf-8").strip()
    try:
        s = int(text.splitlines()[0])
    except (ValueError, IndexError):
        raise FormatError("secret key file must hold s as a decimal integer") from None
    return NskSecretKey(s, pow(s, -1, pk.p - 1))
