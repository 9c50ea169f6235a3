"""Instance files: format detection, schema checks, parsing and canonical output.

Supported formats are JSON documents tagged with ``"format"`` (game,
threshold, sumgame, circuit, winlose, td), DIMACS CNF text and PACE ``.td``
text. Every loader reports the line or the JSON field at fault. Saving
writes a canonical form, so load -> save -> load -> save is byte-stable.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from pathlib import Path
from typing import Any

from .core import IndivisibleGame
from .divisible import SumGame, WinLoseGame
from .gcircuit import GeneralizedCircuit
from .pure import CnfFormula
from .threshold import ThresholdGame
from .treewidth import TreeDecomposition

FORMATS = ("game", "threshold", "sumgame", "circuit", "cnf", "winlose", "td")


class InstanceError(ValueError):
    """A file that cannot be parsed or fails its format's schema."""

    def __init__(self, path, message: str):
        self.path = str(path)
        self.message = message
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class DecompositionFile:
    td: TreeDecomposition
    n: int


@dataclass(frozen=True)
class InstanceFile:
    format: str
    payload: Any
    syntax: str          # "json", "dimacs" or "pace"
    digest: str          # sha256 of the raw bytes


def digest_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


# --- text formats -----------------------------------------------------------


def parse_dimacs(text: str) -> CnfFormula:
    """DIMACS CNF; clauses may span lines, ``%`` ends the clause list."""
    header = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        if parts[0] == "%":
            break
        if parts[0] == "p":
            if header is not None:
                raise ValueError(f"line {lineno}: second 'p' line")
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"line {lineno}: expected 'p cnf <vars> <clauses>'")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise ValueError(f"line {lineno}: header counts must be integers") from None
            if min(header) < 0:
                raise ValueError(f"line {lineno}: header counts must be nonnegative")
            continue
        if header is None:
            raise ValueError(f"line {lineno}: clause before the 'p cnf' header")
        for tok in parts:
            try:
                lit = int(tok)
            except ValueError:
                raise ValueError(f"line {lineno}: literal {tok!r} is not an integer") from None
            if abs(lit) > header[0]:
                raise ValueError(f"line {lineno}: literal {lit} exceeds {header[0]} variables")
            if lit == 0:
                if not current:
                    raise ValueError(f"line {lineno}: empty clause")
                if len(current) > 3:
                    raise ValueError(f"line {lineno}: clause has {len(current)} literals, at most 3 allowed")
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if header is None:
        raise ValueError("missing 'p cnf' header")
    if current:
        raise ValueError("last clause is not terminated by 0")
    if len(clauses) != header[1]:
        raise ValueError(f"header declares {header[1]} clauses, found {len(clauses)}")
    return CnfFormula(header[0], tuple(clauses))


def write_dimacs(formula: CnfFormula) -> str:
    lines = [f"p cnf {formula.num_vars} {len(formula.clauses)}"]
    lines.extend(" ".join(str(l) for l in c) + " 0" for c in formula.clauses)
    return "\n".join(lines) + "\n"


# --- JSON schemas -------------------------------------------------------------


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, Real) and not isinstance(v, bool)


def _need(obj: dict, key: str, check, what: str) -> None:
    if key not in obj:
        raise ValueError(f"field '{key}': missing")
    if not check(obj[key]):
        raise ValueError(f"field '{key}': expected {what}, got {obj[key]!r}")


def _check_graph(obj: dict) -> None:
    _need(obj, "n", lambda v: _is_int(v) and v >= 0, "a nonnegative integer")
    edges = obj.get("edges", [])
    if not isinstance(edges, list):
        raise ValueError("field 'edges': expected a list")
    for k, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2 and all(_is_int(v) for v in e)):
            raise ValueError(f"field 'edges[{k}]': expected a [j, i] pair of integers, got {e!r}")


def _is_price(v) -> bool:
    if _is_num(v):
        return True
    if isinstance(v, str):
        try:
            Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            return False
        return True
    return False


def _check_game(obj: dict) -> None:
    _check_graph(obj)
    _need(obj, "price", _is_price, "a number or a 'num/den' string")
    u = obj.get("utility", {"kind": "max"})
    if not isinstance(u, dict) or u.get("kind") not in ("max", "steps"):
        raise ValueError("field 'utility': expected {\"kind\": \"max\"} or {\"kind\": \"steps\", \"values\": [...]}")
    if u["kind"] == "steps":
        vals = u.get("values")
        if not isinstance(vals, list) or not all(_is_price(v) for v in vals):
            raise ValueError("field 'utility.values': expected a list of numbers")


def _check_threshold(obj: dict) -> None:
    _check_graph(obj)
    _need(obj, "t", _is_num, "a number")


def _check_sumgame(obj: dict) -> None:
    _check_graph(obj)
    if "price" in obj and not _is_num(obj["price"]):
        raise ValueError(f"field 'price': expected a number, got {obj['price']!r}")


def _check_circuit(obj: dict) -> None:
    _need(obj, "nodes", lambda v: isinstance(v, list) and all(isinstance(s, str) for s in v), "a list of node names")
    gates = obj.get("gates", [])
    if not isinstance(gates, list):
        raise ValueError("field 'gates': expected a list")
    for k, g in enumerate(gates):
        if not isinstance(g, dict):
            raise ValueError(f"field 'gates[{k}]': expected an object")
        if not isinstance(g.get("type"), str):
            raise ValueError(f"field 'gates[{k}].type': expected a string")
        if not isinstance(g.get("in", []), list) or not all(isinstance(s, str) for s in g.get("in", [])):
            raise ValueError(f"field 'gates[{k}].in': expected a list of node names")
        if not isinstance(g.get("out"), str):
            raise ValueError(f"field 'gates[{k}].out': expected a node name")


def _check_matrix(obj: dict, key: str) -> None:
    m = obj.get(key)
    if not (isinstance(m, list) and m and all(isinstance(r, list) for r in m)):
        raise ValueError(f"field '{key}': expected a nonempty list of rows")
    for r, row in enumerate(m):
        if len(row) != len(m[0]) or not all(_is_int(v) for v in row):
            raise ValueError(f"field '{key}[{r}]': expected {len(m[0])} integers")


def _check_winlose(obj: dict) -> None:
    _check_matrix(obj, "R")
    _check_matrix(obj, "C")


def _check_td(obj: dict) -> None:
    _need(obj, "bags", lambda v: isinstance(v, list), "a list of bags")
    for k, b in enumerate(obj["bags"]):
        if not (isinstance(b, list) and all(_is_int(v) and v >= 0 for v in b)):
            raise ValueError(f"field 'bags[{k}]': expected a list of vertex indices")
    for k, e in enumerate(obj.get("edges", [])):
        if not (isinstance(e, list) and len(e) == 2 and all(_is_int(v) and 0 <= v < len(obj["bags"]) for v in e)):
            raise ValueError(f"field 'edges[{k}]': expected a pair of bag indices")
    if "n" in obj and not (_is_int(obj["n"]) and obj["n"] >= 0):
        raise ValueError("field 'n': expected a nonnegative integer")


def _td_from_json(obj: dict) -> DecompositionFile:
    td = TreeDecomposition.from_json(obj)
    n = obj.get("n", max((max(b) + 1 for b in td.bags if b), default=0))
    return DecompositionFile(td, n)


_JSON = {
    "game": (_check_game, IndivisibleGame.from_json),
    "threshold": (_check_threshold, ThresholdGame.from_json),
    "sumgame": (_check_sumgame, SumGame.from_json),
    "circuit": (_check_circuit, GeneralizedCircuit.from_json),
    "winlose": (_check_winlose, WinLoseGame.from_json),
    "td": (_check_td, _td_from_json),
}

# Keys that identify an untagged JSON document.
_SIGNATURE = (("gates", "circuit"), ("bags", "td"), ("R", "winlose"), ("t", "threshold"), ("utility", "game"), ("price", "game"))


def detect_format(text: str) -> tuple[str, str]:
    """Return ``(format, syntax)`` for the given file contents."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        tag = obj.get("format")
        if tag is not None:
            if tag not in _JSON:
                raise ValueError(f"field 'format': unknown format {tag!r}")
            return tag, "json"
        for key, fmt in _SIGNATURE:
            if key in obj:
                return fmt, "json"
        raise ValueError("cannot tell the format of this JSON document; add a 'format' field")
    for raw in text.splitlines():
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        if parts[:2] == ["p", "cnf"]:
            return "cnf", "dimacs"
        if parts[:2] == ["s", "td"]:
            return "td", "pace"
        break
    raise ValueError("unrecognized file: expected JSON, DIMACS CNF or PACE .td")


def parse_instance(text: str, expected: str | tuple[str, ...] | None = None) -> tuple[str, str, Any]:
    fmt, syntax = detect_format(text)
    if expected is not None:
        allowed = (expected,) if isinstance(expected, str) else tuple(expected)
        if fmt not in allowed:
            raise ValueError(f"expected a {' or '.join(allowed)} file, got {fmt}")
    if syntax == "dimacs":
        return fmt, syntax, parse_dimacs(text)
    if syntax == "pace":
        td, n = TreeDecomposition.from_pace(text)
        return fmt, syntax, DecompositionFile(td, n)
    obj = json.loads(text)
    check, build = _JSON[fmt]
    check(obj)
    try:
        return fmt, syntax, build(obj)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed {fmt} document: {exc}") from None


def load_instance(path, expected: str | tuple[str, ...] | None = None) -> InstanceFile:
    """Read, detect, schema-check and parse ``path``."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InstanceError(path, f"cannot read file ({exc.strerror})") from None
    try:
        text = data.decode("utf-8")
        fmt, syntax, payload = parse_instance(text, expected)
    except UnicodeDecodeError:
        raise InstanceError(path, "file is not UTF-8 text") from None
    except ValueError as exc:
        raise InstanceError(path, str(exc)) from None
    return InstanceFile(fmt, payload, syntax, digest_bytes(data))


# --- canonical output ---------------------------------------------------------


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def dump_instance(payload, syntax: str | None = None) -> str:
    """Canonical text for a parsed instance."""
    if isinstance(payload, CnfFormula):
        return write_dimacs(payload)
    if isinstance(payload, DecompositionFile):
        if syntax == "json":
            return canonical_json({**payload.td.to_json(), "n": payload.n})
        return payload.td.to_pace(payload.n)
    if isinstance(payload, TreeDecomposition):
        raise TypeError("wrap decompositions in DecompositionFile to record the vertex count")
    return canonical_json(payload.to_json())


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_instance(path, payload, syntax: str | None = None) -> None:
    atomic_write(path, dump_instance(payload, syntax))


def load_profile(path) -> Any:
    """A JSON profile: a list of numbers, or an object (circuit assignments, bimatrix pairs)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InstanceError(path, f"cannot read file ({exc.strerror})") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(path, f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if isinstance(obj, list):
        for k, v in enumerate(obj):
            if not _is_num(v):
                raise InstanceError(path, f"entry {k}: expected a number, got {v!r}")
    elif not isinstance(obj, dict):
        raise InstanceError(path, "expected a JSON array or object")
    return obj
