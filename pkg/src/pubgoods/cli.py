"""Command-line front end.

Every command that produces a witness re-checks it with the matching
verifier before reporting. Exit codes: 0 solved or verified, 1 error or
failed verification, 2 proven that no solution exists, 3 unknown or out of
budget.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .core import IndivisibleGame, check_eps_nash, check_pure_nash, price_lint
from .divisible import (
    BimatrixProfile,
    SumGame,
    best_response_dynamics,
    bimatrix_regret,
    check_eps_pure_divisible,
    dominated_strategies,
    exact_equilibria,
    game_from_winlose,
    nash_from_game_profile,
)
from .formats import (
    DecompositionFile,
    InstanceError,
    atomic_write,
    canonical_json,
    dump_instance,
    load_instance,
    load_profile,
    save_instance,
)
from .gcircuit import check_assignment, compile_circuit, extract_assignment
from .gridsearch import SearchBudgetExceeded
from .pure import (
    PureStatus,
    classify_game,
    extract_assignment as extract_sat_assignment,
    find_pure,
    formula_holds,
    reduce_3sat,
    solve_pure,
)
from .threshold import (
    BandSearch,
    ThresholdGame,
    check_threshold_eq,
    cp_constant,
    grid_values,
    pgg_from_threshold,
    pgg_profile_from_threshold_eq,
    threshold_from_pgg,
    threshold_profile_from_pgg_nash,
)
from .treewidth import (
    choose_delta,
    dp_solve,
    greedy_decomposition,
    to_nice,
    validate_decomposition,
)

EXIT_OK, EXIT_ERROR, EXIT_NONE, EXIT_UNKNOWN = 0, 1, 2, 3

STATUS_EXIT = {
    "Solved": EXIT_OK,
    "Verified": EXIT_OK,
    "Done": EXIT_OK,
    "Failed": EXIT_ERROR,
    "Error": EXIT_ERROR,
    "NoneExists": EXIT_NONE,
    "Unknown": EXIT_UNKNOWN,
}

LOG_BASES = {"e": math.log, "2": math.log2, "10": math.log10}


class CliError(Exception):
    pass


@dataclass
class RunReport:
    command: str
    digest: str | None
    status: str
    witness: Any = None
    residual: float | None = None
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)
    # output options of the invocation; not part of the report itself
    options: dict = field(default_factory=dict, repr=False)

    @property
    def exit_code(self) -> int:
        return STATUS_EXIT[self.status]

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "digest": self.digest,
            "status": self.status,
            "witness": self.witness,
            "residual": self.residual,
            "wall_time": round(self.wall_time, 6),
            "details": self.details,
        }


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "proven none".
    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def _residual(violations) -> float:
    return max((float(v.regret) for v in violations), default=0.0)


def _plain(profile):
    return None if profile is None else [float(v) if isinstance(v, float) else int(v) for v in profile]


def _require_clean(violations, what: str) -> None:
    # Guard for the "no unverified output" rule: a solver bug surfaces as an error.
    if violations:
        raise CliError(f"internal error: {what} failed its own verifier ({len(violations)} violations)")


def _write_output(args, payload, syntax=None, key="output") -> dict:
    path = getattr(args, key, None)
    if path:
        save_instance(path, payload, syntax)
        return {key: path}
    return {}


# --- commands -----------------------------------------------------------------


def cmd_classify(args) -> RunReport:
    inst = load_instance(args.game, "game")
    game = inst.payload
    cls = classify_game(game)
    details = {"kind": cls.kind.value, "players": game.n, "lint": price_lint(game)}
    if cls.witness is not None:
        details["first_drop"] = cls.witness
    return RunReport("classify", inst.digest, "Done", details=details)


def cmd_solve_pure(args) -> RunReport:
    inst = load_instance(args.game, "game")
    game = inst.payload
    res = solve_pure(game, budget=args.budget)
    details = {"class": res.utility_class.kind.value if res.utility_class else None}
    if res.status is PureStatus.SOLVED:
        bad = check_pure_nash(game, res.profile)
        _require_clean(bad, "pure equilibrium")
        return RunReport("solve-pure", inst.digest, "Solved", list(res.profile), _residual(bad), details=details)
    if res.status is PureStatus.NONE_EXISTS:
        return RunReport("solve-pure", inst.digest, "NoneExists", details=details)
    return RunReport("solve-pure", inst.digest, "Unknown", details={**details, "reason": "instance exceeds the brute-force budget"})


def cmd_reduce_3sat(args) -> RunReport:
    inst = load_instance(args.cnf, "cnf")
    formula = inst.payload
    game, rmap = reduce_3sat(formula, args.mode)
    details = {"mode": args.mode, "players": game.n, "edges": len(game.graph.edges)}
    details.update(_write_output(args, game))
    if args.map:
        atomic_write(args.map, canonical_json(rmap.to_json()))
        details["map"] = args.map
    if not args.solve:
        details["game"] = game.to_json() if not args.output else None
        return RunReport("reduce-3sat", inst.digest, "Done", details=details)
    try:
        profile = find_pure(game, max_nodes=args.max_nodes)
    except SearchBudgetExceeded as exc:
        return RunReport("reduce-3sat", inst.digest, "Unknown", details={**details, "reason": str(exc)})
    if profile is None:
        return RunReport("reduce-3sat", inst.digest, "NoneExists", details=details)
    assignment = extract_sat_assignment(profile, rmap, game)
    if not formula_holds(formula, assignment, args.mode):
        raise CliError("internal error: extracted assignment does not satisfy the formula")
    witness = {str(v): int(b) for v, b in sorted(assignment.items())}
    details["game_profile"] = list(profile)
    return RunReport("reduce-3sat", inst.digest, "Solved", witness, 0.0, details=details)


def _load_td(path, tg: ThresholdGame):
    inst = load_instance(path, "td")
    dfile: DecompositionFile = inst.payload
    if dfile.n != tg.n:
        raise CliError(f"{path}: decomposition is over {dfile.n} vertices, game has {tg.n}")
    report = validate_decomposition(tg.graph, dfile.td)
    if not report.ok:
        raise _TdInvalid(path, report.to_json())
    return dfile.td


class _TdInvalid(Exception):
    def __init__(self, path, report: dict):
        self.path = str(path)
        self.report = report
        super().__init__(f"{path}: not a tree decomposition of the game graph: {report['violations']}")


def _delta(args, tg: ThresholdGame) -> float:
    if args.delta == "auto":
        return choose_delta(args.eps, tg.n, max(tg.graph.max_degree(), 1), LOG_BASES[args.log_base])
    try:
        delta = float(args.delta)
    except ValueError:
        raise CliError(f"--delta must be 'auto' or a number, got {args.delta!r}") from None
    if not 0 < delta <= 1:
        raise CliError("--delta must lie in (0, 1]")
    return delta


def cmd_threshold_dp(args) -> RunReport:
    inst = load_instance(args.game, "threshold")
    tg = inst.payload
    delta = _delta(args, tg)
    try:
        td = _load_td(args.td, tg) if args.td else greedy_decomposition(tg.graph)
    except _TdInvalid as exc:
        return RunReport("threshold solve-dp", inst.digest, "Error", details={"error": str(exc), "td": exc.report})
    ntd = to_nice(td, tg.graph)
    res = dp_solve(tg, ntd, args.eps, delta)
    details = {"eps": args.eps, "delta": delta, "width": td.width, "states": res.states}
    if res.profile is None:
        return RunReport("threshold solve-dp", inst.digest, "NoneExists", details={**details, "scope": "delta grid"})
    bad = check_threshold_eq(tg, res.profile, args.eps)
    _require_clean(bad, "DP witness")
    return RunReport("threshold solve-dp", inst.digest, "Solved", _plain(res.profile), _residual(bad), details=details)


def cmd_threshold_grid(args) -> RunReport:
    inst = load_instance(args.game, "threshold")
    tg = inst.payload
    delta = _delta(args, tg)
    grid = grid_values(delta)
    if args.order == "natural":
        order = None
    elif args.order == "auto":
        order = "auto"
    else:
        order = [int(v) for v in np.random.default_rng(args.seed).permutation(tg.n)]
    search = BandSearch(tg, args.eps, [grid] * tg.n, order=order, max_nodes=args.max_nodes)
    details = {"eps": args.eps, "delta": delta, "order": args.order}
    try:
        profile = search.solve()
    except SearchBudgetExceeded as exc:
        return RunReport("threshold grid-search", inst.digest, "Unknown", details={**details, "reason": str(exc)})
    details["nodes"] = search.nodes
    if profile is None:
        return RunReport("threshold grid-search", inst.digest, "NoneExists", details={**details, "scope": "delta grid"})
    bad = check_threshold_eq(tg, profile, args.eps)
    _require_clean(bad, "grid witness")
    return RunReport("threshold grid-search", inst.digest, "Solved", _plain(profile), _residual(bad), details=details)


def _float_profile(path, n: int) -> list[float]:
    prof = load_profile(path)
    if not isinstance(prof, list):
        raise CliError(f"{path}: expected a JSON array")
    if len(prof) != n:
        raise CliError(f"{path}: profile has length {len(prof)}, expected {n}")
    return [float(v) for v in prof]


def cmd_reduce_pgg_to_threshold(args) -> RunReport:
    inst = load_instance(args.game, "game")
    game = inst.payload
    tg = threshold_from_pgg(game)
    details = _write_output(args, tg)
    if not args.profile:
        if not args.output:
            details["instance"] = tg.to_json()
        return RunReport("reduce pgg-to-threshold", inst.digest, "Done", details=details)
    x = _float_profile(args.profile, tg.n)
    if check_threshold_eq(tg, x, args.eps):
        raise CliError(f"{args.profile}: not an eps-approximate threshold equilibrium")
    s = pgg_profile_from_threshold_eq(x, float(game.price), args.eps)
    bound = cp_constant(float(game.price)) * args.eps
    bad = check_eps_nash(game, s, bound)
    details.update({"eps": args.eps, "bound": bound})
    if bad:
        # Refuse to emit a mapped profile that does not verify.
        return RunReport("reduce pgg-to-threshold", inst.digest, "Failed", None, _residual(bad),
                         details={**details, "reason": "mapped profile is not c_p*eps-Nash", "violations": len(bad)})
    return RunReport("reduce pgg-to-threshold", inst.digest, "Solved", _plain(s), 0.0, details=details)


def cmd_reduce_threshold_to_pgg(args) -> RunReport:
    inst = load_instance(args.game, "threshold")
    tg = inst.payload
    game = pgg_from_threshold(tg)
    details = _write_output(args, game)
    if not args.profile:
        if not args.output:
            details["instance"] = game.to_json()
        return RunReport("reduce threshold-to-pgg", inst.digest, "Done", details=details)
    s = _float_profile(args.profile, game.n)
    if check_eps_nash(game, s, args.eps):
        raise CliError(f"{args.profile}: not an eps-Nash profile of the derived game")
    x = threshold_profile_from_pgg_nash(s)
    bad = check_threshold_eq(tg, x, 8 * args.eps)
    details.update({"eps": args.eps, "bound": 8 * args.eps})
    if bad:
        return RunReport("reduce threshold-to-pgg", inst.digest, "Failed", None, _residual(bad),
                         details={**details, "violations": len(bad)})
    return RunReport("reduce threshold-to-pgg", inst.digest, "Solved", _plain(x), 0.0, details=details)


def cmd_circuit_compile(args) -> RunReport:
    inst = load_instance(args.circuit, "circuit")
    compiled = compile_circuit(inst.payload)
    details = {
        "players": compiled.tg.n,
        "edges": len(compiled.tg.graph.edges),
        "node_map": compiled.node_map,
        "max_amplification": compiled.max_amplification,
    }
    details.update(_write_output(args, compiled.tg))
    if not args.output:
        details["instance"] = compiled.tg.to_json()
    return RunReport("circuit compile", inst.digest, "Done", details=details)


def cmd_circuit_check(args) -> RunReport:
    inst = load_instance(args.circuit, "circuit")
    c = inst.payload
    prof = load_profile(args.assignment)
    details = {"eps": args.eps}
    if isinstance(prof, list):
        # A profile of the compiled game: check it, then read the circuit off it.
        compiled = compile_circuit(c)
        if len(prof) != compiled.tg.n:
            raise CliError(f"{args.assignment}: profile has length {len(prof)}, compiled game has {compiled.tg.n} players")
        game_bad = check_threshold_eq(compiled.tg, prof, args.eps)
        if game_bad:
            return RunReport("circuit check", inst.digest, "Failed", None, _residual(game_bad),
                             details={**details, "reason": "not an eps-equilibrium of the compiled game"})
        assignment = extract_assignment(prof, compiled, args.eps)
        eps_c = compiled.max_amplification * args.eps
        details["circuit_eps"] = eps_c
    else:
        assignment = {str(k): float(v) for k, v in prof.items()}
        eps_c = args.eps
    bad = check_assignment(c, assignment, eps_c, args.or_high)
    residual = max((abs(v.actual - v.expected) - eps_c for v in bad), default=0.0)
    details["violations"] = [{"gate": v.gate, "type": v.type, "expected": v.expected, "actual": v.actual} for v in bad]
    status = "Failed" if bad else "Verified"
    return RunReport("circuit check", inst.digest, status, assignment, residual, details=details)


def _sum_game(inst) -> SumGame:
    if inst.format == "sumgame":
        return inst.payload
    game: IndivisibleGame = inst.payload
    return SumGame(game.graph, float(game.price))


def cmd_divisible_brd(args) -> RunReport:
    inst = load_instance(args.game, ("sumgame", "game"))
    game = _sum_game(inst)
    if args.init == "zeros":
        init = np.zeros(game.n)
    elif args.init == "ones":
        init = np.ones(game.n)
    else:
        init = np.random.default_rng(args.seed).random(game.n)
    res = best_response_dynamics(game, init, args.iters, args.damping)
    details = {"iters": args.iters, "damping": args.damping, "init": args.init, "eps": args.eps}
    bad = check_eps_pure_divisible(game, res.profile, args.eps)
    if bad:
        # No convergence guarantee: report the state reached without a witness.
        return RunReport("divisible brd", inst.digest, "Unknown", None, res.residual, details={**details, "last_profile": list(res.profile)})
    return RunReport("divisible brd", inst.digest, "Solved", list(res.profile), res.residual, details=details)


def cmd_divisible_reduce(args) -> RunReport:
    inst = load_instance(args.winlose, "winlose")
    wl = inst.payload
    game = game_from_winlose(wl, args.price)
    details = {"players": game.n, "edges": len(game.graph.edges), "lint": dominated_strategies(wl)}
    details.update(_write_output(args, game))
    if not args.solve:
        if not args.output:
            details["instance"] = game.to_json()
        return RunReport("divisible reduce-winlose", inst.digest, "Done", details=details)
    eqs = exact_equilibria(game)
    usable = [s for s in eqs if sum(s[: wl.n]) > 0 and sum(s[wl.n:]) > 0]
    if not usable:
        return RunReport("divisible reduce-winlose", inst.digest, "Unknown",
                         details={**details, "reason": "support enumeration found no nondegenerate equilibrium"})
    s = usable[0]
    prof = nash_from_game_profile(s, 0.0, wl)
    regret = bimatrix_regret(wl, prof, 1e-12)
    if regret > 1e-9:
        raise CliError(f"internal error: mapped bimatrix profile has regret {regret}")
    details["game_profile"] = list(s)
    return RunReport("divisible reduce-winlose", inst.digest, "Solved", prof.to_json(), regret, details=details)


def cmd_verify(args) -> RunReport:
    inst = load_instance(args.instance, ("game", "threshold", "sumgame", "circuit", "winlose", "cnf"))
    prof = load_profile(args.profile)
    payload = inst.payload
    eps = args.eps
    fmt = inst.format
    details = {"format": fmt, "eps": eps}
    if fmt == "circuit":
        if not isinstance(prof, dict):
            raise CliError(f"{args.profile}: expected an object mapping circuit nodes to values")
        bad = check_assignment(payload, {str(k): float(v) for k, v in prof.items()}, eps)
        residual = max((abs(v.actual - v.expected) - eps for v in bad), default=0.0)
    elif fmt == "winlose":
        if not isinstance(prof, dict) or "x" not in prof or "y" not in prof:
            raise CliError(f"{args.profile}: expected an object with 'x' and 'y' strategy vectors")
        try:
            bp = BimatrixProfile(tuple(float(v) for v in prof["x"]), tuple(float(v) for v in prof["y"]))
        except ValueError as exc:
            raise CliError(f"{args.profile}: {exc}") from None
        if len(bp.x) != payload.n or len(bp.y) != payload.n:
            raise CliError(f"{args.profile}: strategy vectors must have length {payload.n}")
        residual = bimatrix_regret(payload, bp)
        bad = [residual] if residual > eps + 1e-12 else []
    elif fmt == "cnf":
        values = prof if isinstance(prof, list) else [prof.get(str(v), 0) for v in range(1, payload.num_vars + 1)]
        if len(values) != payload.num_vars or any(v not in (0, 1) for v in values):
            raise CliError(f"{args.profile}: expected {payload.num_vars} truth values (0/1)")
        ok = formula_holds(payload, {v + 1: bool(b) for v, b in enumerate(values)}, args.mode)
        bad = [] if ok else [1]
        residual = 0.0 if ok else 1.0
    else:
        if not isinstance(prof, list):
            raise CliError(f"{args.profile}: expected a JSON array")
        if fmt == "threshold":
            vs = check_threshold_eq(payload, prof, eps)
        elif fmt == "sumgame":
            vs = check_eps_pure_divisible(payload, prof, eps)
        elif eps == 0 and all(v in (0, 1) for v in prof):
            vs = check_pure_nash(payload, [int(v) for v in prof])
        else:
            vs = check_eps_nash(payload, [float(v) for v in prof], eps)
        bad = vs
        residual = _residual(vs)
        details["violations"] = [{"player": v.player, "regret": v.regret} for v in vs]
    status = "Failed" if bad else "Verified"
    return RunReport("verify", inst.digest, status, prof, residual, details=details)


def cmd_decompose(args) -> RunReport:
    inst = load_instance(args.instance, ("game", "threshold", "sumgame"))
    g = inst.payload.graph
    td = greedy_decomposition(g)
    report = validate_decomposition(g, td)
    _require_clean(report.violations, "greedy decomposition")
    dfile = DecompositionFile(td, g.n)
    syntax = "pace" if args.td_format == "pace" else "json"
    details = {"width": td.width, "bags": len(td.bags)}
    details.update(_write_output(args, dfile, syntax))
    if not args.output:
        details["text"] = dump_instance(dfile, syntax)
    return RunReport("decompose", inst.digest, "Done", details=details)


# --- parser -------------------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be a nonnegative number")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the run report as JSON")
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    common.add_argument("--report", metavar="PATH", help="also write the JSON report to PATH")

    p = _Parser(prog="pubgoods", description="Public goods games on directed networks: solvers, reductions and verifiers.")
    p.add_argument("--version", action="version", version=f"pubgoods {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("classify", parents=[common], help="classify a game's utility against its price")
    s.add_argument("game")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("solve-pure", parents=[common], help="find a pure equilibrium or prove none exists")
    s.add_argument("game")
    s.add_argument("--budget", type=_positive_int, default=1 << 22, help="largest profile count to brute-force")
    s.set_defaults(func=cmd_solve_pure)

    s = sub.add_parser("reduce-3sat", parents=[common], help="build the game for a 3-CNF formula")
    s.add_argument("cnf")
    s.add_argument("--mode", choices=("3sat", "nae", "one-in-3"), default="3sat")
    s.add_argument("-o", "--output", help="write the game JSON here")
    s.add_argument("--map", help="write the reduction map JSON here")
    s.add_argument("--solve", action="store_true", help="also search the game and read back an assignment")
    s.add_argument("--max-nodes", type=_positive_int, default=50_000_000)
    s.set_defaults(func=cmd_reduce_3sat)

    th = sub.add_parser("threshold", help="threshold game solvers").add_subparsers(dest="action", required=True, metavar="ACTION")
    for name, func in (("solve-dp", cmd_threshold_dp), ("grid-search", cmd_threshold_grid)):
        s = th.add_parser(name, parents=[common])
        s.add_argument("game")
        s.add_argument("--eps", type=_nonneg_float, required=True)
        s.add_argument("--delta", default="auto", help="grid step, or 'auto' (default)")
        s.add_argument("--log-base", choices=sorted(LOG_BASES), default="e", help="logarithm used by --delta auto")
        s.set_defaults(func=func)
        if name == "solve-dp":
            s.add_argument("--td", help="tree decomposition (PACE .td or JSON); greedy if omitted")
        else:
            s.add_argument("--order", choices=("natural", "auto", "random"), default="natural",
                           help="variable order: natural gives the lexicographically smallest equilibrium")
            s.add_argument("--max-nodes", type=_positive_int, default=50_000_000)

    red = sub.add_parser("reduce", help="reductions between game families").add_subparsers(dest="action", required=True, metavar="ACTION")
    for name, func, help_ in (
        ("pgg-to-threshold", cmd_reduce_pgg_to_threshold, "best-shot game -> threshold game (t = 1/2)"),
        ("threshold-to-pgg", cmd_reduce_threshold_to_pgg, "threshold game -> best-shot game with price e^-t"),
    ):
        s = red.add_parser(name, parents=[common], help=help_)
        s.add_argument("game")
        s.add_argument("-o", "--output")
        s.add_argument("--profile", help="also map this approximate equilibrium of the other side")
        s.add_argument("--eps", type=_nonneg_float, default=0.0)
        s.set_defaults(func=func)

    circ = sub.add_parser("circuit", help="generalized circuits").add_subparsers(dest="action", required=True, metavar="ACTION")
    s = circ.add_parser("compile", parents=[common], help="compile a circuit to a threshold game")
    s.add_argument("circuit")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_circuit_compile)
    s = circ.add_parser("check", parents=[common], help="check a node assignment, or a compiled-game profile")
    s.add_argument("circuit")
    s.add_argument("assignment")
    s.add_argument("--eps", type=_nonneg_float, required=True)
    s.add_argument("--or-high", type=float, default=0.5, help="OR output value for a true input (default 1/2)")
    s.set_defaults(func=cmd_circuit_check)

    div = sub.add_parser("divisible", help="divisible summation games").add_subparsers(dest="action", required=True, metavar="ACTION")
    s = div.add_parser("brd", parents=[common], help="damped best-response dynamics")
    s.add_argument("game")
    s.add_argument("--iters", type=_positive_int, default=1000)
    s.add_argument("--damping", type=float, default=0.5)
    s.add_argument("--init", choices=("zeros", "ones", "random"), default="zeros")
    s.add_argument("--eps", type=_nonneg_float, default=1e-6)
    s.set_defaults(func=cmd_divisible_brd)
    s = div.add_parser("reduce-winlose", parents=[common], help="win-lose bimatrix game -> summation game")
    s.add_argument("winlose")
    s.add_argument("--price", type=float, default=0.5)
    s.add_argument("-o", "--output")
    s.add_argument("--solve", action="store_true", help="solve the game exactly and map back to a bimatrix equilibrium")
    s.set_defaults(func=cmd_divisible_reduce)

    s = sub.add_parser("verify", parents=[common], help="check a profile against an instance")
    s.add_argument("instance")
    s.add_argument("profile")
    s.add_argument("--eps", type=_nonneg_float, default=0.0)
    s.add_argument("--mode", choices=("3sat", "nae", "one-in-3"), default="3sat", help="clause semantics for CNF files")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("decompose", parents=[common], help="greedy tree decomposition of an instance's graph")
    s.add_argument("instance")
    s.add_argument("--td-format", choices=("pace", "json"), default="pace")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_decompose)
    return p


def _human(report: RunReport) -> str:
    lines = [f"command:  {report.command}", f"status:   {report.status}"]
    if report.digest:
        lines.append(f"instance: {report.digest}")
    if report.witness is not None:
        lines.append(f"witness:  {json.dumps(report.witness)}")
    if report.residual is not None:
        lines.append(f"residual: {report.residual:.3g}")
    for k, v in report.details.items():
        if v is None:
            continue
        if isinstance(v, str) and "\n" in v:
            lines.append(f"{k}:\n{v.rstrip()}")
        else:
            lines.append(f"{k}: {json.dumps(v) if not isinstance(v, str) else v}")
    lines.append(f"time:     {report.wall_time:.3f}s")
    return "\n".join(lines)


def run_command(argv: Sequence[str] | None = None) -> tuple[RunReport, int]:
    start = time.perf_counter()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        report = RunReport("usage", None, "Error", details={"error": str(exc)})
        return report, EXIT_ERROR
    name = args.command + (f" {args.action}" if getattr(args, "action", None) else "")
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = args.func(args)
        if caught:
            report.details.setdefault("warnings", [str(w.message) for w in caught])
    except (CliError, InstanceError, ValueError) as exc:
        report = RunReport(name, None, "Error", details={"error": str(exc)})
    except SearchBudgetExceeded as exc:
        report = RunReport(name, None, "Unknown", details={"reason": str(exc)})
    report.wall_time = time.perf_counter() - start
    report.options = {"json": getattr(args, "json", False), "report": getattr(args, "report", None)}
    return report, report.exit_code


def _threads() -> None:
    raw = os.environ.get("PUBGOODS_THREADS")
    if raw is not None:
        try:
            if int(raw) < 1:
                raise ValueError
        except ValueError:
            raise CliError(f"PUBGOODS_THREADS must be a positive integer, got {raw!r}") from None


def main(argv: Sequence[str] | None = None) -> int:
    try:
        _threads()
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report, code = run_command(argv)
    as_json = report.options.get("json", False)
    report_path = report.options.get("report")
    if report_path:
        atomic_write(report_path, canonical_json(report.to_json()))
    if as_json:
        print(json.dumps(report.to_json(), indent=2))
    elif report.status == "Error":
        print(f"error: {report.details.get('error', report.details)}", file=sys.stderr)
    else:
        print(_human(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
