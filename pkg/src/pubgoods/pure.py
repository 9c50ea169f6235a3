"""Pure equilibria of indivisible games.

Flat, steep and alternating step functions are solved directly; every other
step function gets an exhaustive search. Also here: the 3SAT hardness
construction and the feeder-player shift used to move a step function's
first interesting step down to zero.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import DirectedGraph, IndivisibleGame, StepFunction, check_pure_nash
from .gridsearch import Constraint, GridSearch, low_frontier_order

BRUTE_FORCE_MAX_N = 25
_CHUNK = 1 << 18


class UtilityKind(str, enum.Enum):
    FLAT = "flat"
    STEEP = "steep"
    ALTERNATING = "alternating"
    GENERAL = "general"


@dataclass(frozen=True)
class UtilityClass:
    kind: UtilityKind
    # smallest k with X(k+1) > X(k)+p and X(k+2) < X(k+1)+p (general only);
    # None when a step ties with p and no such k exists.
    witness: int | None = None


def classify_utility(x: StepFunction, p, k_max: int | None = None) -> UtilityClass:
    """Classify X against price p, looking at steps ``0..k_max-1``.

    ``k_max`` defaults to the number of listed steps; pass the player count
    to classify for a concrete game (no closed neighborhood is larger).
    """
    if k_max is None:
        k_max = len(x.values) - 1
    k_max = max(k_max, 1)
    steps = [x.step(k) for k in range(k_max + 1)]
    if steps[0] <= p:
        return UtilityClass(UtilityKind.FLAT)
    if all(s >= p for s in steps[:k_max]):
        return UtilityClass(UtilityKind.STEEP)
    if all((s > p) if k % 2 == 0 else (s < p) for k, s in enumerate(steps[:k_max])):
        return UtilityClass(UtilityKind.ALTERNATING)
    for k in range(k_max - 1):
        if steps[k] > p and steps[k + 1] < p:
            return UtilityClass(UtilityKind.GENERAL, k)
    return UtilityClass(UtilityKind.GENERAL, None)


def classify_game(game: IndivisibleGame) -> UtilityClass:
    return classify_utility(game.x, game.price, game.n)


def solve_gf2(rows: Sequence[int], rhs: Sequence[int], n_cols: int) -> list[int] | None:
    """Solve a GF(2) system given as int bitsets; free variables are set to 0."""
    work = list(rows)
    b = [int(v) & 1 for v in rhs]
    pivots: list[tuple[int, int]] = []
    r = 0
    for col in range(n_cols):
        piv = next((i for i in range(r, len(work)) if (work[i] >> col) & 1), None)
        if piv is None:
            continue
        work[r], work[piv] = work[piv], work[r]
        b[r], b[piv] = b[piv], b[r]
        for i in range(len(work)):
            if i != r and (work[i] >> col) & 1:
                work[i] ^= work[r]
                b[i] ^= b[r]
        pivots.append((r, col))
        r += 1
    if any(work[i] == 0 and b[i] for i in range(len(work))):
        return None
    sol = [0] * n_cols
    for row, col in pivots:
        sol[col] = b[row]
    return sol


def solve_alternating_f2(game: IndivisibleGame) -> tuple[int, ...] | None:
    """Solve ``s_i + sum of in-neighbors = 1 (mod 2)`` for every player."""
    rows = []
    for i in range(game.n):
        row = 1 << i
        for j in game.graph.in_neighbors[i]:
            row |= 1 << j
        rows.append(row)
    sol = solve_gf2(rows, [1] * game.n, game.n)
    return None if sol is None else tuple(sol)


def _acceptance_tables(game: IndivisibleGame) -> tuple[np.ndarray, np.ndarray]:
    n = game.n
    steps = [game.x.step(m) for m in range(n + 1)]
    ok1 = np.array([s >= game.price for s in steps], dtype=bool)
    ok0 = np.array([s <= game.price for s in steps], dtype=bool)
    return ok0, ok1


def _scan(game: IndivisibleGame, start: int, stop: int, ok0, ok1) -> list[int]:
    n = game.n
    masks = np.arange(start, stop, dtype=np.uint64)
    good = np.ones(len(masks), dtype=bool)
    for i in range(n):
        inmask = 0
        for j in game.graph.in_neighbors[i]:
            inmask |= 1 << (n - 1 - j)
        m = np.bitwise_count(masks & np.uint64(inmask)).astype(np.int64)
        s = ((masks >> np.uint64(n - 1 - i)) & np.uint64(1)).astype(bool)
        good &= np.where(s, ok1[m], ok0[m])
        if not good.any():
            return []
    return [int(v) for v in masks[good]]


def brute_force_pure(game: IndivisibleGame, workers: int | None = None) -> list[tuple[int, ...]]:
    """All pure equilibria, in lexicographic order of profiles."""
    n = game.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N} (got {n})")
    if workers is None:
        workers = int(os.environ.get("PUBGOODS_THREADS", "1"))
    total = 1 << n
    ok0, ok1 = _acceptance_tables(game)
    bounds = [(a, min(a + _CHUNK, total)) for a in range(0, total, _CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda ab: _scan(game, ab[0], ab[1], ok0, ok1), bounds))
    else:
        parts = [_scan(game, a, b, ok0, ok1) for a, b in bounds]
    return [tuple((v >> (n - 1 - i)) & 1 for i in range(n)) for part in parts for v in part]


def pure_search(game: IndivisibleGame, order: Sequence[int] | None = None, max_nodes: int | None = 50_000_000) -> GridSearch:
    """Backtracking search over {0, 1} profiles with one constraint per player."""
    ok0, ok1 = _acceptance_tables(game)
    ok = (tuple(bool(v) for v in ok0), tuple(bool(v) for v in ok1))

    def pred(vals, ok=ok):
        return ok[vals[0]][sum(vals) - vals[0]]

    cons = [Constraint(game.graph.closed_neighborhood(i), pred) for i in range(game.n)]
    if order is None:
        order = low_frontier_order(game.n, [c.scope for c in cons])
    return GridSearch([(0, 1)] * game.n, cons, order=order, max_nodes=max_nodes)


def enumerate_pure(game: IndivisibleGame, order: Sequence[int] | None = None, max_nodes: int | None = 50_000_000) -> list[tuple[int, ...]]:
    """All pure equilibria by backtracking; no size guard, exponential worst case.

    Sorted lexicographically, so it agrees with :func:`brute_force_pure`.
    """
    return sorted(pure_search(game, order, max_nodes).solutions())


def find_pure(game: IndivisibleGame, max_nodes: int | None = 50_000_000) -> tuple[int, ...] | None:
    """Some pure equilibrium (not necessarily the smallest), or None."""
    return pure_search(game, max_nodes=max_nodes).solve()


class PureStatus(str, enum.Enum):
    SOLVED = "solved"
    NONE_EXISTS = "none_exists"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class PureResult:
    status: PureStatus
    profile: tuple[int, ...] | None = None
    utility_class: UtilityClass | None = None


def solve_pure(game: IndivisibleGame, budget: int = 1 << 22) -> PureResult:
    cls = classify_game(game)
    n = game.n
    if cls.kind is UtilityKind.FLAT:
        return PureResult(PureStatus.SOLVED, (0,) * n, cls)
    if cls.kind is UtilityKind.STEEP:
        return PureResult(PureStatus.SOLVED, (1,) * n, cls)
    if cls.kind is UtilityKind.ALTERNATING:
        sol = solve_alternating_f2(game)
        if sol is None:
            return PureResult(PureStatus.NONE_EXISTS, None, cls)
        return PureResult(PureStatus.SOLVED, sol, cls)
    if n > BRUTE_FORCE_MAX_N or (1 << n) > budget:
        return PureResult(PureStatus.UNKNOWN, None, cls)
    eqs = brute_force_pure(game)
    if not eqs:
        return PureResult(PureStatus.NONE_EXISTS, None, cls)
    return PureResult(PureStatus.SOLVED, eqs[0], cls)


# -- 3SAT construction -------------------------------------------------------

@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        for c in clauses:
            if not c:
                raise ValueError("empty clause")
            if len(c) > 3:
                raise ValueError(f"clause {c} has more than 3 literals")
            for lit in c:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ValueError(f"bad literal {lit}")
        object.__setattr__(self, "clauses", clauses)


# Step functions realising the three clause predicates on the same network
# (p = 1/2): the OR gadget's node 3 buys iff the step at its input count is
# above p.
MODE_UTILITY = {
    "3sat": StepFunction.max_utility(),
    "nae": StepFunction((0, 1, Fraction(6, 5), Fraction(7, 5), Fraction(12, 5))),
    "one-in-3": StepFunction((0, 1, Fraction(6, 5), Fraction(11, 5), Fraction(16, 5))),
}


def padded(clause: Sequence[int]) -> tuple[int, int, int]:
    c = tuple(clause)
    return (c + (c[-1],) * 3)[:3]


def clause_holds(clause: Sequence[int], assignment: dict[int, bool], mode: str = "3sat") -> bool:
    k = sum(assignment[abs(l)] == (l > 0) for l in padded(clause))
    if mode == "3sat":
        return k >= 1
    if mode == "nae":
        return 1 <= k <= 2
    if mode == "one-in-3":
        return k == 1
    raise ValueError(f"unknown mode {mode!r}")


def formula_holds(formula: CnfFormula, assignment: dict[int, bool], mode: str = "3sat") -> bool:
    return all(clause_holds(c, assignment, mode) for c in formula.clauses)


@dataclass(frozen=True)
class ReductionMap:
    heads: dict[int, int]                     # variable -> player of its first path node
    paths: dict[int, tuple[int, ...]]         # variable -> all path players
    clauses: tuple[tuple[int, ...], ...]      # clause -> players of gadget nodes 0..7
    mode: str = "3sat"

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "vars": {str(v): h for v, h in sorted(self.heads.items())},
            "paths": {str(v): list(p) for v, p in sorted(self.paths.items())},
            "clauses": [list(c) for c in self.clauses],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ReductionMap":
        return cls(
            {int(v): int(h) for v, h in obj["vars"].items()},
            {int(v): tuple(p) for v, p in obj.get("paths", {}).items()},
            tuple(tuple(c) for c in obj["clauses"]),
            obj.get("mode", "3sat"),
        )


def reduce_3sat(formula: CnfFormula, mode: str = "3sat") -> tuple[IndivisibleGame, ReductionMap]:
    """Build the variable-path / clause-gadget game for ``formula``.

    Variable ``v`` gets a path of ``2*max(k_v, 1)`` players (``k_v`` = number
    of clauses using ``v``) whose first edge is bidirectional; even path
    positions carry ``v``'s value, odd positions its negation. A clause's
    input node reads the path node holding the *negated* literal, so it ends
    up equal to the literal.
    """
    if mode not in MODE_UTILITY:
        raise ValueError(f"unknown mode {mode!r}")
    uses: dict[int, list[int]] = {v: [] for v in range(1, formula.num_vars + 1)}
    for ci, clause in enumerate(formula.clauses):
        for v in sorted({abs(l) for l in clause}):
            uses[v].append(ci)
    edges: list[tuple[int, int]] = []
    nxt = 0
    paths: dict[int, tuple[int, ...]] = {}
    for v in range(1, formula.num_vars + 1):
        length = 2 * max(len(uses[v]), 1)
        path = tuple(range(nxt, nxt + length))
        nxt += length
        paths[v] = path
        edges.append((path[1], path[0]))
        edges.extend((path[t], path[t + 1]) for t in range(length - 1))
    gadgets = []
    for ci, clause in enumerate(formula.clauses):
        g = tuple(range(nxt, nxt + 8))
        nxt += 8
        gadgets.append(g)
        for q, lit in enumerate(padded(clause)):
            occ = uses[abs(lit)].index(ci)
            tap = paths[abs(lit)][2 * occ + (1 if lit > 0 else 0)]
            edges.append((tap, g[q]))
        edges += [(g[0], g[3]), (g[1], g[3]), (g[2], g[3]), (g[3], g[4]),
                  (g[4], g[5]), (g[5], g[6]), (g[6], g[7]), (g[7], g[5])]
    game = IndivisibleGame(DirectedGraph(nxt, tuple(sorted(set(edges)))), MODE_UTILITY[mode], Fraction(1, 2))
    rmap = ReductionMap({v: p[0] for v, p in paths.items()}, paths, tuple(gadgets), mode)
    return game, rmap


def extract_assignment(profile: Sequence[int], rmap: ReductionMap, game: IndivisibleGame) -> dict[int, bool]:
    """Read each variable off its head node; the profile must be an equilibrium."""
    bad = check_pure_nash(game, profile)
    if bad:
        raise ValueError(f"profile is not a pure equilibrium ({len(bad)} improvable players)")
    return {v: bool(profile[h]) for v, h in rmap.heads.items()}


def add_feeder_players(game: IndivisibleGame, k: int, exempt: Sequence[int] = ()) -> IndivisibleGame:
    """Append ``k`` source players feeding everyone.

    Players in ``exempt`` are fed by only the first ``k-1`` feeders.
    """
    exempt = set(exempt)
    if k < 0:
        raise ValueError("k must be nonnegative")
    if exempt and k == 0:
        raise ValueError("exempt players need k >= 1")
    if any(not 0 <= v < game.n for v in exempt):
        raise ValueError("exempt player out of range")
    n = game.n
    edges = list(game.graph.edges)
    for f in range(k):
        for v in range(n):
            if v in exempt and f == k - 1:
                continue
            edges.append((n + f, v))
    return IndivisibleGame(DirectedGraph(n + k, tuple(edges)), game.x, game.price)


def open_problem_fixture(p=Fraction(1, 2)) -> IndivisibleGame:
    """7 players, edges i -> i+1, i+2, i+4 (mod 7); X(1)=1, X(k>1)=1+p.

    The second step equals the price, so a player with one buying
    in-neighbor is indifferent. Under the tie-tolerant checks used here the
    fixture has pure equilibria (buyer sets that induce a directed 3-cycle).
    """
    p = Fraction(p)
    edges = tuple((i, (i + d) % 7) for i in range(7) for d in (1, 2, 4))
    return IndivisibleGame(DirectedGraph(7, edges), StepFunction((0, 1, 1 + p)), p)
