"""Tree decompositions and the bag-table DP for approximate threshold equilibria.

The DP runs on a nice decomposition rooted at an empty bag. Every table maps
a state ``(s, c)`` to a back-pointer, where ``s`` holds the grid strategies of
the bag vertices and ``c`` the capped in-neighbor sums each bag vertex
already receives from vertices that have left the bags below. Values are
integers counting grid steps of size ``delta = 1/D``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .core import DirectedGraph
from .threshold import FLOAT_TOL, BandSearch, ThresholdGame, _check_eps, grid_values, player_ok


@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple[frozenset, ...]
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "bags", tuple(frozenset(int(v) for v in b) for b in self.bags))
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0) - 1

    def to_json(self) -> dict:
        return {"format": "td", "bags": [sorted(b) for b in self.bags], "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, obj: dict) -> "TreeDecomposition":
        return cls(tuple(frozenset(b) for b in obj["bags"]), tuple(tuple(e) for e in obj.get("edges", [])))

    def to_pace(self, n: int) -> str:
        lines = [f"s td {len(self.bags)} {self.width + 1} {n}"]
        for k, bag in enumerate(self.bags, 1):
            lines.append(" ".join(["b", str(k)] + [str(v + 1) for v in sorted(bag)]))
        lines.extend(f"{a + 1} {b + 1}" for a, b in self.edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_pace(cls, text: str) -> tuple["TreeDecomposition", int]:
        """Parse PACE ``.td`` text; returns the decomposition and the vertex count."""
        bags: dict[int, frozenset] = {}
        edges = []
        header = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            parts = raw.split()
            if not parts or parts[0] == "c":
                continue
            try:
                if parts[0] == "s":
                    if parts[1] != "td" or len(parts) != 5:
                        raise ValueError("expected 's td <bags> <maxbagsize> <n>'")
                    header = (int(parts[2]), int(parts[3]), int(parts[4]))
                elif parts[0] == "b":
                    bags[int(parts[1])] = frozenset(int(v) - 1 for v in parts[2:])
                else:
                    if len(parts) != 2:
                        raise ValueError("expected an edge line '<a> <b>'")
                    edges.append((int(parts[0]) - 1, int(parts[1]) - 1))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        if header is None:
            raise ValueError("missing 's td' header line")
        count, _, n = header
        if sorted(bags) != list(range(1, count + 1)):
            raise ValueError(f"expected bags numbered 1..{count}, got {sorted(bags)}")
        return cls(tuple(bags[k] for k in range(1, count + 1)), tuple(edges)), n


@dataclass
class DecompositionReport:
    width: int
    violations: list[tuple[str, object]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"ok": self.ok, "width": self.width, "violations": [{"property": p, "witness": repr(w)} for p, w in self.violations]}


def _is_tree(m: int, edges: Sequence[tuple[int, int]]) -> list[tuple[str, object]]:
    out: list[tuple[str, object]] = []
    for a, b in edges:
        if not (0 <= a < m and 0 <= b < m) or a == b:
            out.append(("tree", f"bad tree edge {(a, b)}"))
    if out:
        return out
    if m and len(edges) != m - 1:
        out.append(("tree", f"{len(edges)} tree edges for {m} bags"))
    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            out.append(("tree", f"cycle through tree edge {(a, b)}"))
        parent[ra] = rb
    if m and len({find(a) for a in range(m)}) != 1:
        out.append(("tree", "bag tree is disconnected"))
    return out


def validate_decomposition(g: DirectedGraph, td: TreeDecomposition) -> DecompositionReport:
    report = DecompositionReport(td.width)
    report.violations.extend(_is_tree(len(td.bags), td.edges))
    covered = set().union(*td.bags) if td.bags else set()
    for v in sorted(covered):
        if not 0 <= v < g.n:
            report.violations.append(("vertices", f"bag vertex {v} not in graph"))
    for v in range(g.n):
        if v not in covered:
            report.violations.append(("vertices", v))
    for u, v in sorted(g.undirected_edges()):
        if not any(u in b and v in b for b in td.bags):
            report.violations.append(("edges", (u, v)))
    if any(p == "tree" for p, _ in report.violations):
        return report
    adj: list[list[int]] = [[] for _ in td.bags]
    for a, b in td.edges:
        adj[a].append(b)
        adj[b].append(a)
    for v in sorted(covered):
        holders = {k for k, b in enumerate(td.bags) if v in b}
        start = min(holders)
        seen = {start}
        stack = [start]
        while stack:
            a = stack.pop()
            for b in adj[a]:
                if b in holders and b not in seen:
                    seen.add(b)
                    stack.append(b)
        if seen != holders:
            report.violations.append(("connected", v))
    return report


# --- nice decompositions ----------------------------------------------------

LEAF, ADD, REMOVE, JOIN = "leaf", "add", "remove", "join"


@dataclass(frozen=True)
class NiceNode:
    kind: str
    bag: frozenset
    children: tuple[int, ...] = ()
    vertex: int | None = None


@dataclass(frozen=True)
class NiceTreeDecomposition:
    """Nodes are stored children-first; the last node is the (empty) root."""

    nodes: tuple[NiceNode, ...]

    @property
    def root(self) -> int:
        return len(self.nodes) - 1

    @property
    def width(self) -> int:
        return max((len(x.bag) for x in self.nodes), default=0) - 1

    def as_decomposition(self) -> TreeDecomposition:
        edges = tuple((c, k) for k, x in enumerate(self.nodes) for c in x.children)
        return TreeDecomposition(tuple(x.bag for x in self.nodes), edges)

    def check_shape(self) -> list[str]:
        problems = []
        for k, x in enumerate(self.nodes):
            if any(c >= k for c in x.children):
                problems.append(f"node {k} has a child stored after it")
                continue
            kids = [self.nodes[c] for c in x.children]
            if x.kind == LEAF and (kids or x.bag):
                problems.append(f"leaf {k} is not an empty childless bag")
            elif x.kind == ADD and (len(kids) != 1 or x.vertex in kids[0].bag or x.bag != kids[0].bag | {x.vertex}):
                problems.append(f"add node {k} is malformed")
            elif x.kind == REMOVE and (len(kids) != 1 or x.vertex not in kids[0].bag or x.bag != kids[0].bag - {x.vertex}):
                problems.append(f"remove node {k} is malformed")
            elif x.kind == JOIN and (len(kids) != 2 or any(y.bag != x.bag for y in kids)):
                problems.append(f"join node {k} is malformed")
        if self.nodes and self.nodes[-1].bag:
            problems.append("root bag is not empty")
        return problems


def merge_subset_bags(td: TreeDecomposition) -> TreeDecomposition:
    """Contract tree edges whose one bag contains the other."""
    bags = {k: b for k, b in enumerate(td.bags)}
    adj: dict[int, set[int]] = {k: set() for k in bags}
    for a, b in td.edges:
        adj[a].add(b)
        adj[b].add(a)
    changed = True
    while changed:
        changed = False
        for a in sorted(adj):
            for b in sorted(adj[a]):
                if bags[a] <= bags[b]:
                    keep, drop = b, a
                elif bags[b] <= bags[a]:
                    keep, drop = a, b
                else:
                    continue
                for c in adj.pop(drop):
                    adj[c].discard(drop)
                    if c != keep:
                        adj[c].add(keep)
                        adj[keep].add(c)
                del bags[drop]
                changed = True
                break
            if changed:
                break
    index = {k: i for i, k in enumerate(sorted(bags))}
    edges = tuple(sorted({(index[min(a, b)], index[max(a, b)]) for a in adj for b in adj[a]}))
    return TreeDecomposition(tuple(bags[k] for k in sorted(bags)), edges)


def to_nice(td: TreeDecomposition, g: DirectedGraph | None = None) -> NiceTreeDecomposition:
    if g is not None:
        report = validate_decomposition(g, td)
        if not report.ok:
            raise ValueError(f"invalid decomposition: {report.violations}")
    else:
        problems = _is_tree(len(td.bags), td.edges)
        if problems:
            raise ValueError(f"invalid decomposition: {problems}")
    nodes: list[NiceNode] = []
    if not td.bags:
        return NiceTreeDecomposition((NiceNode(LEAF, frozenset()),))
    td = merge_subset_bags(td)
    adj: list[list[int]] = [[] for _ in td.bags]
    for a, b in td.edges:
        adj[a].append(b)
        adj[b].append(a)

    def emit(kind, bag, children=(), vertex=None) -> int:
        nodes.append(NiceNode(kind, frozenset(bag), tuple(children), vertex))
        return len(nodes) - 1

    def walk(top: int, have: frozenset, target: frozenset) -> int:
        for v in sorted(have - target):
            have = have - {v}
            top = emit(REMOVE, have, (top,), v)
        for v in sorted(target - have):
            have = have | {v}
            top = emit(ADD, have, (top,), v)
        return top

    # Iterative post-order so deep decompositions do not hit the recursion limit.
    order, parent = [], {0: None}
    stack = [0]
    while stack:
        a = stack.pop()
        order.append(a)
        for b in adj[a]:
            if b not in parent:
                parent[b] = a
                stack.append(b)
    built: dict[int, int] = {}
    for a in reversed(order):
        bag = td.bags[a]
        kids = [b for b in adj[a] if parent.get(b) == a]
        if not kids:
            built[a] = walk(emit(LEAF, ()), frozenset(), bag)
            continue
        tops = [walk(built[b], td.bags[b], bag) for b in kids]
        top = tops[0]
        for other in tops[1:]:
            top = emit(JOIN, bag, (top, other))
        built[a] = top
    walk(built[0], td.bags[0], frozenset())
    return NiceTreeDecomposition(tuple(nodes))


def greedy_decomposition(g: DirectedGraph) -> TreeDecomposition:
    """Min-degree elimination; valid but with no optimality promise."""
    if g.n == 0:
        return TreeDecomposition(())
    adj = {v: set() for v in range(g.n)}
    for u, v in g.undirected_edges():
        adj[u].add(v)
        adj[v].add(u)
    elim: list[int] = []
    bags: list[frozenset] = []
    while adj:
        v = min(adj, key=lambda u: (len(adj[u]), u))
        nbrs = adj.pop(v)
        bags.append(frozenset(nbrs | {v}))
        elim.append(v)
        for a in nbrs:
            adj[a].discard(v)
            adj[a].update(nbrs - {a})
    pos = {v: k for k, v in enumerate(elim)}
    edges = []
    for k, bag in enumerate(bags[:-1]):
        rest = [pos[u] for u in bag if pos[u] > k]
        edges.append((k, min(rest) if rest else k + 1))
    return merge_subset_bags(TreeDecomposition(tuple(bags), tuple(edges)))


def path_decomposition_of_cycle(n: int) -> TreeDecomposition:
    """Width-2 decomposition of a cycle ``0 -> 1 -> ... -> n-1 -> 0``."""
    if n < 3:
        return TreeDecomposition((frozenset(range(n)),))
    bags = tuple(frozenset({0, i, i + 1}) for i in range(1, n - 1))
    return TreeDecomposition(bags, tuple((k, k + 1) for k in range(len(bags) - 1)))


# --- discretization ---------------------------------------------------------


def choose_delta(eps: float, n: int, d: int, log: Callable[[float], float] = math.log) -> float:
    """``max(eps/(2d), eps/(16 log n))`` rounded down to a reciprocal integer."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    raw = max(eps / (2 * d), eps / (16 * log(n)))
    return 1.0 / math.ceil(1.0 / raw - FLOAT_TOL)


def grid_steps(delta: float) -> int:
    steps = round(1.0 / delta)
    if steps < 1 or abs(steps * delta - 1.0) > FLOAT_TOL:
        raise ValueError(f"delta={delta} does not divide 1")
    return steps


def exact_equilibrium_by_refinement(tg: ThresholdGame, max_k: int = 40, max_nodes: int | None = 2_000_000) -> tuple[float, ...] | None:
    """First exact equilibrium on the grids 1/k for k = 1, 2, ..., max_k."""
    for k in range(1, max_k + 1):
        x = BandSearch(tg, 0.0, [grid_values(1.0 / k)] * tg.n, order="auto", max_nodes=max_nodes).solve()
        if x is not None:
            return x
    return None


def rounding_neighborhood(center: Sequence[float], delta: float) -> list[tuple[float, ...]]:
    """Per player, the delta-grid points just below and above the center value."""
    steps = grid_steps(delta)
    out = []
    for v in center:
        lo = math.floor(v * steps + FLOAT_TOL)
        hi = math.ceil(v * steps - FLOAT_TOL)
        out.append(tuple(sorted({lo / steps, hi / steps})))
    return out


def rounded_grid_equilibrium(tg: ThresholdGame, center: Sequence[float], eps: float, delta: float) -> tuple[float, ...] | None:
    """An eps-equilibrium on the delta grid among the roundings of ``center``."""
    return BandSearch(tg, eps, rounding_neighborhood(center, delta), order="auto").solve()


# --- the DP -----------------------------------------------------------------


@dataclass
class DpResult:
    profile: tuple[float, ...] | None
    tables: list[dict] | None = None
    states: int = 0


def _ok_table(steps: int, t: float, eps: float) -> list[list[bool]]:
    delta = 1.0 / steps
    return [[player_ok(s * delta, c * delta, t, eps) for c in range(steps + 1)] for s in range(steps + 1)]


def saturation_level(ok: list[list[bool]]) -> int:
    """Smallest sum beyond which no player's verdict changes any more."""
    top = len(ok[0]) - 1
    cap = top
    while cap > 0 and all(row[cap - 1] == row[top] for row in ok):
        cap -= 1
    return cap


def dp_solve(
    tg: ThresholdGame,
    ntd: NiceTreeDecomposition,
    eps: float,
    delta: float,
    keep_tables: bool = False,
    saturate: bool = True,
    prune: bool = True,
) -> DpResult:
    """Find an eps-equilibrium on the delta grid, or prove none exists there.

    Accumulated sums are capped at 1, or with ``saturate`` at the first grid
    value past which the band check is constant; both are exact. ``prune``
    drops states in which some bag vertex already sees a saturated in-sum it
    cannot accept; sums only grow, so such states never reach the root.
    """
    _check_eps(tg.t, eps)
    steps = grid_steps(delta)
    problems = ntd.check_shape()
    if problems:
        raise ValueError(f"not a nice decomposition: {problems}")
    report = validate_decomposition(tg.graph, ntd.as_decomposition())
    if not report.ok:
        raise ValueError(f"decomposition does not match the graph: {report.violations}")
    ok = _ok_table(steps, tg.t, eps)
    sat = saturation_level(ok)
    cap = sat if saturate else steps
    ins = [set(x) for x in tg.graph.in_neighbors]
    outs = tg.graph.out_neighbors
    tables: list[dict] = []
    order: list[tuple[int, ...]] = []
    states = 0
    for node in ntd.nodes:
        verts = tuple(sorted(node.bag))
        table: dict = {}
        if node.kind == LEAF:
            table[((), ())] = None
        elif node.kind == ADD:
            (child,) = node.children
            cverts = order[child]
            at = verts.index(node.vertex)
            for key in tables[child]:
                s, c = key
                for val in range(steps + 1):
                    table[(s[:at] + (val,) + s[at:], c[:at] + (0,) + c[at:])] = key
        elif node.kind == REMOVE:
            (child,) = node.children
            cverts = order[child]
            v = node.vertex
            at = cverts.index(v)
            in_bag = [k for k, u in enumerate(cverts) if u in ins[v]]
            feeds = [k for k, u in enumerate(cverts) if u in outs[v] and u != v]
            for key in tables[child]:
                s, c = key
                total = min(c[at] + sum(s[k] for k in in_bag), cap)
                if not ok[s[at]][total]:
                    continue
                if feeds and s[at]:
                    c = list(c)
                    for k in feeds:
                        c[k] = min(c[k] + s[at], cap)
                    c = tuple(c)
                new = (s[:at] + s[at + 1:], c[:at] + c[at + 1:])
                if new not in table:
                    table[new] = key
        elif node.kind == JOIN:
            left, right = node.children
            by_s = defaultdict(list)
            for key in tables[right]:
                by_s[key[0]].append(key[1])
            for s, c1 in tables[left]:
                for c2 in by_s.get(s, ()):
                    c = tuple(min(a + b, cap) for a, b in zip(c1, c2))
                    if (s, c) not in table:
                        table[(s, c)] = ((s, c1), (s, c2))
        else:
            raise ValueError(f"unknown node kind {node.kind}")
        if prune and verts:
            watch = [(k, [m for m, u in enumerate(verts) if u in ins[v]]) for k, v in enumerate(verts)]
            if node.kind == ADD:
                watch = [(k, m) for k, m in watch if verts[k] == node.vertex or verts.index(node.vertex) in m]
            elif node.kind == REMOVE:
                watch = [(k, m) for k, m in watch if verts[k] in outs[node.vertex]]
            if watch:
                dead = [key for key in table if any(not ok[key[0][k]][sat] and key[1][k] + sum(key[0][j] for j in m) >= sat for k, m in watch)]
                for key in dead:
                    del table[key]
        states += len(table)
        tables.append(table)
        order.append(verts)
    root = ntd.root
    if not tables[root]:
        return DpResult(None, tables if keep_tables else None, states)
    values = [None] * tg.n
    stack = [(root, next(iter(tables[root])))]
    while stack:
        k, key = stack.pop()
        for v, val in zip(order[k], key[0]):
            values[v] = val
        node = ntd.nodes[k]
        ptr = tables[k][key]
        if node.kind == JOIN:
            stack.append((node.children[0], ptr[0]))
            stack.append((node.children[1], ptr[1]))
        elif node.children:
            stack.append((node.children[0], ptr))
    profile = tuple(min(v * delta, 1.0) for v in values)
    return DpResult(profile, tables if keep_tables else None, states)


def subtree_vertices(ntd: NiceTreeDecomposition) -> list[frozenset]:
    """All vertices appearing at or below each node."""
    out: list[frozenset] = []
    for node in ntd.nodes:
        acc = set(node.bag)
        for c in node.children:
            acc |= out[c]
        out.append(frozenset(acc))
    return out


def solve_with_decomposition(tg: ThresholdGame, eps: float, delta: float, td: TreeDecomposition | None = None) -> DpResult:
    if td is None:
        td = greedy_decomposition(tg.graph)
    return dp_solve(tg, to_nice(td, tg.graph), eps, delta)

