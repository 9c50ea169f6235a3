"""Exhaustive search over finite per-player domains.

Used as the brute-force oracle for continuous games restricted to a grid.
Variables are assigned in a fixed order; every constraint is checked as
soon as its scope is assigned. A partial assignment that has no completion
is remembered by the values of its *frontier* (assigned variables still
read by an unchecked constraint), which is exact because the remaining
search only sees the frontier.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

Predicate = Callable[[tuple], bool]


class SearchBudgetExceeded(RuntimeError):
    """Raised when a search visits more nodes than its budget allows."""


@dataclass(frozen=True)
class Constraint:
    scope: tuple[int, ...]
    pred: Predicate


def low_frontier_order(n: int, scopes: Sequence[Sequence[int]], first: Sequence[int] = ()) -> list[int]:
    """Greedy variable order keeping the set of "open" variables small."""
    var_cons: list[list[int]] = [[] for _ in range(n)]
    for c, scope in enumerate(scopes):
        for v in set(scope):
            var_cons[v].append(c)
    remaining = [len(set(s)) for s in scopes]
    open_count = [len(var_cons[v]) for v in range(n)]
    assigned = [False] * n
    frontier: set[int] = set()
    order: list[int] = []

    def assign(v: int) -> None:
        assigned[v] = True
        order.append(v)
        frontier.add(v)
        for c in var_cons[v]:
            remaining[c] -= 1
            if remaining[c] == 0:
                for u in set(scopes[c]):
                    open_count[u] -= 1
        for u in list(frontier):
            if open_count[u] == 0:
                frontier.discard(u)

    for v in first:
        if not assigned[v]:
            assign(v)
    while len(order) < n:
        cands = set()
        for u in frontier:
            for c in var_cons[u]:
                cands.update(w for w in scopes[c] if not assigned[w])
        if not cands:
            cands = {min(v for v in range(n) if not assigned[v])}
        best = None
        for v in cands:
            completed = {c for c in var_cons[v] if remaining[c] == 1}
            size = 0
            for u in frontier | {v}:
                if any(remaining[d] > 0 and d not in completed for d in var_cons[u]):
                    size += 1
            key = (size, -len(completed), v)
            if best is None or key < best:
                best = key
        assign(best[2])
    return order


class GridSearch:
    """Finite-domain constraint search with frontier nogood caching."""

    def __init__(self, domains: Sequence[Sequence], constraints: Sequence[Constraint], order: Sequence[int] | None = None, max_nodes: int | None = 50_000_000):
        self.domains = [tuple(d) for d in domains]
        self.constraints = list(constraints)
        n = len(self.domains)
        self.n = n
        if order is None:
            order = range(n)
        self.order = list(order)
        if sorted(self.order) != list(range(n)):
            raise ValueError("order must be a permutation of the variables")
        self.max_nodes = max_nodes
        self.nodes = 0
        pos = {v: k for k, v in enumerate(self.order)}
        self._checks: list[list[Constraint]] = [[] for _ in range(n)]
        last_use = [pos[v] for v in range(n)]
        for c in self.constraints:
            if not c.scope:
                raise ValueError("empty constraint scope")
            ready = max(pos[v] for v in c.scope)
            self._checks[ready].append(c)
            for v in c.scope:
                last_use[v] = max(last_use[v], ready)
        self._frontier = [tuple(v for v in self.order[:k] if last_use[v] >= k) for k in range(n + 1)]

    def _tick(self) -> None:
        self.nodes += 1
        if self.max_nodes is not None and self.nodes > self.max_nodes:
            raise SearchBudgetExceeded(f"search exceeded {self.max_nodes} nodes")

    def solve(self) -> tuple | None:
        """First solution in the search order (lexicographic if order is natural)."""
        for sol in self.solutions():
            return sol
        return None

    def exists(self) -> bool:
        return self.solve() is not None

    def solutions(self) -> Iterator[tuple]:
        if any(len(d) == 0 for d in self.domains):
            return
        assign: list = [None] * self.n
        failed: set = set()
        limit = sys.getrecursionlimit()
        if self.n + 50 > limit:
            sys.setrecursionlimit(self.n + 100)
        yield from self._dfs(0, assign, failed)

    def project(self, var) -> set:
        """Values of ``var`` (an index, or a tuple of indices) over all solutions.

        Memoized on the frontier plus the target values assigned so far, so
        this costs about as much as an exhaustive existence check.
        """
        if any(len(d) == 0 for d in self.domains):
            return set()
        targets = (var,) if isinstance(var, int) else tuple(var)
        if self.n + 50 > sys.getrecursionlimit():
            sys.setrecursionlimit(self.n + 100)
        found = self._project(0, targets, [None] * self.n, {})
        return {t[0] for t in found} if isinstance(var, int) else set(found)

    def _project(self, k: int, targets: tuple, assign: list, memo: dict) -> frozenset:
        if k == self.n:
            return frozenset([tuple(assign[v] for v in targets)])
        key = (k, tuple(assign[v] for v in self._frontier[k]), tuple(assign[v] for v in targets))
        hit = memo.get(key)
        if hit is not None:
            return hit
        x = self.order[k]
        out: set = set()
        for val in self.domains[x]:
            self._tick()
            assign[x] = val
            if all(c.pred(tuple(assign[u] for u in c.scope)) for c in self._checks[k]):
                out |= self._project(k + 1, targets, assign, memo)
        assign[x] = None
        memo[key] = result = frozenset(out)
        return result

    def _dfs(self, k: int, assign: list, failed: set) -> Iterator[tuple]:
        if k == self.n:
            yield tuple(assign)
            return
        key = (k, tuple(assign[v] for v in self._frontier[k]))
        if key in failed:
            return
        var = self.order[k]
        checks = self._checks[k]
        found = False
        for val in self.domains[var]:
            self._tick()
            assign[var] = val
            ok = True
            for c in checks:
                if not c.pred(tuple(assign[u] for u in c.scope)):
                    ok = False
                    break
            if ok:
                for sol in self._dfs(k + 1, assign, failed):
                    found = True
                    yield sol
        assign[var] = None
        if not found:
            failed.add(key)
