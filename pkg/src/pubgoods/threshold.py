"""Threshold games and their equivalence with best-shot public goods games.

In a threshold game every player picks ``x_i`` in ``[0, 1]``. A player whose
in-neighbors sum to more than ``t`` should play 0, one whose in-neighbors sum
to less than ``t`` should play 1, and a player sitting exactly at ``t`` may
play anything. The neighborhood excludes the player itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from .core import DirectedGraph, IndivisibleGame, StepFunction, Violation, as_number
from .gridsearch import Constraint, GridSearch, SearchBudgetExceeded, low_frontier_order

# Slack for comparisons against t +- eps; grid values are exact multiples,
# the slack only absorbs rounding in transcendental maps.
FLOAT_TOL = 1e-9


@dataclass(frozen=True)
class ThresholdGame:
    graph: DirectedGraph
    t: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        if not 0.0 < self.t < 1.0:
            raise ValueError("threshold t must lie in (0, 1)")

    @property
    def n(self) -> int:
        return self.graph.n

    def to_json(self) -> dict:
        return {"format": "threshold", **self.graph.to_json(), "t": self.t}

    @classmethod
    def from_json(cls, obj: dict) -> "ThresholdGame":
        return cls(DirectedGraph.from_edges(obj["n"], obj.get("edges", [])), float(obj["t"]))


def _check_eps(t: float, eps: float) -> None:
    if not 0.0 <= eps < min(t, 1.0 - t):
        raise ValueError(f"eps={eps} must lie in [0, min(t, 1-t)) = [0, {min(t, 1 - t)})")


def player_ok(xi: float, total: float, t: float, eps: float) -> bool:
    """Band condition for one player with in-neighbor sum ``total``."""
    if total > t + eps + FLOAT_TOL:
        return xi <= eps + FLOAT_TOL
    if total < t - eps - FLOAT_TOL:
        return xi >= 1.0 - eps - FLOAT_TOL
    return True


def check_threshold_eq(tg: ThresholdGame, x: Sequence[float], eps: float = 0.0) -> list[Violation]:
    _check_eps(tg.t, eps)
    if len(x) != tg.n:
        raise ValueError(f"profile has length {len(x)}, expected {tg.n}")
    out = []
    for i in range(tg.n):
        xi = float(x[i])
        if not -FLOAT_TOL <= xi <= 1.0 + FLOAT_TOL:
            raise ValueError(f"profile entry {xi} outside [0, 1]")
        total = sum(float(x[j]) for j in tg.graph.in_neighbors[i])
        if not player_ok(xi, total, tg.t, eps):
            target = 0.0 if total > tg.t else 1.0
            out.append(Violation(i, target, abs(xi - target) - eps))
    return out


# --- reductions -------------------------------------------------------------


def pgg_from_threshold(tg: ThresholdGame) -> IndivisibleGame:
    """Best-shot game on the same graph with price ``e^{-t}``."""
    return IndivisibleGame(tg.graph, StepFunction.max_utility(), math.exp(-tg.t))


def threshold_profile_from_pgg_nash(s: Sequence[float]) -> tuple[float, ...]:
    out = []
    for si in s:
        si = float(si)
        if not 0.0 <= si <= 1.0:
            raise ValueError(f"probability {si} outside [0, 1]")
        out.append(1.0 if si >= 1.0 else min(-math.log1p(-si), 1.0))
    return tuple(out)


def threshold_from_pgg(game: IndivisibleGame) -> ThresholdGame:
    if not game.x.is_max:
        raise ValueError("only the best-shot utility X(k) = min(k, 1) is supported")
    if not 0 < game.price < 1:
        raise ValueError("price must lie in (0, 1)")
    return ThresholdGame(game.graph, 0.5)


def pgg_profile_from_threshold_eq(x: Sequence[float], p: float, eps: float) -> tuple[float, ...]:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError("price must lie in (0, 1)")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return tuple(1.0 - p ** (2.0 * float(xi)) if float(xi) <= 0.5 + eps else 1.0 for xi in x)


def cp_constant(p: float) -> float:
    """Error blow-up ``-4 p ln p`` of the threshold-to-game profile map."""
    p = float(p)
    return -4.0 * p * math.log(p)


def log_bounds_hold(t: float, eps: float) -> tuple[bool, bool]:
    """The two logarithm bounds behind the 8 eps factor, for ``eps < min(0.1, t/8, (1-t)/8)``."""
    upper = -math.log(math.exp(-t) - eps) < t + 8 * eps
    lower = -math.log(math.exp(-t) + eps) > t - 8 * eps
    return upper, lower


# --- grid oracles -----------------------------------------------------------


def grid_values(delta: float) -> tuple[float, ...]:
    """``{0, delta, 2 delta, ...}`` up to ``ceil(1/delta)`` steps, clamped to 1."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    steps = math.ceil(1.0 / delta - FLOAT_TOL)
    return tuple(sorted({min(k * delta, 1.0) for k in range(steps + 1)}))


def threshold_search(
    tg: ThresholdGame,
    eps: float,
    domains: Sequence[Sequence[float]],
    order: Sequence[int] | None = None,
    extra: Sequence[Constraint] = (),
    max_nodes: int | None = 50_000_000,
) -> GridSearch:
    """A configured search over per-player value lists; see :class:`GridSearch`."""
    _check_eps(tg.t, eps)
    t = tg.t
    cons = []
    for i in range(tg.n):
        scope = (i,) + tg.graph.in_neighbors[i]

        def pred(vals, t=t, eps=eps):
            return player_ok(vals[0], sum(vals[1:]), t, eps)

        cons.append(Constraint(scope, pred))
    cons.extend(extra)
    if order == "auto":
        order = low_frontier_order(tg.n, [c.scope for c in cons])
    return GridSearch(domains, cons, order=order, max_nodes=max_nodes)


class BandSearch:
    """Depth-first grid search specialized to threshold games.

    Visits profiles in the same order as :func:`threshold_search` and so
    yields the same solutions in the same order. A player's condition only
    reads its own value and the sum of its in-neighbors, so a dead end is
    remembered by ``(own value, partial in-sum)`` of every player that is
    partly assigned, where the own value only counts through the band it
    falls in and in-sums above ``t + eps`` collapse to one state. A
    player already playing above ``eps`` whose partial in-sum passed
    ``t + eps`` is rejected before the rest of its neighborhood is set.
    """

    _HIGH = float("inf")

    def __init__(self, tg: ThresholdGame, eps: float, domains: Sequence[Sequence[float]], order: Sequence[int] | str | None = None, max_nodes: int | None = 50_000_000):
        _check_eps(tg.t, eps)
        self.tg, self.eps = tg, eps
        self.domains = [tuple(float(v) for v in d) for d in domains]
        if len(self.domains) != tg.n:
            raise ValueError(f"expected {tg.n} domains, got {len(self.domains)}")
        n = tg.n
        ins = tg.graph.in_neighbors
        if order == "auto":
            order = low_frontier_order(n, [(i,) + ins[i] for i in range(n)])
        self.order = list(range(n)) if order is None else list(order)
        if sorted(self.order) != list(range(n)):
            raise ValueError("order must be a permutation of the players")
        self.max_nodes = max_nodes
        self.nodes = 0
        pos = {v: k for k, v in enumerate(self.order)}
        first = [min(pos[u] for u in (i,) + ins[i]) for i in range(n)]
        last = [max(pos[u] for u in (i,) + ins[i]) for i in range(n)]
        self._outs = [tuple(w for w in range(n) if v in ins[w]) for v in range(n)]
        self._done = [[i for i in range(n) if last[i] == k] for k in range(n)]
        self._open = [tuple(i for i in range(n) if first[i] < k <= last[i]) for k in range(n + 1)]

    def _state(self, own: list, psum: list, i: int):
        # The condition reads x_i only through x_i <= eps and x_i >= 1 - eps.
        t, eps = self.tg.t, self.eps
        xi = own[i]
        cls = None if xi is None else (xi <= eps + FLOAT_TOL, xi >= 1.0 - eps - FLOAT_TOL)
        if psum[i] > t + eps + FLOAT_TOL:
            return cls, self._HIGH
        if cls is not None and cls[0] and psum[i] >= t - eps - FLOAT_TOL:
            return cls, "met"
        return cls, round(psum[i], 12)

    def solutions(self) -> Iterator[tuple[float, ...]]:
        if any(len(d) == 0 for d in self.domains):
            return
        n = self.tg.n
        own: list = [None] * n
        psum = [0.0] * n
        yield from self._dfs(0, own, psum, set())

    def solve(self) -> tuple[float, ...] | None:
        for sol in self.solutions():
            return sol
        return None

    def _dfs(self, k: int, own: list, psum: list, failed: set) -> Iterator[tuple[float, ...]]:
        if k == self.tg.n:
            yield tuple(own)
            return
        key = (k, tuple(self._state(own, psum, i) for i in self._open[k]))
        if key in failed:
            return
        t, eps = self.tg.t, self.eps
        v = self.order[k]
        touched = (v,) + self._outs[v]
        found = False
        for val in self.domains[v]:
            self.nodes += 1
            if self.max_nodes is not None and self.nodes > self.max_nodes:
                raise SearchBudgetExceeded(f"search exceeded {self.max_nodes} nodes")
            own[v] = val
            for w in self._outs[v]:
                psum[w] += val
            ok = all(player_ok(own[i], psum[i], t, eps) for i in self._done[k])
            if ok:
                ok = not any(own[i] is not None and own[i] > eps + FLOAT_TOL and psum[i] > t + eps + FLOAT_TOL for i in touched)
            if ok:
                for sol in self._dfs(k + 1, own, psum, failed):
                    found = True
                    yield sol
            for w in self._outs[v]:
                psum[w] -= val
        own[v] = None
        if not found:
            failed.add(key)


def grid_search_threshold_eq(tg: ThresholdGame, eps: float, delta: float, order: Sequence[int] | str | None = None, max_nodes: int | None = 50_000_000) -> tuple[float, ...] | None:
    """First eps-equilibrium on the delta grid in the search order, or None.

    With the natural order this is the lexicographically smallest one.
    """
    grid = grid_values(delta)
    return BandSearch(tg, eps, [grid] * tg.n, order=order, max_nodes=max_nodes).solve()


def all_threshold_eq(tg: ThresholdGame, eps: float, delta: float, max_nodes: int | None = 50_000_000) -> Iterator[tuple[float, ...]]:
    grid = grid_values(delta)
    return BandSearch(tg, eps, [grid] * tg.n, max_nodes=max_nodes).solutions()


def log_grid(delta: float) -> tuple[float, ...]:
    """Mixed strategies ``1 - e^{-x}`` for ``x`` on the delta grid, plus 1."""
    return tuple(sorted({1.0 - math.exp(-x) for x in grid_values(delta)} | {1.0}))


def _pgg_player_ok(si: float, others: Sequence[float], p: float, eps: float) -> bool:
    # Best-shot utility: playing 0 pays 1 - prod(1 - s_j), playing 1 pays 1 - p.
    prod = 1.0
    for sj in others:
        prod *= 1.0 - sj
    u0, u1 = 1.0 - prod, 1.0 - p
    best = max(u0, u1)
    if si < 1.0 and best - u0 > eps + 1e-12:
        return False
    if si > 0.0 and best - u1 > eps + 1e-12:
        return False
    return True


def grid_search_pgg_nash(
    game: IndivisibleGame,
    eps: float,
    values: Sequence[float],
    order: Sequence[int] | str | None = None,
    max_nodes: int | None = 50_000_000,
) -> tuple[float, ...] | None:
    """First eps-well-supported Nash of a best-shot game with all mixes in ``values``."""
    if not game.x.is_max:
        raise ValueError("only the best-shot utility is supported")
    p = float(game.price)
    cons = []
    for i in range(game.n):
        scope = (i,) + game.graph.in_neighbors[i]
        cons.append(Constraint(scope, lambda vals, p=p: _pgg_player_ok(vals[0], vals[1:], p, eps)))
    if order == "auto":
        order = low_frontier_order(game.n, [c.scope for c in cons])
    return GridSearch([tuple(values)] * game.n, cons, order=order, max_nodes=max_nodes).solve()


def as_float_profile(values: Sequence) -> tuple[float, ...]:
    return tuple(float(as_number(v)) if not isinstance(v, float) else v for v in values)

