"""Divisible summation games and the win-lose bimatrix reduction.

A player buys any amount ``s_i >= 0`` at unit price ``p < 1`` and values the
total provision in its closed neighborhood through ``min(x, 1)``. The best
response is therefore ``max(1 - sum of in-neighbors, 0)``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import TOL, DirectedGraph, Violation
from .gridsearch import Constraint, GridSearch, low_frontier_order


@dataclass(frozen=True)
class SumGame:
    graph: DirectedGraph
    price: float = 0.5

    def __post_init__(self):
        if not 0.0 < float(self.price) < 1.0:
            raise ValueError("price must lie in (0, 1)")

    @property
    def n(self) -> int:
        return self.graph.n

    def to_json(self) -> dict:
        return {"format": "sumgame", **self.graph.to_json(), "price": float(self.price)}

    @classmethod
    def from_json(cls, obj: dict) -> "SumGame":
        return cls(DirectedGraph.from_edges(obj["n"], obj.get("edges", [])), float(obj.get("price", 0.5)))


def best_response_sum(game: SumGame, s: Sequence[float], i: int) -> float:
    if not 0 <= i < game.n:
        raise IndexError(f"player {i} out of range")
    return max(1.0 - sum(float(s[j]) for j in game.graph.in_neighbors[i]), 0.0)


def _check_nonneg(s: Sequence[float], n: int) -> None:
    if len(s) != n:
        raise ValueError(f"profile has length {len(s)}, expected {n}")
    if any(float(v) < 0 for v in s):
        raise ValueError("profile entries must be nonnegative")


def check_eps_pure_divisible(game: SumGame, s: Sequence[float], eps: float = 0.0) -> list[Violation]:
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    _check_nonneg(s, game.n)
    out = []
    for i in range(game.n):
        br = best_response_sum(game, s, i)
        gap = abs(float(s[i]) - br)
        if gap > eps + TOL:
            out.append(Violation(i, br, gap))
    return out


def residual(game: SumGame, s: Sequence[float]) -> float:
    return max((abs(float(s[i]) - best_response_sum(game, s, i)) for i in range(game.n)), default=0.0)


@dataclass
class DynamicsResult:
    profile: tuple[float, ...]
    residual: float
    history: list[float] = field(default_factory=list)


def best_response_dynamics(game: SumGame, init: Sequence[float], iters: int, damping: float = 0.5) -> DynamicsResult:
    """Damped simultaneous best responses; no convergence promise."""
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    _check_nonneg(init, game.n)
    s = np.asarray(init, dtype=float)
    ins = game.graph.in_neighbors
    history = [residual(game, s)]
    for _ in range(iters):
        br = np.array([max(1.0 - s[list(ins[i])].sum(), 0.0) for i in range(game.n)])
        s = (1.0 - damping) * s + damping * br
        history.append(residual(game, s))
    return DynamicsResult(tuple(float(v) for v in s), history[-1], history)


# --- win-lose games ---------------------------------------------------------


@dataclass(frozen=True)
class WinLoseGame:
    R: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=int)
        C = np.asarray(self.C, dtype=int)
        if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape != C.shape:
            raise ValueError("R and C must be square matrices of the same size")
        if R.shape[0] == 0:
            raise ValueError("empty game")
        for name, M in (("R", R), ("C", C)):
            if not np.isin(M, (-1, 0)).all():
                raise ValueError(f"{name} entries must be 0 or -1")
        if not (R == 0).any(axis=0).all():
            raise ValueError("every column of R needs a 0 entry")
        if not (C == 0).any(axis=1).all():
            raise ValueError("every row of C needs a 0 entry")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.R.shape[0]

    def to_json(self) -> dict:
        return {"format": "winlose", "R": self.R.tolist(), "C": self.C.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "WinLoseGame":
        return cls(np.array(obj["R"]), np.array(obj["C"]))


def dominated_strategies(wl: WinLoseGame) -> list[str]:
    """Weakly dominated pure strategies, as lint messages."""
    msgs = []
    for who, M in (("row", wl.R), ("column", wl.C.T)):
        for a, b in itertools.permutations(range(wl.n), 2):
            if (M[b] >= M[a]).all() and (M[b] > M[a]).any():
                msgs.append(f"{who} strategy {a} is weakly dominated by {b}")
    return msgs


def warn_dominated(wl: WinLoseGame) -> None:
    for msg in dominated_strategies(wl):
        warnings.warn(msg, stacklevel=2)


def symmetrize(wl: WinLoseGame) -> tuple[np.ndarray, np.ndarray]:
    n = wl.n
    ones = -np.ones((n, n), dtype=int)
    A = np.block([[ones, wl.R], [wl.C.T, ones]])
    B = A.T.copy()
    assert (A == B.T).all()
    return A, B


def adjacency_from_winlose(wl: WinLoseGame) -> np.ndarray:
    A, _ = symmetrize(wl)
    return -A.T - np.eye(A.shape[0], dtype=int)


def game_from_winlose(wl: WinLoseGame, price: float = 0.5) -> SumGame:
    E = adjacency_from_winlose(wl)
    edges = tuple((int(j), int(i)) for j, i in zip(*np.nonzero(E == 1)))
    return SumGame(DirectedGraph(E.shape[0], edges), price)


@dataclass(frozen=True)
class BimatrixProfile:
    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        for v in (self.x, self.y):
            if any(q < 0 for q in v) or abs(sum(v) - 1.0) > 1e-12:
                raise ValueError("each half must be a probability vector")

    def to_json(self) -> dict:
        return {"x": list(self.x), "y": list(self.y)}


def half_masses(s: Sequence[float], eps: float) -> tuple[float, float]:
    n = len(s) // 2
    shifted = np.maximum(np.asarray(s, dtype=float) - eps, 0.0)
    return float(shifted[:n].sum()), float(shifted[n:].sum())


def nash_from_game_profile(s: Sequence[float], eps: float, wl: WinLoseGame) -> BimatrixProfile:
    """Shift by eps, clamp at 0, split into halves and normalize each."""
    n = wl.n
    if len(s) != 2 * n:
        raise ValueError(f"profile has length {len(s)}, expected {2 * n}")
    shifted = np.maximum(np.asarray(s, dtype=float) - eps, 0.0)
    x, y = shifted[:n], shifted[n:]
    if x.sum() <= 0 or y.sum() <= 0:
        raise ValueError("a half has zero mass after the shift; eps is too large for this profile")
    return BimatrixProfile(tuple(float(v) for v in x / x.sum()), tuple(float(v) for v in y / y.sum()))


def bimatrix_regret(wl: WinLoseGame, prof: BimatrixProfile, supp_tol: float = 0.0) -> float:
    """Worst gap between a supported pure strategy and the best response."""
    x = np.asarray(prof.x)
    y = np.asarray(prof.y)
    row = wl.R @ y
    col = x @ wl.C
    r1 = max((row.max() - row[i] for i in range(wl.n) if x[i] > supp_tol), default=0.0)
    r2 = max((col.max() - col[j] for j in range(wl.n) if y[j] > supp_tol), default=0.0)
    return float(max(r1, r2))


# --- equilibrium finders ----------------------------------------------------


def exact_equilibria(game: SumGame, tol: float = 1e-9) -> list[tuple[float, ...]]:
    """Equilibria found by enumerating supports and solving the tight system.

    On support S every player satisfies ``s_i + sum(in-neighbors) = 1``;
    players off S need their in-neighbor sum to be at least 1. Only
    supports with a unique solution are reported.
    """
    n = game.n
    D = np.eye(n)
    for j, i in game.graph.edges:
        D[i, j] = 1.0
    found = []
    for size in range(1, n + 1):
        for supp in itertools.combinations(range(n), size):
            M = D[np.ix_(supp, supp)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            sol = np.linalg.solve(M, np.ones(size))
            if (sol < -tol).any():
                continue
            s = np.zeros(n)
            s[list(supp)] = np.clip(sol, 0.0, None)
            if not check_eps_pure_divisible(game, s, tol):
                found.append(tuple(float(v) for v in s))
    if n == 0:
        found.append(())
    return found


def local_grid_equilibria(game: SumGame, center: Sequence[float], eps: float, radius: int = 1):
    """All eps-equilibria on the grid ``center + eps*k`` with ``|k| <= radius``."""
    doms = []
    for c in center:
        vals = sorted({round(c + k * eps, 15) for k in range(-radius, radius + 1)})
        doms.append(tuple(v for v in vals if 0.0 <= v <= 1.0))
    cons = []
    for i in range(game.n):
        scope = (i,) + game.graph.in_neighbors[i]

        def pred(vals, eps=eps):
            return abs(vals[0] - max(1.0 - sum(vals[1:]), 0.0)) <= eps + TOL

        cons.append(Constraint(scope, pred))
    order = low_frontier_order(game.n, [c.scope for c in cons])
    return GridSearch(doms, cons, order=order).solutions()


def random_winlose(n: int, rng: np.random.Generator, density: float = 0.5) -> WinLoseGame:
    """Random instance meeting the zero-entry conditions (rejection sampling)."""
    while True:
        R = -(rng.random((n, n)) < density).astype(int)
        C = -(rng.random((n, n)) < density).astype(int)
        if (R == 0).any(axis=0).all() and (C == 0).any(axis=1).all():
            return WinLoseGame(R, C)
