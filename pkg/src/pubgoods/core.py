"""Directed public goods games: data model, utilities and equilibrium checkers.

Players are ``0..n-1``. An edge ``(j, i)`` means ``i`` enjoys the good that
``j`` buys: ``j`` is an in-neighbor of ``i``. The closed neighborhood of
``i`` is ``{i}`` plus its in-neighbors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence, Union

Number = Union[int, float, Fraction]

# Absolute slack used whenever a float is compared against a tolerance.
TOL = 1e-12


def as_number(value) -> Number:
    """Parse ``"3/7"``, ints, Fractions and floats; floats stay floats."""
    if isinstance(value, (Fraction, int)) and not isinstance(value, bool):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"not a number: {value!r}")


def number_to_json(value: Number):
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else value.numerator
    return value


@dataclass(frozen=True)
class DirectedGraph:
    n: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be nonnegative")
        seen = set()
        for j, i in self.edges:
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ValueError(f"edge {(j, i)} has an endpoint outside [0, {self.n})")
            if i == j:
                raise ValueError(f"self-loop at {i}")
            if (j, i) in seen:
                raise ValueError(f"duplicate edge {(j, i)}")
            seen.add((j, i))
        object.__setattr__(self, "edges", tuple(sorted((int(j), int(i)) for j, i in self.edges)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "DirectedGraph":
        return cls(n, tuple((int(e[0]), int(e[1])) for e in edges))

    @cached_property
    def in_neighbors(self) -> tuple[tuple[int, ...], ...]:
        ins: list[list[int]] = [[] for _ in range(self.n)]
        for j, i in self.edges:
            ins[i].append(j)
        return tuple(tuple(sorted(x)) for x in ins)

    @cached_property
    def out_neighbors(self) -> tuple[tuple[int, ...], ...]:
        outs: list[list[int]] = [[] for _ in range(self.n)]
        for j, i in self.edges:
            outs[j].append(i)
        return tuple(tuple(sorted(x)) for x in outs)

    def closed_neighborhood(self, i: int) -> tuple[int, ...]:
        return (i,) + self.in_neighbors[i]

    def undirected_edges(self) -> set[tuple[int, int]]:
        return {(min(j, i), max(j, i)) for j, i in self.edges}

    def max_degree(self) -> int:
        """Maximum undirected degree (in plus out, counting each neighbor once)."""
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.undirected_edges():
            adj[u].add(v)
            adj[v].add(u)
        return max((len(a) for a in adj), default=0)

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}


def directed_cycle(n: int) -> DirectedGraph:
    return DirectedGraph(n, tuple((i, (i + 1) % n) for i in range(n)))


def bidirected(n: int, pairs: Iterable[tuple[int, int]]) -> DirectedGraph:
    edges = set()
    for a, b in pairs:
        edges.add((a, b))
        edges.add((b, a))
    return DirectedGraph(n, tuple(edges))


@dataclass(frozen=True)
class StepFunction:
    """Nondecreasing ``X(0)=0, X(1), ..., X(K)``, constant after ``K``."""

    values: tuple[Number, ...] = (Fraction(0), Fraction(1))

    def __post_init__(self):
        vals = tuple(as_number(v) for v in self.values)
        if not vals or vals[0] != 0:
            raise ValueError("X(0) must be 0")
        for a, b in zip(vals, vals[1:]):
            if b < a:
                raise ValueError("step function must be nondecreasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def max_utility(cls) -> "StepFunction":
        return cls((Fraction(0), Fraction(1)))

    def __call__(self, k: int) -> Number:
        if k < 0:
            raise ValueError("negative count")
        return self.values[min(k, len(self.values) - 1)]

    def step(self, k: int) -> Number:
        """Marginal value ``X(k+1) - X(k)`` of one more good."""
        return self(k + 1) - self(k)

    @property
    def is_max(self) -> bool:
        return all(self(k) == (1 if k else 0) for k in range(len(self.values) + 1))

    def to_json(self) -> dict:
        if self.is_max:
            return {"kind": "max"}
        return {"kind": "steps", "values": [number_to_json(v) for v in self.values]}

    @classmethod
    def from_json(cls, obj: dict) -> "StepFunction":
        kind = obj.get("kind")
        if kind == "max":
            return cls.max_utility()
        if kind == "steps":
            return cls(tuple(as_number(v) for v in obj["values"]))
        raise ValueError(f"unknown utility kind {kind!r}")


@dataclass(frozen=True)
class IndivisibleGame:
    graph: DirectedGraph
    x: StepFunction = field(default_factory=StepFunction.max_utility)
    price: Number = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "price", as_number(self.price))
        if not self.price > 0:
            raise ValueError("price must be positive")

    @property
    def n(self) -> int:
        return self.graph.n

    def to_json(self) -> dict:
        return {
            "format": "game",
            **self.graph.to_json(),
            "price": number_to_json(self.price),
            "utility": self.x.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IndivisibleGame":
        graph = DirectedGraph.from_edges(obj["n"], obj.get("edges", []))
        return cls(graph, StepFunction.from_json(obj.get("utility", {"kind": "max"})), as_number(obj["price"]))


def price_lint(game: IndivisibleGame) -> list[str]:
    """Warnings for prices that may tie with a step of X.

    Ties are avoided when the price's denominator exceeds the square of the
    largest denominator among the values of X. Only a warning: verifiers
    handle ties with weak inequalities.
    """
    msgs = []
    p = game.price
    if isinstance(p, Fraction):
        dens = [v.denominator for v in game.x.values if isinstance(v, Fraction)]
        big = max(dens, default=1)
        if p.denominator <= big * big:
            msgs.append(f"price denominator {p.denominator} <= {big}^2; ties between buying and free-riding are possible")
    for k in range(len(game.x.values)):
        if game.x.step(k) == p:
            msgs.append(f"step X({k + 1}) - X({k}) equals the price")
    return msgs


def warn_price(game: IndivisibleGame) -> None:
    for msg in price_lint(game):
        warnings.warn(msg, stacklevel=2)


@dataclass(frozen=True)
class Violation:
    player: int
    action: Number  # the better action (or target value for continuous games)
    regret: float


def _check_profile(profile: Sequence, n: int, lo=0, hi=1) -> None:
    if len(profile) != n:
        raise ValueError(f"profile has length {len(profile)}, expected {n}")
    for v in profile:
        if not lo <= v <= hi:
            raise ValueError(f"profile entry {v} outside [{lo}, {hi}]")


def _check_player(game: IndivisibleGame, i: int) -> None:
    if not 0 <= i < game.n:
        raise IndexError(f"player {i} out of range")


def pure_utility(game: IndivisibleGame, profile: Sequence[int], i: int) -> Number:
    _check_player(game, i)
    _check_profile(profile, game.n)
    total = sum(profile[j] for j in game.graph.closed_neighborhood(i))
    return game.x(total) - game.price * profile[i]


def neighbor_sum_distribution(probs: Sequence[float]) -> list[float]:
    """Distribution of a sum of independent Bernoulli variables."""
    dist = [1.0]
    for q in probs:
        q = float(q)
        nxt = [0.0] * (len(dist) + 1)
        for k, w in enumerate(dist):
            nxt[k] += w * (1.0 - q)
            nxt[k + 1] += w * q
        dist = nxt
    return dist


def expected_utility(game: IndivisibleGame, mixed: Sequence[float], i: int, action: int) -> float:
    """Expected utility of ``i`` playing ``action`` while the others mix."""
    _check_player(game, i)
    _check_profile(mixed, game.n)
    if action not in (0, 1):
        raise ValueError("action must be 0 or 1")
    dist = neighbor_sum_distribution([mixed[j] for j in game.graph.in_neighbors[i]])
    value = sum(w * float(game.x(k + action)) for k, w in enumerate(dist))
    return value - float(game.price) * action


def check_pure_nash(game: IndivisibleGame, profile: Sequence[int]) -> list[Violation]:
    _check_profile(profile, game.n)
    out = []
    for i in range(game.n):
        cur = pure_utility(game, profile, i)
        alt = list(profile)
        alt[i] = 1 - profile[i]
        dev = pure_utility(game, alt, i)
        if dev > cur:
            out.append(Violation(i, alt[i], float(dev - cur)))
    return out


def check_eps_nash(game: IndivisibleGame, mixed: Sequence[float], eps: float = 0.0, supp_tol: float = 0.0) -> list[Violation]:
    """Well-supported check: every supported action is within ``eps`` of the best."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if not 0 <= supp_tol < 1:
        raise ValueError("supp_tol must lie in [0, 1)")
    _check_profile(mixed, game.n)
    out = []
    for i in range(game.n):
        u = (expected_utility(game, mixed, i, 0), expected_utility(game, mixed, i, 1))
        best = max(u)
        support = []
        if mixed[i] < 1 - supp_tol:
            support.append(0)
        if mixed[i] > supp_tol:
            support.append(1)
        worst = max(best - u[a] for a in support)
        if worst > eps + TOL:
            out.append(Violation(i, int(u[1] > u[0]), worst))
    return out


def mixed_profile(probs: Iterable[float]) -> tuple[float, ...]:
    probs = tuple(float(q) for q in probs)
    for q in probs:
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"probability {q} outside [0, 1]")
    return probs
