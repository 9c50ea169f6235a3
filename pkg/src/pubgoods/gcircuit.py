"""Generalized circuits and their compilation into threshold games (t = 1/2).

Every gate is realized by a small network built from one elementary gadget:
``E(inputs -> v)`` adds players ``a`` and ``b`` with edges ``inputs -> a``,
``v -> a``, ``a -> b`` and ``b -> v``. In any eps-equilibrium
``x[v] = max(1/2 - sum(inputs), 0) +- eps``.

Logic values live in ``{0, 1/2}``; logic gates detour through ``{0, 1}``
via the transformer gadgets to stay error resilient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .core import DirectedGraph
from .gridsearch import Constraint, GridSearch, low_frontier_order
from .threshold import FLOAT_TOL, ThresholdGame, grid_values, threshold_search

ARITY = {
    "half": 0,
    "times_half": 1,
    "eq": 1,
    "plus": 2,
    "minus": 2,
    "less": 2,
    "and": 2,
    "or": 2,
    "not": 1,
}

# Worst-case error of each compiled gate, in multiples of the game's eps.
# COPY yields min(x, 1/2) +- 2 eps; inputs reach 1/2 + eps, so x itself is
# only matched within 3 eps. SUBTRACT loses one more eps for x1 > 1/2.
AMPLIFICATION = {
    "half": 1,
    "eq": 3,
    "plus": 2,
    "minus": 3,
    "times_half": 5,
    "less": 3,
    "and": 3,
    "or": 3,
    "not": 3,
}


@dataclass(frozen=True)
class Gate:
    type: str
    inputs: tuple[str, ...]
    output: str

    def to_json(self) -> dict:
        return {"type": self.type, "in": list(self.inputs), "out": self.output}


@dataclass(frozen=True)
class GeneralizedCircuit:
    nodes: tuple[str, ...]
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(str(v) for v in self.nodes))
        object.__setattr__(self, "gates", tuple(self.gates))
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate circuit node")
        known = set(self.nodes)
        outs = set()
        for g in self.gates:
            if g.type not in ARITY:
                raise ValueError(f"unknown gate type {g.type!r}")
            if len(g.inputs) != ARITY[g.type]:
                raise ValueError(f"gate {g.type} takes {ARITY[g.type]} inputs, got {len(g.inputs)}")
            for v in (*g.inputs, g.output):
                if v not in known:
                    raise ValueError(f"gate {g.type} uses unknown node {v!r}")
            if g.output in outs:
                raise ValueError(f"node {g.output!r} is the output of two gates")
            if g.output in g.inputs:
                raise ValueError(f"gate {g.type} feeds its output {g.output!r} back into itself")
            outs.add(g.output)

    def free_nodes(self) -> list[str]:
        outs = {g.output for g in self.gates}
        return [v for v in self.nodes if v not in outs]

    def to_json(self) -> dict:
        return {"format": "circuit", "nodes": list(self.nodes), "gates": [g.to_json() for g in self.gates]}

    @classmethod
    def from_json(cls, obj: dict) -> "GeneralizedCircuit":
        gates = tuple(Gate(str(g["type"]), tuple(str(v) for v in g.get("in", [])), str(g["out"])) for g in obj.get("gates", []))
        return cls(tuple(obj["nodes"]), gates)


# --- checking assignments ---------------------------------------------------


@dataclass(frozen=True)
class GateViolation:
    gate: int
    type: str
    expected: float
    actual: float


def _near(value: float, target: float, eps: float) -> bool:
    return abs(value - target) <= eps + FLOAT_TOL


def gate_target(gate_type: str, ins: Sequence[float], eps: float, or_high: float = 0.5) -> float | None:
    """Required output value, or None when the gate is vacuous for these inputs."""
    if gate_type == "half":
        return 0.5
    if gate_type == "times_half":
        return ins[0] / 2
    if gate_type == "eq":
        return ins[0]
    if gate_type == "plus":
        return min(ins[0] + ins[1], 0.5)
    if gate_type == "minus":
        return max(ins[0] - ins[1], 0.0)
    if gate_type == "less":
        if ins[0] < ins[1] - eps - FLOAT_TOL:
            return 0.5
        if ins[0] > ins[1] + eps + FLOAT_TOL:
            return 0.0
        return None
    hi = [_near(v, 0.5, eps) for v in ins]
    lo = [_near(v, 0.0, eps) for v in ins]
    if gate_type == "not":
        return 0.5 if lo[0] else 0.0 if hi[0] else None
    if gate_type == "and":
        if all(hi):
            return 0.5
        return 0.0 if any(lo) else None
    if gate_type == "or":
        if any(hi):
            return or_high
        return 0.0 if all(lo) else None
    raise ValueError(f"unknown gate type {gate_type!r}")


def check_assignment(c: GeneralizedCircuit, a: Mapping[str, float], eps: float, or_high: float = 0.5) -> list[GateViolation]:
    """Gate-by-gate check; ``or_high=1.0`` gives the literal table reading of OR."""
    missing = [v for v in c.nodes if v not in a]
    if missing:
        raise ValueError(f"assignment misses nodes {missing}")
    out = []
    for k, g in enumerate(c.gates):
        ins = [float(a[v]) for v in g.inputs]
        target = gate_target(g.type, ins, eps, or_high)
        actual = float(a[g.output])
        if target is not None and not _near(actual, target, eps):
            out.append(GateViolation(k, g.type, target, actual))
    return out


# --- gadget construction ----------------------------------------------------


@dataclass
class GameBuilder:
    n: int = 0
    edges: list[tuple[int, int]] = field(default_factory=list)
    labels: dict[int, str] = field(default_factory=dict)

    def fresh(self, label: str = "") -> int:
        self.n += 1
        if label:
            self.labels[self.n - 1] = label
        return self.n - 1

    def edge(self, j: int, i: int) -> None:
        self.edges.append((j, i))

    def game(self) -> ThresholdGame:
        return ThresholdGame(DirectedGraph(self.n, tuple(self.edges)), 0.5)


def elementary(b: GameBuilder, inputs: Sequence[int], v: int | None = None) -> int:
    """``x[v] = max(1/2 - sum(inputs), 0)``; returns v."""
    if v is None:
        v = b.fresh()
    a, bb = b.fresh(), b.fresh()
    for u in inputs:
        b.edge(u, a)
    b.edge(v, a)
    b.edge(a, bb)
    b.edge(bb, v)
    return v


def copy_gate(b: GameBuilder, v1: int, v: int) -> int:
    """``min(x[v1], 1/2)``; also maps {0, 1} to {0, 1/2}."""
    return elementary(b, [elementary(b, [v1])], v)


def add_gate(b: GameBuilder, v1: int, v2: int, v: int) -> int:
    return elementary(b, [elementary(b, [v1, v2])], v)


def subtract_gate(b: GameBuilder, v1: int, v2: int, v: int) -> int:
    return elementary(b, [v2, elementary(b, [v1])], v)


def value_gate(b: GameBuilder, v: int) -> int:
    return elementary(b, [], v)


def half_gate(b: GameBuilder, v1: int, v: int) -> int:
    """Four elementary gadgets in a loop forcing ``x[v1] = 2 x[v]``."""
    va = elementary(b, [v1])
    vb = elementary(b, [va, v])
    vc = elementary(b, [vb])
    return elementary(b, [vc], v)


def _compare_core(b: GameBuilder, v1: int, v2: int) -> int:
    # vb sees (1/2 - x[v2]) + x[v1]: it plays 1 when x[v1] < x[v2], 0 when above.
    va = elementary(b, [v2])
    vb = b.fresh()
    b.edge(va, vb)
    b.edge(v1, vb)
    return vb


def compare_gate(b: GameBuilder, v1: int, v2: int, v: int) -> int:
    return copy_gate(b, _compare_core(b, v1, v2), v)


def to_binary(b: GameBuilder, v1: int) -> int:
    """{0, 1/2} -> {0, 1}: compare a constant 1/4 against the input."""
    quarter = half_gate(b, value_gate(b, b.fresh()), b.fresh())
    return _compare_core(b, quarter, v1)


def to_half(b: GameBuilder, v1: int, v: int) -> int:
    """{0, 1} -> {0, 1/2}."""
    return copy_gate(b, v1, v)


def _or_core(b: GameBuilder, va: int, vb: int, v: int) -> int:
    # On {0, 1}: vc is 1 only if both inputs are 0, vd negates vc.
    vc, vd = b.fresh(), b.fresh()
    b.edge(va, vc)
    b.edge(vb, vc)
    b.edge(vc, vd)
    return to_half(b, vd, v)


def _not_core(b: GameBuilder, va: int, v: int) -> int:
    vb = b.fresh()
    b.edge(va, vb)
    return to_half(b, vb, v)


def or_gate(b: GameBuilder, v1: int, v2: int, v: int) -> int:
    return _or_core(b, to_binary(b, v1), to_binary(b, v2), v)


def not_gate(b: GameBuilder, v1: int, v: int) -> int:
    return _not_core(b, to_binary(b, v1), v)


def and_gate(b: GameBuilder, v1: int, v2: int, v: int) -> int:
    n1, n2, o = b.fresh(), b.fresh(), b.fresh()
    not_gate(b, v1, n1)
    not_gate(b, v2, n2)
    or_gate(b, n1, n2, o)
    return not_gate(b, o, v)


def times_half_gate(b: GameBuilder, v1: int, v: int) -> int:
    return half_gate(b, v1, v)


def wire_gate(b: GameBuilder, gate_type: str, inputs: Sequence[int], v: int) -> int:
    if len(inputs) != ARITY.get(gate_type, -1):
        raise ValueError(f"gate {gate_type!r} takes {ARITY.get(gate_type)} inputs, got {len(inputs)}")
    if gate_type == "half":
        return value_gate(b, v)
    if gate_type == "times_half":
        return times_half_gate(b, inputs[0], v)
    if gate_type == "eq":
        return copy_gate(b, inputs[0], v)
    if gate_type == "plus":
        return add_gate(b, inputs[0], inputs[1], v)
    if gate_type == "minus":
        return subtract_gate(b, inputs[0], inputs[1], v)
    if gate_type == "less":
        return compare_gate(b, inputs[0], inputs[1], v)
    if gate_type == "or":
        return or_gate(b, inputs[0], inputs[1], v)
    if gate_type == "and":
        return and_gate(b, inputs[0], inputs[1], v)
    if gate_type == "not":
        return not_gate(b, inputs[0], v)
    raise ValueError(f"unknown gate type {gate_type!r}")


@dataclass(frozen=True)
class Gadget:
    """A standalone gadget; input players have no in-edges."""

    tg: ThresholdGame
    inputs: tuple[int, ...]
    output: int


def build_gate(gate_type: str, n_inputs: int | None = None) -> Gadget:
    """Gadget for a gate type or a building block.

    Blocks: ``elementary`` (with ``n_inputs``), ``to_binary``, ``to_half``
    and the logic cores ``or_core``/``not_core`` that follow the transformers.
    """
    b = GameBuilder()
    if gate_type == "elementary":
        ins = tuple(b.fresh("in") for _ in range(n_inputs or 0))
        v = b.fresh("out")
        elementary(b, ins, v)
    elif gate_type == "to_binary":
        ins = (b.fresh("in"),)
        v = to_binary(b, ins[0])
    elif gate_type == "to_half":
        ins = (b.fresh("in"),)
        v = to_half(b, ins[0], b.fresh("out"))
    elif gate_type == "or_core":
        ins = (b.fresh("in"), b.fresh("in"))
        v = _or_core(b, ins[0], ins[1], b.fresh("out"))
    elif gate_type == "not_core":
        ins = (b.fresh("in"),)
        v = _not_core(b, ins[0], b.fresh("out"))
    else:
        if gate_type not in ARITY:
            raise ValueError(f"unknown gate type {gate_type!r}")
        if n_inputs is not None and n_inputs != ARITY[gate_type]:
            raise ValueError(f"gate {gate_type} takes {ARITY[gate_type]} inputs, got {n_inputs}")
        ins = tuple(b.fresh("in") for _ in range(ARITY[gate_type]))
        v = wire_gate(b, gate_type, ins, b.fresh("out"))
    return Gadget(b.game(), ins, v)


# --- whole circuits ---------------------------------------------------------


@dataclass(frozen=True)
class CompiledCircuit:
    tg: ThresholdGame
    node_map: dict[str, int]
    amplification: dict[int, int]

    @property
    def max_amplification(self) -> int:
        return max(self.amplification.values(), default=1)

    def to_json(self) -> dict:
        return {
            "format": "compiled",
            "game": self.tg.to_json(),
            "node_map": dict(self.node_map),
            "amplification": {str(k): v for k, v in self.amplification.items()},
        }


def compile_circuit(c: GeneralizedCircuit) -> CompiledCircuit:
    """Threshold game whose approximate equilibria approximately satisfy ``c``.

    Circuit nodes come first (players ``0..|V|-1``); gadget internals follow.
    Nodes no gate writes to have no in-edges, so equilibria force them to 1.
    """
    b = GameBuilder()
    node_map = {v: b.fresh(v) for v in c.nodes}
    amp = {}
    for k, g in enumerate(c.gates):
        wire_gate(b, g.type, [node_map[u] for u in g.inputs], node_map[g.output])
        amp[k] = AMPLIFICATION[g.type]
    return CompiledCircuit(b.game(), node_map, amp)


def extract_assignment(x: Sequence[float], compiled: CompiledCircuit, eps: float | None = None) -> dict[str, float]:
    """Read circuit nodes off a profile; with ``eps``, values above 1/2+eps become 1."""
    if len(x) != compiled.tg.n:
        raise ValueError(f"profile has length {len(x)}, compiled game has {compiled.tg.n} players")
    out = {}
    for v, i in compiled.node_map.items():
        xi = float(x[i])
        if eps is not None and xi > 0.5 + eps + FLOAT_TOL:
            xi = 1.0
        out[v] = xi
    return out


# --- exhaustive gadget verification -----------------------------------------


def find_counterexample(
    gadget_tg: ThresholdGame,
    eps: float,
    delta: float,
    pinned: Mapping[int, float],
    output: int,
    bad: Callable[[float], bool],
    domains: Mapping[int, Sequence[float]] | None = None,
    max_nodes: int | None = 50_000_000,
) -> tuple[float, ...] | None:
    """An eps-equilibrium on the grid with ``bad(x[output])``, or None.

    Pinned players keep their value and are exempt from the equilibrium
    condition: they stand for the outputs of whatever drives the gadget.
    """
    grid = grid_values(delta)
    doms = []
    for i in range(gadget_tg.n):
        if i in pinned:
            doms.append((float(pinned[i]),))
        elif domains is not None and i in domains:
            doms.append(tuple(domains[i]))
        else:
            doms.append(grid)
    doms[output] = tuple(v for v in doms[output] if bad(v))
    if not doms[output]:
        return None
    exempt = set(pinned)
    search = threshold_search(gadget_tg, eps, doms, max_nodes=max_nodes)
    keep = [cons for i, cons in enumerate(search.constraints) if i not in exempt]
    order = low_frontier_order(gadget_tg.n, [cons.scope for cons in keep], first=sorted(exempt))
    return GridSearch(doms, keep, order=order, max_nodes=max_nodes).solve()


def gate_bad_output(gate_type: str, ins: Sequence[float], eps_out: float, guard_eps: float, or_high: float = 0.5) -> Callable[[float], bool] | None:
    """Predicate for outputs violating a gate contract, None if vacuous."""
    target = gate_target(gate_type, ins, guard_eps, or_high)
    if target is None:
        return None
    return lambda v: not _near(v, target, eps_out)


def clamp(value: float, eps: float) -> float:
    return 1.0 if value > 0.5 + eps + FLOAT_TOL else value


def gate_violated_constraint(gate: Gate, node_map: Mapping[str, int], eps: float, clamp_eps: float | None = None, or_high: float = 0.5) -> Constraint:
    """Holds exactly when ``gate`` is violated after the optional clamp."""
    scope = tuple(node_map[v] for v in (*gate.inputs, gate.output))

    def violated(vals, gate_type=gate.type):
        if clamp_eps is not None:
            vals = [clamp(v, clamp_eps) for v in vals]
        target = gate_target(gate_type, vals[:-1], eps, or_high)
        return target is not None and not _near(vals[-1], target, eps)

    return Constraint(scope, violated)


def find_unsound_equilibrium(
    compiled: CompiledCircuit,
    c: GeneralizedCircuit,
    gate: int,
    eps_game: float,
    eps_circuit: float,
    delta: float,
    or_high: float = 0.5,
    max_nodes: int | None = 50_000_000,
) -> tuple[float, ...] | None:
    """A grid eps_game-equilibrium of the whole compiled game whose clamped
    extraction violates ``gate`` at ``eps_circuit``; None proves there is none."""
    grid = grid_values(delta)
    extra = [gate_violated_constraint(c.gates[gate], compiled.node_map, eps_circuit, eps_game, or_high)]
    search = threshold_search(compiled.tg, eps_game, [grid] * compiled.tg.n, extra=extra, order="auto", max_nodes=max_nodes)
    return search.solve()


def reachable_outputs(
    gadget: Gadget,
    inputs: Sequence[float],
    eps: float,
    delta: float,
    max_nodes: int | None = 50_000_000,
) -> frozenset:
    """Grid values the output takes over all eps-equilibria with pinned inputs."""
    grid = grid_values(delta)
    pinned = dict(zip(gadget.inputs, inputs))
    doms = [(float(pinned[i]),) if i in pinned else grid for i in range(gadget.tg.n)]
    search = threshold_search(gadget.tg, eps, doms, max_nodes=max_nodes)
    keep = [cons for i, cons in enumerate(search.constraints) if i not in pinned]
    order = low_frontier_order(gadget.tg.n, [cons.scope for cons in keep], first=sorted(pinned))
    return frozenset(GridSearch(doms, keep, order=order, max_nodes=max_nodes).project(gadget.output))


class LogicReach:
    """Output sets of the logic gates, composed from their stages.

    A stage only talks to the rest of the network through its output player,
    whose sole in-neighbor is internal, so the set of equilibrium outputs of
    a chain is the composition of the stage-wise sets.
    """

    def __init__(self, eps: float, delta: float):
        self.eps, self.delta = eps, delta
        self.blocks = {k: build_gate(k) for k in ("to_binary", "or_core", "not_core")}
        self._memo: dict = {}

    def block(self, kind: str, inputs: tuple[float, ...]) -> frozenset:
        key = (kind, inputs)
        if key not in self._memo:
            self._memo[key] = reachable_outputs(self.blocks[kind], inputs, self.eps, self.delta)
        return self._memo[key]

    def gate(self, kind: str, inputs: tuple[float, ...]) -> frozenset:
        if kind == "not":
            return frozenset().union(*(self.block("not_core", (u,)) for u in self.block("to_binary", inputs)))
        if kind == "or":
            ua, ub = (self.block("to_binary", (x,)) for x in inputs)
            return frozenset().union(*(self.block("or_core", (u, w)) for u in ua for w in ub))
        if kind == "and":
            na, nb = (self.gate("not", (x,)) for x in inputs)
            mid = frozenset().union(*(self.gate("or", (u, w)) for u in na for w in nb))
            return frozenset().union(*(self.gate("not", (o,)) for o in mid))
        raise ValueError(f"not a logic gate: {kind!r}")


class GateReach(LogicReach):
    """Output sets of every gate type, memoized by input values."""

    def __init__(self, eps: float, delta: float):
        super().__init__(eps, delta)
        self.gadgets = {k: build_gate(k) for k in ARITY if k not in ("and", "or", "not")}

    def gate(self, kind: str, inputs: tuple[float, ...]) -> frozenset:
        if kind in ("and", "or", "not"):
            return super().gate(kind, inputs)
        key = (kind, inputs)
        if key not in self._memo:
            self._memo[key] = reachable_outputs(self.gadgets[kind], inputs, self.eps, self.delta)
        return self._memo[key]


def circuit_search(
    c: GeneralizedCircuit,
    reach: GateReach,
    extra: Sequence[Constraint] = (),
    max_nodes: int | None = 50_000_000,
) -> GridSearch:
    """Search over circuit-node values of equilibria of ``compile_circuit(c)``.

    Each gadget meets the rest of the game only at circuit nodes, and each
    gate output's sole in-neighbor is internal to its gadget, so an
    assignment of circuit nodes extends to an equilibrium exactly when every
    gate output lies in its gadget's output set for the given inputs. Nodes
    without a gate have no in-edges and must play at least ``1 - eps``.
    Variables are indexed like ``c.nodes``.
    """
    grid = grid_values(reach.delta)
    index = {v: k for k, v in enumerate(c.nodes)}
    free = set(c.free_nodes())
    doms = [tuple(x for x in grid if x >= 1.0 - reach.eps - FLOAT_TOL) if v in free else grid for v in c.nodes]
    cons = []
    for g in c.gates:
        scope = tuple(index[v] for v in (*g.inputs, g.output))
        cons.append(Constraint(scope, lambda vals, kind=g.type: vals[-1] in reach.gate(kind, tuple(vals[:-1]))))
    cons.extend(extra)
    order = low_frontier_order(len(c.nodes), [k.scope for k in cons])
    return GridSearch(doms, cons, order=order, max_nodes=max_nodes)


def find_unsound_assignment(
    c: GeneralizedCircuit,
    reach: GateReach,
    gate: int,
    eps_circuit: float,
    or_high: float = 0.5,
) -> tuple[float, ...] | None:
    """Circuit-node values of an equilibrium whose clamped extraction violates ``gate``."""
    index = {v: k for k, v in enumerate(c.nodes)}
    extra = [gate_violated_constraint(c.gates[gate], index, eps_circuit, reach.eps, or_high)]
    return circuit_search(c, reach, extra).solve()
