import itertools
from fractions import Fraction

import numpy as np
import pytest

from pubgoods.core import DirectedGraph, IndivisibleGame, StepFunction, bidirected, check_pure_nash, directed_cycle
from pubgoods.pure import (
    BRUTE_FORCE_MAX_N,
    CnfFormula,
    PureStatus,
    ReductionMap,
    UtilityKind,
    add_feeder_players,
    brute_force_pure,
    classify_utility,
    enumerate_pure,
    extract_assignment,
    find_pure,
    formula_holds,
    open_problem_fixture,
    reduce_3sat,
    solve_alternating_f2,
    solve_gf2,
    solve_pure,
)
from conftest import random_digraph

HALF = Fraction(1, 2)
MAX = StepFunction.max_utility()
ALTERNATING = StepFunction((0, 1, Fraction(6, 5), Fraction(11, 5), Fraction(12, 5), Fraction(17, 5), Fraction(18, 5)))


def reference_equilibria(game):
    return [p for p in itertools.product((0, 1), repeat=game.n) if not check_pure_nash(game, p)]


class TestClassify:
    def test_max_is_general(self):
        cls = classify_utility(MAX, HALF, 5)
        assert cls.kind is UtilityKind.GENERAL and cls.witness == 0

    def test_linear_is_steep(self):
        assert classify_utility(StepFunction((0, 1, 2, 3, 4, 5)), HALF, 5).kind is UtilityKind.STEEP

    def test_alternating(self):
        x = StepFunction((0, 1, Fraction(6, 5), Fraction(11, 5), Fraction(12, 5)))
        assert classify_utility(x, HALF).kind is UtilityKind.ALTERNATING

    def test_flat(self):
        assert classify_utility(StepFunction((0, Fraction(3, 10))), HALF, 4).kind is UtilityKind.FLAT


class TestGf2:
    def test_inconsistent(self):
        assert solve_gf2([0b11, 0b11], [0, 1], 2) is None

    def test_free_variables_zero(self):
        assert solve_gf2([0b011], [1], 3) == [1, 0, 0]

    def test_random_systems(self, rng):
        for _ in range(200):
            m, n = rng.integers(1, 7, size=2)
            rows = [int(r) for r in rng.integers(0, 1 << n, size=m)]
            rhs = [int(b) for b in rng.integers(0, 2, size=m)]
            sol = solve_gf2(rows, rhs, int(n))
            feasible = [
                x for x in itertools.product((0, 1), repeat=int(n))
                if all(bin(r & sum(b << k for k, b in enumerate(x))).count("1") % 2 == c for r, c in zip(rows, rhs))
            ]
            assert (sol is None) == (not feasible)
            if sol is not None:
                assert tuple(sol) in feasible


class TestAlternating:
    def test_isolated(self):
        assert solve_alternating_f2(IndivisibleGame(DirectedGraph(1), ALTERNATING, HALF)) == (1,)

    def test_three_cycle(self):
        assert solve_alternating_f2(IndivisibleGame(directed_cycle(3), ALTERNATING, HALF)) is None

    def test_two_cycle(self):
        assert solve_alternating_f2(IndivisibleGame(bidirected(2, [(0, 1)]), ALTERNATING, HALF)) in {(1, 0), (0, 1)}

    def test_against_brute_force(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 11))
            game = IndivisibleGame(random_digraph(rng, n, 0.3, max_degree=3), ALTERNATING, HALF)
            eqs = brute_force_pure(game)
            sol = solve_alternating_f2(game)
            assert (sol is None) == (not eqs)
            if sol is not None:
                assert sol in eqs


class TestSolvePure:
    def test_flat(self, rng):
        game = IndivisibleGame(random_digraph(rng, 6), StepFunction((0, Fraction(3, 10))), HALF)
        res = solve_pure(game)
        assert res.status is PureStatus.SOLVED and res.profile == (0,) * 6

    def test_odd_cycle(self):
        assert solve_pure(IndivisibleGame(directed_cycle(5), MAX, HALF)).status is PureStatus.NONE_EXISTS

    def test_two_cycle(self):
        res = solve_pure(IndivisibleGame(bidirected(2, [(0, 1)]), MAX, HALF))
        assert res.profile in {(1, 0), (0, 1)}

    def test_budget_gives_unknown(self):
        res = solve_pure(IndivisibleGame(directed_cycle(12), MAX, HALF), budget=100)
        assert res.status is PureStatus.UNKNOWN


class TestBruteForce:
    def test_examples(self):
        assert brute_force_pure(IndivisibleGame(directed_cycle(3), MAX, HALF)) == []
        assert brute_force_pure(IndivisibleGame(DirectedGraph(1), MAX, HALF)) == [(1,)]

    def test_matches_reference_and_is_sorted(self, rng):
        x = StepFunction((0, 1, Fraction(6, 5), Fraction(8, 5)))
        for _ in range(40):
            game = IndivisibleGame(random_digraph(rng, 7, 0.3), x, Fraction(2, 5))
            eqs = brute_force_pure(game)
            assert eqs == reference_equilibria(game)
            assert enumerate_pure(game) == eqs

    def test_threads_do_not_change_output(self, monkeypatch):
        game = IndivisibleGame(directed_cycle(20), MAX, HALF)
        monkeypatch.setenv("PUBGOODS_THREADS", "4")
        assert brute_force_pure(game) == brute_force_pure(game, workers=1)

    def test_size_guard(self):
        with pytest.raises(ValueError):
            brute_force_pure(IndivisibleGame(DirectedGraph(BRUTE_FORCE_MAX_N + 1), MAX, HALF))


class TestOpenProblemFixture:
    def test_shape(self):
        game = open_problem_fixture()
        assert game.n == 7 and len(game.graph.edges) == 21
        assert game.x.step(1) == game.price

    def test_tie_tolerant_equilibria(self):
        # Buyer sets {3,5,6} etc.: each induces a directed 3-cycle, so every
        # buyer sees exactly one buying in-neighbor and is indifferent.
        eqs = brute_force_pure(open_problem_fixture())
        assert eqs == reference_equilibria(open_problem_fixture())
        assert len(eqs) == 7
        assert (0, 0, 0, 1, 0, 1, 1) in eqs
        for prof in eqs:
            buyers = [i for i in range(7) if prof[i]]
            assert len(buyers) == 3


def truth_table_sat(formula, mode="3sat"):
    return any(
        formula_holds(formula, {v + 1: bool(b) for v, b in enumerate(bits)}, mode)
        for bits in itertools.product((0, 1), repeat=formula.num_vars)
    )


class TestReduce3Sat:
    def test_single_clause(self):
        game, rmap = reduce_3sat(CnfFormula(1, ((1, 1, 1),)))
        assert game.n == 10
        eqs = brute_force_pure(game)
        assert eqs and all(p[rmap.heads[1]] == 1 for p in eqs)

    def test_contradiction(self):
        game, _ = reduce_3sat(CnfFormula(1, ((1,), (-1,))))
        assert brute_force_pure(game) == []

    def test_no_clauses(self):
        game, _ = reduce_3sat(CnfFormula(1, ()))
        assert len(brute_force_pure(game)) == 2

    @pytest.mark.parametrize("mode", ["3sat", "nae", "one-in-3"])
    def test_bijection_random(self, mode):
        rng = np.random.default_rng(7)
        for _ in range(15):
            nv = int(rng.integers(1, 5))
            clauses = []
            for _ in range(int(rng.integers(1, 5))):
                k = int(rng.integers(1, 4))
                vs = rng.choice(np.arange(1, nv + 1), size=min(k, nv), replace=False)
                clauses.append(tuple(int(v) * int(rng.choice([-1, 1])) for v in vs))
            f = CnfFormula(nv, tuple(clauses))
            game, rmap = reduce_3sat(f, mode)
            eqs = enumerate_pure(game)
            assert bool(eqs) == truth_table_sat(f, mode)
            assignments = set()
            for prof in eqs:
                a = extract_assignment(prof, rmap, game)
                assert formula_holds(f, a, mode)
                assignments.add(tuple(sorted(a.items())))
            if mode != "one-in-3":
                # one-in-3 steps let each clause's forcing cycle settle two
                # ways once its feeder buys; only existence carries over.
                assert len(assignments) == len(eqs)

    def test_extract_reads_heads(self):
        game, rmap = reduce_3sat(CnfFormula(2, ((1, -2),)))
        prof = find_pure(game)
        a = extract_assignment(prof, rmap, game)
        assert a == {v: bool(prof[h]) for v, h in rmap.heads.items()}

    def test_extract_rejects_non_equilibrium(self):
        game, rmap = reduce_3sat(CnfFormula(1, ((1,),)))
        with pytest.raises(ValueError):
            extract_assignment((0,) * game.n, rmap, game)

    def test_map_round_trip(self):
        _, rmap = reduce_3sat(CnfFormula(2, ((1, -2), (2,))))
        assert ReductionMap.from_json(rmap.to_json()) == rmap

    def test_formula_validation(self):
        with pytest.raises(ValueError):
            CnfFormula(1, ((2,),))
        with pytest.raises(ValueError):
            CnfFormula(2, ((1, 2, -1, 2),))


class TestFeeders:
    def test_identity(self):
        game = IndivisibleGame(directed_cycle(3), MAX, HALF)
        assert add_feeder_players(game, 0) == game

    def test_isolated_vertex(self):
        game = add_feeder_players(IndivisibleGame(DirectedGraph(1), MAX, HALF), 1)
        assert brute_force_pure(game) == [(0, 1)]

    def test_exempt_in_degree(self):
        base = IndivisibleGame(directed_cycle(3), MAX, HALF)
        game = add_feeder_players(base, 2, exempt=[1])
        assert len(game.graph.in_neighbors[1]) == len(base.graph.in_neighbors[1]) + 1
        assert len(game.graph.in_neighbors[0]) == len(base.graph.in_neighbors[0]) + 2

    def test_feeders_always_buy(self, rng):
        x = StepFunction((0, 1, Fraction(6, 5), Fraction(11, 5)))
        for _ in range(20):
            base = IndivisibleGame(random_digraph(rng, 5, 0.3), x, HALF)
            k = int(rng.integers(1, 3))
            game = add_feeder_players(base, k, exempt=[0])
            for prof in brute_force_pure(game):
                assert all(prof[5:])

    def test_bad_arguments(self):
        base = IndivisibleGame(DirectedGraph(2), MAX, HALF)
        with pytest.raises(ValueError):
            add_feeder_players(base, -1)
        with pytest.raises(ValueError):
            add_feeder_players(base, 0, exempt=[0])
