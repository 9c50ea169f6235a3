import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pubgoods.core import DirectedGraph, IndivisibleGame, StepFunction, check_eps_nash, directed_cycle
from pubgoods.threshold import (
    ThresholdGame,
    BandSearch,
    all_threshold_eq,
    check_threshold_eq,
    cp_constant,
    grid_search_pgg_nash,
    grid_search_threshold_eq,
    grid_values,
    log_bounds_hold,
    log_grid,
    pgg_from_threshold,
    pgg_profile_from_threshold_eq,
    threshold_from_pgg,
    threshold_profile_from_pgg_nash,
    threshold_search,
)
from conftest import random_digraph


def path2():
    return ThresholdGame(DirectedGraph(2, ((0, 1),)), 0.5)


def independent_check(tg, x, eps):
    """Per-player three-branch condition written out directly."""
    for i in range(tg.n):
        total = sum(x[j] for j in tg.graph.in_neighbors[i])
        if total > tg.t + eps and not abs(x[i]) <= eps:
            return False
        if total < tg.t - eps and not abs(x[i] - 1) <= eps:
            return False
    return True


class TestCheck:
    def test_isolated(self):
        assert check_threshold_eq(ThresholdGame(DirectedGraph(1), 0.5), (1.0,), 0.0) == []

    def test_three_cycle_at_threshold(self):
        assert check_threshold_eq(ThresholdGame(directed_cycle(3), 0.5), (0.5, 0.5, 0.5), 0.0) == []

    def test_three_cycle_all_one(self):
        assert len(check_threshold_eq(ThresholdGame(directed_cycle(3), 0.5), (1.0, 1.0, 1.0), 0.1)) == 3

    def test_eps_range(self):
        with pytest.raises(ValueError):
            check_threshold_eq(ThresholdGame(DirectedGraph(1), 0.3), (1.0,), 0.3)

    def test_exact_check_matches_fixed_points(self, rng):
        values = (0.0, 0.25, 0.5, 0.75, 1.0)
        for _ in range(20):
            tg = ThresholdGame(random_digraph(rng, 4, 0.4), 0.5)
            for x in itertools.product(values, repeat=4):
                assert (check_threshold_eq(tg, x, 0.0) == []) == independent_check(tg, x, 0.0)


class TestMaps:
    def test_price(self):
        assert float(pgg_from_threshold(ThresholdGame(DirectedGraph(1), 0.5)).price) == pytest.approx(0.606531, abs=1e-6)
        assert float(pgg_from_threshold(ThresholdGame(DirectedGraph(1), math.log(2))).price) == pytest.approx(0.5)

    def test_graph_kept(self):
        tg = ThresholdGame(directed_cycle(4), 0.3)
        assert pgg_from_threshold(tg).graph == tg.graph
        assert threshold_from_pgg(pgg_from_threshold(tg)).graph == tg.graph

    def test_threshold_from_pgg(self):
        g = directed_cycle(3)
        assert threshold_from_pgg(IndivisibleGame(g, StepFunction.max_utility(), Fraction(3, 10))).t == 0.5
        with pytest.raises(ValueError):
            threshold_from_pgg(IndivisibleGame(g, StepFunction.max_utility(), Fraction(3, 2)))
        with pytest.raises(ValueError):
            threshold_from_pgg(IndivisibleGame(g, StepFunction((0, 1, 2)), Fraction(1, 2)))

    def test_profile_from_nash(self):
        assert threshold_profile_from_pgg_nash((0.0, 1 - math.exp(-0.3), 1.0)) == pytest.approx((0.0, 0.3, 1.0))

    def test_profile_from_threshold(self):
        assert pgg_profile_from_threshold_eq((0.25,), 0.5, 0.0)[0] == pytest.approx(0.292893, abs=1e-6)
        assert pgg_profile_from_threshold_eq((0.6,), 0.5, 0.05) == (1.0,)
        assert cp_constant(0.5) == pytest.approx(1.386294, abs=1e-6)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.01, 0.99), st.floats(1e-6, 1.0, exclude_max=True))
    def test_log_bounds(self, t, frac):
        eps = frac * min(0.1, t / 8, (1 - t) / 8)
        assert log_bounds_hold(t, eps) == (True, True)


class TestGrid:
    def test_grid_values(self):
        assert grid_values(0.25) == (0.0, 0.25, 0.5, 0.75, 1.0)
        assert grid_values(0.3)[-1] == 1.0
        with pytest.raises(ValueError):
            grid_values(0.0)

    def test_isolated(self):
        assert grid_search_threshold_eq(ThresholdGame(DirectedGraph(1), 0.5), 0.1, 0.25) == (1.0,)

    def test_three_cycle(self):
        tg = ThresholdGame(directed_cycle(3), 0.5)
        x = grid_search_threshold_eq(tg, 0.3, 0.25)
        assert x == (0.0, 0.75, 0.25)
        assert check_threshold_eq(tg, x, 0.3) == []
        assert (0.5, 0.5, 0.5) in set(all_threshold_eq(tg, 0.3, 0.25))

    def test_path(self):
        assert grid_search_threshold_eq(path2(), 0.1, 0.25) == (1.0, 0.0)

    def test_all_equilibria_match_enumeration(self, rng):
        for _ in range(15):
            tg = ThresholdGame(random_digraph(rng, 4, 0.4), 0.5)
            grid = grid_values(0.25)
            expected = [x for x in itertools.product(grid, repeat=4) if not check_threshold_eq(tg, x, 0.1)]
            assert sorted(all_threshold_eq(tg, 0.1, 0.25)) == expected
            assert grid_search_threshold_eq(tg, 0.1, 0.25) == (expected[0] if expected else None)

    def test_band_search_matches_generic_search(self, rng):
        for _ in range(40):
            n = int(rng.integers(1, 6))
            tg = ThresholdGame(random_digraph(rng, n, 0.4), float(rng.choice([0.3, 0.5, 0.7])))
            eps = float(rng.choice([0.0, 0.05, 0.1]))
            grid = grid_values(0.25)
            order = [int(v) for v in rng.permutation(n)]
            for o in (None, order):
                fast = list(BandSearch(tg, eps, [grid] * n, order=o).solutions())
                slow = list(threshold_search(tg, eps, [grid] * n, order=o).solutions())
                assert fast == slow

    def test_log_grid(self):
        vals = log_grid(0.5)
        assert vals[0] == 0.0 and vals[-1] == 1.0
        assert threshold_profile_from_pgg_nash(vals[:-1]) == pytest.approx((0.0, 0.5, 1.0))


class TestRoundTrips:
    @pytest.mark.parametrize("t", [0.3, 0.5, 0.7])
    def test_nash_to_threshold(self, t):
        rng = np.random.default_rng(11)
        eps = min(0.1, t / 8, (1 - t) / 8) / 2
        for _ in range(10):
            tg = ThresholdGame(random_digraph(rng, int(rng.integers(2, 6)), 0.35), t)
            game = pgg_from_threshold(tg)
            s = grid_search_pgg_nash(game, eps, log_grid(2 * eps), order="auto")
            assert s is not None
            assert check_eps_nash(game, s, eps) == []
            assert check_threshold_eq(tg, threshold_profile_from_pgg_nash(s), 8 * eps) == []

    @pytest.mark.parametrize("p", [0.3, 0.5, 0.8])
    def test_threshold_to_nash(self, p):
        rng = np.random.default_rng(12)
        eps = 0.1
        for _ in range(10):
            g = random_digraph(rng, int(rng.integers(2, 6)), 0.35)
            tg = ThresholdGame(g, 0.5)
            x = grid_search_threshold_eq(tg, eps, 0.125)
            assert x is not None
            s = pgg_profile_from_threshold_eq(x, p, eps)
            game = IndivisibleGame(g, StepFunction.max_utility(), p)
            assert check_eps_nash(game, s, cp_constant(p) * eps) == []

    def test_threshold_to_nash_needs_exact_zeros(self):
        # x_b = eps is allowed when a buys, but maps to a small positive
        # probability of buying that the game punishes with regret p.
        tg = path2()
        x = (0.9, 0.1)
        assert check_threshold_eq(tg, x, 0.1) == []
        s = pgg_profile_from_threshold_eq(x, 0.5, 0.1)
        game = IndivisibleGame(tg.graph, StepFunction.max_utility(), 0.5)
        bad = check_eps_nash(game, s, cp_constant(0.5) * 0.1)
        assert [v.player for v in bad] == [1]
        assert bad[0].regret == pytest.approx(0.5)
        x0 = (0.9, 0.0)
        assert check_eps_nash(game, pgg_profile_from_threshold_eq(x0, 0.5, 0.1), cp_constant(0.5) * 0.1) == []


def test_json_round_trip():
    tg = ThresholdGame(directed_cycle(3), 0.4)
    assert ThresholdGame.from_json(tg.to_json()) == tg
    with pytest.raises(ValueError):
        ThresholdGame(DirectedGraph(1), 1.0)
