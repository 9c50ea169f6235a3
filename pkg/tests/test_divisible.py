import numpy as np
import pytest

from pubgoods.core import DirectedGraph, bidirected, directed_cycle
from pubgoods.divisible import (
    BimatrixProfile,
    SumGame,
    WinLoseGame,
    adjacency_from_winlose,
    best_response_dynamics,
    best_response_sum,
    bimatrix_regret,
    check_eps_pure_divisible,
    dominated_strategies,
    exact_equilibria,
    game_from_winlose,
    half_masses,
    local_grid_equilibria,
    nash_from_game_profile,
    random_winlose,
    symmetrize,
)

TWO_CYCLE = SumGame(bidirected(2, [(0, 1)]))
LONE = SumGame(DirectedGraph(1))
TRIVIAL = WinLoseGame(np.array([[0]]), np.array([[0]]))


class TestBestResponse:
    def test_examples(self):
        assert best_response_sum(LONE, [0.3], 0) == 1.0
        g = SumGame(DirectedGraph(3, ((1, 0), (2, 0))))
        assert best_response_sum(g, [0.0, 0.3, 0.4], 0) == pytest.approx(0.3)
        assert best_response_sum(g, [0.0, 0.7, 0.7], 0) == 0.0

    def test_check(self):
        assert check_eps_pure_divisible(TWO_CYCLE, [0.4, 0.6], 0) == []
        assert check_eps_pure_divisible(LONE, [1.0], 0) == []
        assert len(check_eps_pure_divisible(SumGame(directed_cycle(3)), [1, 1, 1], 0.1)) == 3

    def test_bad_input(self):
        with pytest.raises(ValueError):
            check_eps_pure_divisible(LONE, [-0.1])
        with pytest.raises(ValueError):
            SumGame(DirectedGraph(1), 1.0)
        with pytest.raises(IndexError):
            best_response_sum(LONE, [0.0], 1)


class TestWinLose:
    def test_symmetrize_trivial(self):
        A, B = symmetrize(TRIVIAL)
        assert A.tolist() == [[-1, 0], [0, -1]]
        assert (A == B.T).all()

    def test_adjacency_trivial(self):
        # -A^T - I on the block matrix above
        assert adjacency_from_winlose(TRIVIAL).tolist() == [[0, 0], [0, 0]]

    def test_random_structure(self, rng):
        for _ in range(30):
            wl = random_winlose(int(rng.integers(1, 6)), rng)
            A, B = symmetrize(wl)
            assert np.isin(A, (-1, 0)).all() and (A == B.T).all()
            E = adjacency_from_winlose(wl)
            assert np.isin(E, (0, 1)).all() and (np.diag(E) == 0).all()
            assert game_from_winlose(wl).n == 2 * wl.n

    def test_validation(self):
        with pytest.raises(ValueError):
            WinLoseGame(np.array([[1]]), np.array([[0]]))
        with pytest.raises(ValueError):
            WinLoseGame(np.array([[-1]]), np.array([[0]]))
        with pytest.raises(ValueError):
            WinLoseGame(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_dominated_lint(self):
        wl = WinLoseGame(np.array([[0, 0], [-1, -1]]), np.array([[0, -1], [0, -1]]))
        msgs = dominated_strategies(wl)
        assert "row strategy 1 is weakly dominated by 0" in msgs
        assert "column strategy 1 is weakly dominated by 0" in msgs

    def test_json(self, rng):
        wl = random_winlose(3, rng)
        back = WinLoseGame.from_json(wl.to_json())
        assert (back.R == wl.R).all() and (back.C == wl.C).all()
        g = game_from_winlose(wl, 0.3)
        assert SumGame.from_json(g.to_json()) == g


class TestMapping:
    def test_trivial_profile(self):
        g = game_from_winlose(TRIVIAL)
        assert exact_equilibria(g) == [(1.0, 1.0)]
        prof = nash_from_game_profile([1.0, 1.0], 0.0, TRIVIAL)
        assert prof.x == (1.0,) and prof.y == (1.0,)
        assert bimatrix_regret(TRIVIAL, prof) == 0.0

    def test_zero_mass(self):
        with pytest.raises(ValueError):
            nash_from_game_profile([0.0, 1.0], 0.0, TRIVIAL)
        with pytest.raises(ValueError):
            nash_from_game_profile([1.0], 0.0, TRIVIAL)

    def test_regret_examples(self):
        wl = WinLoseGame(np.array([[0, -1], [-1, 0]]), np.array([[-1, 0], [0, -1]]))
        assert bimatrix_regret(wl, BimatrixProfile((0.5, 0.5), (0.5, 0.5))) == pytest.approx(0.0, abs=1e-9)
        assert bimatrix_regret(wl, BimatrixProfile((1.0, 0.0), (1.0, 0.0))) == 1.0

    def test_regret_permutation_invariant(self, rng):
        for _ in range(20):
            n = 3
            wl = random_winlose(n, rng)
            x, y = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
            pr, pc = rng.permutation(n), rng.permutation(n)
            wp = WinLoseGame(wl.R[np.ix_(pr, pc)], wl.C[np.ix_(pr, pc)])
            base = bimatrix_regret(wl, BimatrixProfile(tuple(x), tuple(y)))
            perm = bimatrix_regret(wp, BimatrixProfile(tuple(x[pr]), tuple(y[pc])))
            assert base == pytest.approx(perm)

    def test_exact_equilibria_map_to_nash(self, rng):
        for _ in range(20):
            wl = random_winlose(int(rng.integers(2, 4)), rng)
            for s in exact_equilibria(game_from_winlose(wl)):
                assert bimatrix_regret(wl, nash_from_game_profile(s, 0.0, wl), 1e-12) <= 1e-9

    def test_regret_bound_and_mass(self, rng):
        eps = 1e-3
        checked = 0
        for _ in range(20):
            n = int(rng.integers(2, 5))
            wl = random_winlose(n, rng)
            g = game_from_winlose(wl)
            for center in exact_equilibria(g):
                for s in local_grid_equilibria(g, center, eps):
                    assert check_eps_pure_divisible(g, s, eps) == []
                    assert min(half_masses(s, eps)) >= 1 / (4 * n) - n * eps
                    assert bimatrix_regret(wl, nash_from_game_profile(s, eps, wl)) <= 12 * n * n * eps
                    checked += 1
        assert checked > 20


class TestDynamics:
    def test_isolated(self):
        for init in ([0.0], [0.7], [3.0]):
            res = best_response_dynamics(LONE, init, 60)
            assert res.profile[0] == pytest.approx(1.0, abs=1e-9)

    def test_two_cycle_monotone(self):
        res = best_response_dynamics(TWO_CYCLE, [0.0, 0.0], 100, 0.5)
        assert all(b <= a + 1e-15 for a, b in zip(res.history, res.history[1:]))
        assert res.residual < 1e-6
        assert check_eps_pure_divisible(TWO_CYCLE, res.profile, 1e-6) == []

    def test_three_cycle_runs(self):
        res = best_response_dynamics(SumGame(directed_cycle(3)), [0.0, 0.0, 0.0], 1000)
        assert len(res.history) == 1001 and np.isfinite(res.residual)

    def test_bad_damping(self):
        with pytest.raises(ValueError):
            best_response_dynamics(LONE, [0.0], 10, 0.0)
