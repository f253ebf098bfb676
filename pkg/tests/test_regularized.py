import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from markov_cheb.chebyshev import ApproxProblem, remez_minimax, sup_norm_residual
from markov_cheb.regularized import (
    CONVERGED,
    MAX_ITER,
    RegProblem,
    build_constraint_grid,
    gamma_from_data,
    grid_objective,
    solve_qp,
    solve_regularized,
    solve_regularized_subgradient,
    theorem2_bound,
)
from oracles import exact_sup, lattice_oracle, scalarization_oracle


def reg(k, T, rho, gamma, grid_size=2001):
    return RegProblem(ApproxProblem(k, T, rho), gamma, grid_size)


class TestGrid:
    def test_two_points(self):
        assert np.allclose(build_constraint_grid(reg(4, 1, 1.0, 0.0, grid_size=2)), [1, -1])

    def test_three_points(self):
        assert np.allclose(build_constraint_grid(reg(4, 1, 0.5, 0.0, grid_size=3)), [0.5, 0, -0.5], atol=1e-17)

    @pytest.mark.parametrize("n", [2, 3, 10, 11, 2001])
    def test_symmetric(self, n):
        g = build_constraint_grid(reg(30, 1, 0.8, 0.0, grid_size=n))
        assert np.array_equal(g[::-1], -g)
        assert g[0] == 0.8 and g[-1] == -0.8

    def test_grid_must_resolve_degree(self):
        with pytest.raises(ValueError):
            reg(20, 12, 0.95, 0.0, grid_size=23)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            reg(20, 12, 0.95, -1e-9)


class TestSolveQP:
    def test_box_constrained_quadratic(self):
        # min (x - 2)**2 s.t. x <= 1  ->  x = 1
        P = np.array([[2.0]])
        q = np.array([-4.0])
        G = np.array([[1.0]])
        h = np.array([1.0])
        res = solve_qp(P, q, G, h)
        assert res.status == CONVERGED
        assert res.x[0] == pytest.approx(1.0, abs=1e-7)

    def test_inactive_constraint(self):
        P = np.eye(2) * 2
        q = np.array([-2.0, -4.0])
        G = np.array([[1.0, 1.0]])
        h = np.array([10.0])
        res = solve_qp(P, q, G, h)
        assert np.allclose(res.x, [1, 2], atol=1e-7)


class TestSolveRegularized:
    def test_zero_gamma_cubic(self):
        sol = solve_regularized(reg(4, 3, 1.0, 0.0))
        assert np.allclose(sol.alpha, [0, 0.75, 0], atol=1e-7)
        assert sol.objective == pytest.approx(0.0625, rel=1e-7)
        assert sol.solver_status == CONVERGED

    def test_huge_gamma_gives_zero(self):
        for k, T, rho in [(4, 3, 1.0), (13, 12, 0.95), (7, 2, 0.5)]:
            sol = solve_regularized(reg(k, T, rho, 1e12))
            assert np.max(np.abs(sol.alpha)) < 1e-6
            assert sol.objective == pytest.approx(rho ** (2 * k - 2), rel=1e-6)

    def test_cubic_gamma_point_one(self):
        sol = solve_regularized(reg(4, 3, 1.0, 0.1))
        assert 0.0625 < sol.objective < 1.0
        _, oracle = scalarization_oracle(4, 3, 1.0, 0.1)
        assert sol.objective == pytest.approx(oracle, rel=1e-6)

    @pytest.mark.parametrize("k,T", [(4, 3), (8, 4), (13, 12), (22, 12), (40, 12)])
    def test_zero_gamma_consistent_with_remez(self, k, T):
        sol = solve_regularized(reg(k, T, 0.95, 0.0))
        minimax = remez_minimax(ApproxProblem(k, T, 0.95)).sup_error
        assert abs(sol.objective - minimax**2) <= 1e-6 * (1 + sol.objective)
        assert sol.sup_error == pytest.approx(minimax, rel=1e-6)

    def test_exact_case(self):
        sol = solve_regularized(reg(3, 5, 0.9, 0.0))
        assert np.array_equal(sol.alpha, [0, 0, 1, 0, 0])
        assert sol.objective == 0.0

    def test_exact_case_with_penalty_still_shrinks(self):
        # with gamma > 0 the delta vector is no longer optimal
        sol = solve_regularized(reg(3, 5, 0.9, 1.0))
        assert sol.objective < 0.9**4
        assert sol.l1_norm < 1.0

    def test_no_matching_basis(self):
        sol = solve_regularized(reg(2, 1, 0.7, 0.3))
        assert np.array_equal(sol.alpha, [0.0])
        assert sol.objective == pytest.approx(0.49)

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(1, 12),
        st.integers(1, 20),
        st.sampled_from([0.5, 0.9, 0.95, 1.0]),
        st.sampled_from([0.0, 1e-8, 1e-5, 1e-3, 0.1, 10.0]),
    )
    def test_solution_invariants(self, T, dk, rho, gamma):
        sol = solve_regularized(reg(T + dk, T, rho, gamma))
        assert sol.solver_status == CONVERGED
        assert sol.l1_norm == float(np.abs(sol.alpha).sum())
        assert sol.objective == pytest.approx(sol.sup_error**2 + gamma * sol.l1_norm**2, rel=1e-10)
        prob = ApproxProblem(T + dk, T, rho)
        wrong = np.setdiff1d(np.arange(T), prob.parity_indices())
        assert not np.any(sol.alpha[wrong])
        assert sol.sup_error == pytest.approx(exact_sup(sol.alpha, T + dk, rho), rel=1e-9)

    @pytest.mark.parametrize("k,T,rho", [(4, 3, 1.0), (13, 12, 0.95), (22, 12, 0.95), (9, 4, 0.8)])
    def test_monotone_tradeoff(self, k, T, rho):
        gammas = [0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0, 100.0]
        sols = [solve_regularized(reg(k, T, rho, g)) for g in gammas]
        sups = [s.sup_error for s in sols]
        l1s = [s.l1_norm for s in sols]
        for a, b in zip(sups[:-1], sups[1:]):
            assert b >= a * (1 - 1e-6)
        for a, b in zip(l1s[:-1], l1s[1:]):
            assert b <= a * (1 + 1e-6) + 1e-12

    @pytest.mark.parametrize(
        "k,T,gamma",
        [(13, 12, 0.0), (13, 12, 1e-5), (22, 12, 1e-5), (22, 12, 2.6e-6), (50, 12, 1e-4), (4, 3, 0.1)],
    )
    def test_grid_sufficiency(self, k, T, gamma):
        rho = 1.0 if k == 4 else 0.95
        a = solve_regularized(reg(k, T, rho, gamma, grid_size=2001)).objective
        b = solve_regularized(reg(k, T, rho, gamma, grid_size=4002)).objective
        assert abs(a - b) <= 1e-8 * b

    @pytest.mark.parametrize("k,T,rho,gamma", [(5, 4, 0.5, 0.1), (6, 3, 0.95, 1e-3), (7, 4, 1.0, 1e-3)])
    def test_lattice_finds_nothing_better(self, k, T, rho, gamma):
        sol = solve_regularized(reg(k, T, rho, gamma))
        center = solve_regularized(reg(k, T, rho, 0.0)).alpha
        _, val = lattice_oracle(k, T, rho, gamma, center=center)
        assert val >= sol.objective - 1e-5

    @pytest.mark.parametrize("k,T,gamma", [(13, 12, 1e-5), (6, 4, 1e-2)])
    def test_subgradient_cross_check(self, k, T, gamma):
        prob = reg(k, T, 0.95, gamma)
        ipm = solve_regularized(prob)
        sub = solve_regularized_subgradient(prob, iterations=4000, alpha0=ipm.alpha * 0.9)
        assert sub.solver_status == MAX_ITER
        assert sub.objective >= ipm.objective * (1 - 1e-6)
        assert sub.objective <= ipm.objective * 1.05

    def test_grid_objective_underestimates(self):
        prob = reg(22, 12, 0.95, 1e-5)
        sol = solve_regularized(prob)
        assert grid_objective(sol.alpha, prob) <= sol.objective * (1 + 1e-12)


class TestGammaFromData:
    def test_zero_sigma(self):
        assert gamma_from_data(0.0, 6.0, 1000) == 0.0

    def test_example(self):
        assert gamma_from_data(0.36, 6.0, 1000) == pytest.approx(1e-5, rel=1e-15)

    def test_halves_when_n_doubles(self):
        assert gamma_from_data(0.2, 3.0, 200) == pytest.approx(gamma_from_data(0.2, 3.0, 100) / 2, rel=1e-15)

    @pytest.mark.parametrize("c_m,n", [(0.0, 10), (6.0, 0)])
    def test_rejects_degenerate(self, c_m, n):
        with pytest.raises(ValueError):
            gamma_from_data(0.1, c_m, n)


class TestTheorem2Bound:
    def test_noise_free(self):
        prob = ApproxProblem(13, 12, 0.95)
        alpha = remez_minimax(prob).alpha
        want = 36 * sup_norm_residual(alpha, prob) ** 2
        assert theorem2_bound(prob, alpha, 6.0, 0.0, 1000) == pytest.approx(want, rel=1e-15)

    def test_zero_alpha(self):
        prob = ApproxProblem(13, 12, 0.95)
        assert theorem2_bound(prob, np.zeros(12), 6.0, 0.5, 10) == pytest.approx(36 * 0.95**24, rel=1e-12)

    def test_benchmark_setting_finite(self):
        prob = ApproxProblem(13, 12, 0.95)
        sigma = 0.1855  # close to the closed-form output variance
        sol = solve_regularized(RegProblem(prob, gamma_from_data(sigma, 6.0, 1000)))
        b = theorem2_bound(prob, sol.alpha, 6.0, sigma, 1000)
        assert np.isfinite(b) and b > 0

    @pytest.mark.parametrize("gamma", [0.0, 1e-6, 1e-3])
    def test_dominates_squared_minimax_bias(self, gamma):
        prob = ApproxProblem(22, 12, 0.95)
        sol = solve_regularized(RegProblem(prob, gamma))
        minimax = remez_minimax(prob).sup_error
        assert theorem2_bound(prob, sol.alpha, 6.0, 0.19, 100) >= 36 * minimax**2 * (1 - 1e-9)

    def test_rejects_bad_inputs(self):
        prob = ApproxProblem(13, 12, 0.95)
        with pytest.raises(ValueError):
            theorem2_bound(prob, np.zeros(12), 6.0, 0.1, 0)
        with pytest.raises(ValueError):
            theorem2_bound(prob, np.zeros(12), 6.0, -0.1, 10)
