"""Solver checks: closed forms against grid refinement, KKT residuals,
budget bisection behavior, and agreement with the brute-force oracle."""

import numpy as np
import pytest

from uavmec import alloc
from uavmec.config import NetworkConfig


def make_problem(cfg, d_pre, alphas, members=None):
    d_pre = np.asarray(d_pre, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    d_mec = alphas * d_pre
    d_in = d_pre - d_mec
    if members is None:
        members = [np.arange(len(d_pre))]
    return alloc.AllocProblem.from_config(cfg, d_in, d_mec, members)


def refine_grid_search(fn, lo, hi, rel_tol=1e-9, points=2001):
    """Iteratively zoomed dense grid minimizer of a scalar function."""
    for _ in range(12):
        grid = np.linspace(lo, hi, points)
        vals = np.array([fn(c) for c in grid])
        i = int(np.argmin(vals))
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, points - 1)]
        if (hi - lo) <= rel_tol * max(abs(lo), 1.0):
            break
    return 0.5 * (lo + hi)


class TestOptimalLocalCpu:
    def test_energy_only_pins_lower_bound(self, cfg):
        assert alloc.optimal_local_cpu(1e6, cfg.replace(eta=1.0)) == cfg.c_mu_min

    def test_delay_only_pins_upper_bound(self, cfg):
        assert alloc.optimal_local_cpu(1e6, cfg.replace(eta=0.0)) == cfg.c_mu_max

    def test_zero_workload_ties_at_lower_bound(self, cfg):
        assert alloc.optimal_local_cpu(0.0, cfg) == cfg.c_mu_min

    def test_interior_matches_dense_grid(self, cfg):
        # wide bounds so the stationary point is interior
        bounds = (1e8, 1e12)
        got = alloc.optimal_local_cpu(1e6, cfg, bounds=bounds)
        beta, q, eta = cfg.beta_mu, cfg.q_mu, cfg.eta

        def objective(c):
            return eta * q * c ** 2 * beta * 1e6 + (1 - eta) * beta * 1e6 / c

        ref = refine_grid_search(objective, *bounds)
        assert got == pytest.approx(ref, rel=1e-6)
        assert objective(got) <= objective(ref) * (1 + 1e-12)

    def test_closed_form_independent_of_workload(self, cfg):
        bounds = (1e8, 1e12)
        a = alloc.optimal_local_cpu(2e5, cfg, bounds=bounds)
        b = alloc.optimal_local_cpu(9e5, cfg, bounds=bounds)
        assert a == b


class TestOptimalMecCpu:
    def test_loose_budget_matches_unconstrained(self, cfg):
        # single user: budget inactive, so the box-clamped closed form wins
        problem = make_problem(cfg, [5e5], [0.5])
        c, mu = alloc.optimal_mec_cpu(problem, 0)
        assert mu == 0.0
        c_star = ((1 - cfg.eta) / (2 * cfg.eta * cfg.q_uav)) ** (1 / 3)
        assert c[0] == pytest.approx(np.clip(c_star, cfg.c_mu_min,
                                             cfg.c_uav_max), rel=1e-12)

    def test_two_identical_users_split_tight_budget(self, cfg):
        cfg = cfg.replace(c_uav_max=2.4e9)
        problem = make_problem(cfg, [6e5, 6e5], [1.0, 1.0])
        c, mu = alloc.optimal_mec_cpu(problem, 0)
        assert mu > 0.0
        assert c[0] == pytest.approx(c[1], rel=1e-9)
        assert float(np.sum(c)) == pytest.approx(cfg.c_uav_max, rel=1e-9)

    def test_three_users_against_grid_oracle(self, cfg):
        cfg = cfg.replace(c_uav_max=4e9)
        rng = np.random.default_rng(11)
        problem = make_problem(cfg, rng.uniform(1e5, 1e6, 3),
                               rng.uniform(0.3, 1.0, 3))
        c, mu = alloc.optimal_mec_cpu(problem, 0)
        oracle = alloc.brute_force_alloc(problem, 200)
        obj_mine = alloc.allocation_objective(problem, oracle.c_in, c)
        obj_grid = alloc.allocation_objective(problem, oracle.c_in,
                                              oracle.c_mec)
        assert obj_mine <= obj_grid * (1 + 1e-6)

    def test_infeasible_budget_raises(self, cfg):
        cfg = cfg.replace(c_uav_max=1.5e8)   # two users at c_min need 2e8
        problem = make_problem(cfg, [5e5, 5e5], [1.0, 1.0])
        with pytest.raises(alloc.AllocInfeasibleError):
            alloc.optimal_mec_cpu(problem, 0)

    def test_kkt_residuals_small(self, cfg):
        rng = np.random.default_rng(23)
        for trial in range(20):
            n = int(rng.integers(1, 5))
            tight = rng.uniform(0.15, 1.5) * n * 1.7e9
            case_cfg = cfg.replace(c_uav_max=max(tight, (n + 1) * cfg.c_mu_min))
            problem = make_problem(case_cfg, rng.uniform(1e5, 1e6, n),
                                   rng.uniform(0.0, 1.0, n))
            c, mu = alloc.optimal_mec_cpu(problem, 0)
            res = alloc.kkt_residuals(problem, 0, c, mu)
            for name, val in res.items():
                assert val <= 1e-8, (trial, name, val)

    def test_permutation_invariance(self, cfg):
        cfg = cfg.replace(c_uav_max=3e9)
        rng = np.random.default_rng(5)
        d_pre = rng.uniform(1e5, 1e6, 4)
        alphas = rng.uniform(0.2, 1.0, 4)
        base = make_problem(cfg, d_pre, alphas)
        c_base, _ = alloc.optimal_mec_cpu(base, 0)
        perm = rng.permutation(4)
        shuffled = make_problem(cfg, d_pre[perm], alphas[perm])
        c_perm, _ = alloc.optimal_mec_cpu(shuffled, 0)
        assert np.allclose(c_perm, c_base[perm], rtol=1e-9)

    def test_bisection_iteration_budget(self, cfg, monkeypatch):
        calls = {"n": 0}
        original = alloc._mec_roots

        def counting(*args, **kwargs):
            calls["n"] += 1
            return original(*args, **kwargs)

        monkeypatch.setattr(alloc, "_mec_roots", counting)
        cfg = cfg.replace(c_uav_max=2.2e9)
        problem = make_problem(cfg, [4e5, 8e5, 6e5], [1.0, 0.8, 0.9])
        c, mu = alloc.optimal_mec_cpu(problem, 0)
        assert float(np.sum(c)) == pytest.approx(cfg.c_uav_max, rel=1e-9)
        assert calls["n"] <= alloc.MAX_BISECT_ITERS + 1


class TestSolveP11:
    def test_nothing_offloaded(self, cfg):
        problem = make_problem(cfg, [4e5, 7e5], [0.0, 0.0])
        sol = alloc.solve_p11(problem)
        assert np.all(sol.c_mec == cfg.c_mu_min)
        c_star = ((1 - cfg.eta) / (2 * cfg.eta * cfg.q_mu)) ** (1 / 3)
        expect = np.clip(c_star, cfg.c_mu_min, cfg.c_mu_max)
        assert np.allclose(sol.c_in, expect, rtol=1e-12)

    def test_beats_random_feasible_points(self, cfg):
        cfg = cfg.replace(c_uav_max=3e9)
        rng = np.random.default_rng(17)
        problem = make_problem(
            cfg, rng.uniform(1e5, 1e6, 5), rng.uniform(0.0, 1.0, 5),
            members=[np.array([0, 1]), np.array([2, 3, 4])],
        )
        sol = alloc.solve_p11(problem)
        for _ in range(1000):
            c_in = rng.uniform(cfg.c_mu_min, cfg.c_mu_max, 5)
            c_mec = np.empty(5)
            for idx in problem.members:
                while True:
                    cand = rng.uniform(cfg.c_mu_min, cfg.c_uav_max, len(idx))
                    if cand.sum() <= cfg.c_uav_max:
                        break
                    cand *= cfg.c_uav_max / cand.sum()
                    cand = np.maximum(cand, cfg.c_mu_min)
                    if cand.sum() <= cfg.c_uav_max * (1 + 1e-12):
                        break
                c_mec[idx] = cand
            rand_obj = alloc.allocation_objective(problem, c_in, c_mec)
            assert sol.objective <= rand_obj * (1 + 1e-12)

    def test_local_perturbation_does_not_improve(self, cfg):
        cfg = cfg.replace(c_uav_max=2.5e9)
        rng = np.random.default_rng(29)
        problem = make_problem(cfg, rng.uniform(1e5, 1e6, 3),
                               rng.uniform(0.3, 1.0, 3))
        sol = alloc.solve_p11(problem)
        budget = cfg.c_uav_max
        for i in range(3):
            for sign in (-1.0, 1.0):
                c_mec = sol.c_mec.copy()
                c_mec[i] *= 1.0 + sign * 0.01
                c_mec = np.clip(c_mec, cfg.c_mu_min, cfg.c_uav_max)
                if c_mec.sum() > budget:   # re-project onto the budget
                    c_mec *= budget / c_mec.sum()
                    c_mec = np.maximum(c_mec, cfg.c_mu_min)
                if c_mec.sum() > budget * (1 + 1e-12):
                    continue
                perturbed = alloc.allocation_objective(problem, sol.c_in, c_mec)
                assert perturbed >= sol.objective * (1 - 1e-12)

                c_in = sol.c_in.copy()
                c_in[i] = np.clip(c_in[i] * (1.0 + sign * 0.01),
                                  cfg.c_mu_min, cfg.c_mu_max)
                perturbed = alloc.allocation_objective(problem, c_in, sol.c_mec)
                assert perturbed >= sol.objective * (1 - 1e-12)

    def test_propagates_infeasibility(self, cfg):
        cfg = cfg.replace(c_uav_max=1.5e8)
        problem = make_problem(cfg, [5e5, 5e5], [1.0, 1.0])
        with pytest.raises(alloc.AllocInfeasibleError):
            alloc.solve_p11(problem)


class TestBruteForce:
    def test_degenerate_single_point_grid(self, cfg):
        problem = make_problem(cfg, [5e5], [0.5])
        sol = alloc.brute_force_alloc(problem, 1)
        assert sol.c_in[0] == cfg.c_mu_min
        assert sol.c_mec[0] == cfg.c_mu_min

    def test_monotone_nested_refinement(self, cfg):
        cfg = cfg.replace(c_uav_max=3e9)
        rng = np.random.default_rng(41)
        problem = make_problem(cfg, rng.uniform(1e5, 1e6, 2),
                               rng.uniform(0.3, 1.0, 2))
        objectives = []
        g = 5
        for _ in range(4):
            objectives.append(alloc.brute_force_alloc(problem, g).objective)
            g = 2 * g - 1   # nested linspace keeps all previous points
        assert all(a >= b - 1e-15 for a, b in zip(objectives, objectives[1:]))

    def test_agrees_with_solver_within_two_cells(self, cfg):
        rng = np.random.default_rng(53)
        for _ in range(5):
            tight = float(rng.uniform(2.2e9, 3.5e9))
            case_cfg = NetworkConfig().replace(c_uav_max=tight)
            problem = make_problem(case_cfg, rng.uniform(1e5, 1e6, 2),
                                   rng.uniform(0.3, 1.0, 2))
            grid_n = 120
            cell = (case_cfg.c_uav_max - case_cfg.c_mu_min) / (grid_n - 1)
            oracle = alloc.brute_force_alloc(problem, grid_n)
            sol = alloc.solve_p11(problem)
            assert np.all(np.abs(sol.c_mec - oracle.c_mec) <= 2 * cell)
            assert sol.objective <= oracle.objective * (1 + 1e-9)

    def test_scale_guard(self, cfg):
        problem = make_problem(cfg, np.full(5, 5e5), np.full(5, 0.5))
        with pytest.raises(ValueError):
            alloc.brute_force_alloc(problem, 10)
