import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from influopt.fw import (CURVATURE_FLOOR, InfeasibleError, PotentialProblem,
                         SolverConfig, StepRule, estimate_curvature, golden_section_max,
                         heuristic_rule_of_thumb, solve_fw, step_size)
from influopt.model import CampaignInstance, ImpressionMatrix, spend
from influopt.oracle import LinearOracle
from influopt.utility import UtilitySpec, gradient, total_utility
from oracles import cvx_optimum, random_instance

LOG5 = UtilitySpec.log(5.0)


class TestStepSize:
    def test_harmonic(self):
        cfg = SolverConfig(step=StepRule.HARMONIC)
        assert step_size(cfg, 0) == 1.0
        assert step_size(cfg, 3) == 0.4

    def test_gap_over_curvature(self):
        cfg = SolverConfig(step=StepRule.GAP_OVER_CURVATURE, curvature=2.0)
        assert step_size(cfg, 0, gap=5.0) == 1.0
        assert step_size(cfg, 0, gap=1.0) == 0.5
        with pytest.raises(ValueError):
            step_size(SolverConfig(step="gapc"), 0, gap=1.0, curvature=0.0)

    def test_line_search_on_quadratic(self):
        # phi(g) = -(g - c)^2 has its maximiser at c (clipped to [0, 1])
        for c in (0.0, 0.137, 0.5, 0.93, 1.0, 1.7):
            got = step_size(SolverConfig(), 0, line=lambda g: -(g - c) ** 2)
            assert got == pytest.approx(min(c, 1.0), abs=1e-6)

    def test_golden_section_endpoints(self):
        assert golden_section_max(lambda g: g) == 1.0
        assert golden_section_max(lambda g: -g) == 0.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(max_iters=0)
        with pytest.raises(ValueError):
            SolverConfig(tol=0.0)
        with pytest.raises(ValueError):
            SolverConfig(step="newton")


class TestCurvature:
    def test_linear_is_flat(self, small_instance):
        assert estimate_curvature(small_instance, UtilitySpec.linear(1.0)) <= 1e-9

    def test_no_probes_gives_floor(self, small_instance):
        assert estimate_curvature(small_instance, LOG5, probes=0) == CURVATURE_FLOOR

    def test_single_viewer_log_bound(self):
        # one viewer fed by one influencer with p = 0.5; U = log(d * 0.5 a + 1)
        p = np.zeros((3, 3))
        p[1, 2] = 0.5
        inst = CampaignInstance.build(ImpressionMatrix.from_dense(p), 0, 10.0)
        inst = CampaignInstance(inst.impressions, 0, np.ones(3), np.ones(3),
                                np.array([1.0, 1.0, 1.0]), 10.0)
        d = 5.0
        C = estimate_curvature(inst, UtilitySpec.log(d), probes=64)
        # over a segment from 0 to the vertex a = 1 the linearisation error is exact
        u = lambda a: np.log(d * 0.5 * a + 1)  # noqa: E731
        err = 2.0 * (u(0.0) + d * 0.5 * 1.0 - u(1.0))
        assert C >= err - 1e-12
        # and never exceeds the worst-case second derivative bound over the segment
        assert C <= (d * 0.5) ** 2 + 1e-12


class TestSolveFW:
    def test_linear_one_step_equals_heuristic(self, rng):
        for _ in range(10):
            inst = random_instance(rng, int(rng.integers(3, 12)), free_share=0.2)
            rep = solve_fw(inst, UtilitySpec.linear(1.0), SolverConfig(tol=1e-12))
            assert rep.iterations == 1 and rep.step_sizes == [1.0]
            np.testing.assert_array_equal(rep.a, heuristic_rule_of_thumb(inst))
            phi = gradient(inst, UtilitySpec.linear(1.0), np.zeros(inst.dim))
            np.testing.assert_array_equal(
                rep.a, LinearOracle(inst.rho, inst.decision_caps, inst.budget)(phi))

    def test_generous_budget_buys_everything(self, rng):
        inst = random_instance(rng, 8, budget_share=1.5)
        rep = solve_fw(inst, UtilitySpec.log(3.0))
        has_reach = gradient(inst, UtilitySpec.log(3.0), np.zeros(inst.dim)) > 0
        np.testing.assert_array_equal(rep.a[has_reach], inst.decision_caps[has_reach])

    def test_harmonic_converges_to_brute_force(self, rng):
        inst = random_instance(rng, 6)
        u_star, _ = cvx_optimum(inst, LOG5)
        rep = solve_fw(inst, LOG5, SolverConfig(max_iters=500, tol=1e-12,
                                                step=StepRule.HARMONIC))
        assert rep.objective == pytest.approx(u_star, rel=1e-4)

    @pytest.mark.parametrize("step", list(StepRule))
    def test_feasible_iterates(self, rng, step):
        inst = random_instance(rng, 10)
        rep = solve_fw(inst, LOG5, SolverConfig(max_iters=50, tol=1e-9, step=step))
        assert rep.budget_excess <= 1e-9 and rep.box_excess <= 1e-12
        assert spend(inst, rep.a) <= inst.budget + 1e-9

    def test_line_search_is_monotone(self, rng):
        for _ in range(5):
            inst = random_instance(rng, 12)
            rep = solve_fw(inst, UtilitySpec.maxmin(), SolverConfig(max_iters=60, tol=1e-12))
            assert np.all(np.diff(rep.objective_trace) >= -1e-12)

    def test_gap_bounds_primal_suboptimality(self, rng):
        inst = random_instance(rng, 9)
        long = solve_fw(inst, LOG5, SolverConfig(max_iters=2000, tol=1e-12)).objective
        rep = solve_fw(inst, LOG5, SolverConfig(max_iters=15, tol=1e-12,
                                                step=StepRule.HARMONIC))
        for u, g in zip(rep.objective_trace, rep.gap_trace):
            assert g >= long - u - 1e-9

    def test_report_consistency(self, small_instance):
        rep = solve_fw(small_instance, LOG5, SolverConfig(max_iters=7, tol=1e-12))
        assert len(rep.objective_trace) == len(rep.gap_trace) == rep.iterations + 1
        assert len(rep.iteration_times) == rep.iterations + 1
        assert rep.objective == rep.objective_trace[-1]
        assert rep.objective == pytest.approx(total_utility(small_instance, LOG5, rep.a), abs=1e-12)
        assert rep.termination in ("GapBelowTol", "MaxIters")

    def test_gap_termination(self, small_instance):
        rep = solve_fw(small_instance, LOG5, SolverConfig(max_iters=500, tol=1e-3))
        assert rep.termination == "GapBelowTol" and rep.gap_trace[-1] < 1e-3

    def test_first_step_taken_despite_loose_tolerance(self, rng):
        inst = random_instance(rng, 8, budget_share=1e-3)
        rep = solve_fw(inst, LOG5, SolverConfig(tol=1e6))
        assert rep.iterations == 1 and rep.objective > rep.objective_trace[0]
        assert rep.termination == "GapBelowTol"

    def test_infeasible_init(self, small_instance):
        bad = 2.0 * np.ones(small_instance.dim)
        with pytest.raises(InfeasibleError):
            solve_fw(small_instance, LOG5, SolverConfig(init=bad))
        with pytest.raises(ValueError):
            solve_fw(small_instance, LOG5, SolverConfig(init=np.zeros(2)))

    def test_reach_is_rejected(self, small_instance):
        with pytest.raises(ValueError, match="non-differentiable"):
            solve_fw(small_instance, UtilitySpec.reach(0.0))


class TestHeuristic:
    def test_zero_budget(self, rng):
        inst = random_instance(rng, 6, budget_share=0.0)
        np.testing.assert_array_equal(heuristic_rule_of_thumb(inst), np.zeros(inst.dim))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_dominated_by_fw(self, seed):
        rng = np.random.default_rng(seed)
        inst = random_instance(rng, 8)
        spec = UtilitySpec.log(10.0)
        fw = solve_fw(inst, spec, SolverConfig(max_iters=300, tol=1e-10)).objective
        assert total_utility(inst, spec, heuristic_rule_of_thumb(inst)) <= fw + 1e-9


class TestPotentialProblem:
    def test_matches_instance_functions(self, rng):
        inst = random_instance(rng, 9)
        prob = PotentialProblem.from_instance(inst, LOG5)
        a = rng.random(inst.dim) * inst.decision_caps
        assert prob.value(a) == pytest.approx(total_utility(inst, LOG5, a), abs=1e-12)
        np.testing.assert_allclose(prob.gradient(a), gradient(inst, LOG5, a), atol=1e-12)
        assert prob.spend(a) == pytest.approx(spend(inst, a), abs=1e-12)

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            PotentialProblem(np.eye(2), np.zeros(3), np.ones(2), LOG5, np.ones(2), np.ones(2), 1.0)
        with pytest.raises(ValueError):
            PotentialProblem(np.eye(2), np.zeros(2), np.ones(2), LOG5, np.ones(3), np.ones(2), 1.0)
