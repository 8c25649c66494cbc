import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from influopt.fw import SolverConfig, solve_fw
from influopt.model import CampaignInstance, FormatError, ImpressionMatrix
from influopt.multiplatform import (MultiPlatformInstance, Variant, combine_platforms,
                                    cost_proportional_sigma, dumps_mp, flatten, load_mp,
                                    loads_mp, mp_objective_and_gradient, mp_potentials,
                                    platform_spend, save_mp, single_platform, solve_mp,
                                    uniform_zeta, validate_mp)
from influopt.utility import UtilitySpec, evaluate, gradient, total_utility
from oracles import cvx_optimum, fd_gradient, random_impressions, random_instance

LOG5 = UtilitySpec.log(5.0)


def random_mp(rng, L, Q, N, variant=Variant.PER_PLATFORM, budget_share=0.4):
    grid = []
    for _ in range(L):
        row = []
        for _ in range(Q):
            p = random_impressions(rng, N).to_dense() / Q
            row.append(ImpressionMatrix.from_dense(p))
        grid.append(tuple(row))
    rates = rng.uniform(0.2, 2.0, (L, Q, N))
    costs = rng.uniform(0.5, 3.0, (L, Q, N))
    caps = rng.uniform(0.2, 1.0, (L, Q, N))
    adv = int(rng.integers(N))
    full = np.delete(rates * costs * caps, adv, axis=2).sum()
    return MultiPlatformInstance(tuple(grid), adv, rates, costs, caps,
                                 rng.uniform(0.2, 1.0, (L, Q)), rng.uniform(0.2, 1.0, L),
                                 budget_share * full, variant)


def dense_mp_potentials(mp, a):
    L, Q, N = mp.shape
    a = np.asarray(a).reshape(L, Q, N - 1)
    omega = np.zeros((L, N))
    for l in range(L):
        for q in range(Q):
            p = mp.impressions[l][q].to_dense()
            full = np.zeros(N)
            full[mp.others] = a[l, q]
            full[mp.advertiser] = mp.caps[l, q, mp.advertiser]
            for j in range(N):
                for n in range(N):
                    if n != j:
                        omega[l, j] += mp.zeta[l, q] * p[n, j] * full[n]
    return omega


def dense_value(mp, spec, a):
    omega = np.delete(dense_mp_potentials(mp, a), mp.advertiser, axis=1)
    if mp.variant is Variant.SHARED:
        return float(evaluate(spec, omega.sum(axis=0)).sum())
    return float(mp.sigma @ evaluate(spec, omega).sum(axis=1))


class TestFlatten:
    def test_single_platform_reduction(self, rng):
        inst = random_instance(rng, 7)
        mp = single_platform(inst)
        a = rng.random(inst.dim) * inst.decision_caps
        u, g = mp_objective_and_gradient(mp, LOG5, a)
        assert u == pytest.approx(total_utility(inst, LOG5, a), abs=1e-12)
        np.testing.assert_allclose(g, gradient(inst, LOG5, a), rtol=0, atol=1e-12)
        flat = flatten(mp, LOG5).problem
        np.testing.assert_allclose(flat.rho, inst.rho, rtol=0, atol=0)

    def test_dimension(self, rng):
        mp = random_mp(rng, 2, 3, 5)
        flat = flatten(mp, LOG5)
        assert mp.dim == 24 and flat.problem.dim == 24 and flat.index.shape == (24, 3)

    def test_round_trip_and_index(self, rng):
        mp = random_mp(rng, 2, 3, 5)
        flat = flatten(mp, LOG5)
        a = rng.random((2, 3, 4))
        np.testing.assert_array_equal(flat.unflatten(flat.flatten(a)), a)
        v = flat.flatten(a)
        for k, (l, q, n) in enumerate(flat.index):
            assert v[k] == a[l, q, np.searchsorted(mp.others, n)]
        with pytest.raises(ValueError):
            flat.unflatten(np.zeros(5))


class TestPotentials:
    def test_zero_without_advertiser_reach(self):
        imp = ImpressionMatrix.from_dense([[0.0, 0.0], [0.4, 0.0]])
        mp = MultiPlatformInstance(((imp,),), 0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
        np.testing.assert_array_equal(mp_potentials(mp, [0.0]), np.zeros((1, 2)))

    def test_single_entry(self):
        imp = ImpressionMatrix.from_dense([[0.0, 0.0, 0.0], [0.0, 0.0, 0.4], [0.0, 0.0, 0.0]])
        mp = MultiPlatformInstance(((imp,),), 0, 1.0, 1.0, 1.0, 0.5, 1.0, 1.0)
        assert mp_potentials(mp, [1.0, 0.0])[0, 2] == pytest.approx(0.2, abs=1e-15)

    def test_matches_dense(self, rng):
        for variant in Variant:
            mp = random_mp(rng, 2, 2, 5, variant)
            a = rng.random(mp.dim)
            np.testing.assert_allclose(mp_potentials(mp, a), dense_mp_potentials(mp, a),
                                       rtol=0, atol=1e-12)
            u, _ = mp_objective_and_gradient(mp, LOG5, a)
            assert u == pytest.approx(dense_value(mp, LOG5, a), abs=1e-12)

    def test_dimension_mismatch(self, rng):
        mp = random_mp(rng, 2, 2, 4)
        with pytest.raises(ValueError):
            mp_potentials(mp, np.zeros(3))


class TestGradient:
    @pytest.mark.parametrize("variant", list(Variant))
    def test_finite_differences(self, rng, variant):
        mp = random_mp(rng, 2, 2, 5, variant)
        a = rng.uniform(0.2, 0.8, mp.dim)
        spec = UtilitySpec.log(10.0)
        fd = fd_gradient(lambda x: dense_value(mp, spec, x), a)
        _, g = mp_objective_and_gradient(mp, spec, a)
        assert np.max(np.abs(fd - g)) / np.max(np.abs(g)) <= 1e-5

    def test_linear_gradient_is_constant(self, rng):
        mp = random_mp(rng, 2, 3, 4)
        spec = UtilitySpec.linear(2.0)
        _, g0 = mp_objective_and_gradient(mp, spec, np.zeros(mp.dim))
        _, g1 = mp_objective_and_gradient(mp, spec, rng.random(mp.dim))
        np.testing.assert_allclose(g0, g1, rtol=0, atol=1e-14)

    def test_reach_rejected(self, rng):
        mp = random_mp(rng, 1, 1, 3)
        with pytest.raises(ValueError):
            mp_objective_and_gradient(mp, UtilitySpec.reach(0.0), np.zeros(mp.dim))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0, 1))
    def test_concave(self, seed, t):
        rng = np.random.default_rng(seed)
        mp = random_mp(rng, 2, 2, 4)
        a, b = rng.random((2, mp.dim))
        f = lambda x: mp_objective_and_gradient(mp, LOG5, x)[0]  # noqa: E731
        assert f(t * a + (1 - t) * b) >= t * f(a) + (1 - t) * f(b) - 1e-9


class TestSolve:
    def test_single_platform_matches_fw(self, rng):
        inst = random_instance(rng, 8)
        cfg = SolverConfig(max_iters=100, tol=1e-12)
        ref = solve_fw(inst, LOG5, cfg)
        got = solve_mp(single_platform(inst), LOG5, cfg)
        np.testing.assert_allclose(got.report.a, ref.a, rtol=0, atol=1e-9)
        assert got.roi_ratio is None

    def test_zero_weight_platform_gets_nothing(self, rng):
        for _ in range(3):
            a_inst, b_inst = random_instance(rng, 4), random_instance(rng, 4)
            budget = 0.5 * a_inst.budget
            mp, _ = combine_platforms([a_inst, b_inst], [1.0, 0.0], budget)
            rep = solve_mp(mp, LOG5, SolverConfig(max_iters=2000, tol=1e-10))
            assert rep.spend[1] == 0.0
            alone = CampaignInstance(a_inst.impressions, a_inst.advertiser, a_inst.rates,
                                     a_inst.costs, a_inst.caps, budget)
            u_star, _ = cvx_optimum(alone, LOG5)
            assert rep.report.objective == pytest.approx(u_star, rel=1e-4)

    def test_budget_additivity(self, rng):
        mp = random_mp(rng, 3, 2, 6)
        rep = solve_mp(mp, LOG5, SolverConfig(max_iters=30, tol=1e-12))
        total = flatten(mp, LOG5).problem.spend(rep.report.a)
        assert rep.spend.sum() == pytest.approx(total, abs=1e-12)
        np.testing.assert_array_equal(rep.spend, platform_spend(mp, rep.a))
        assert total <= mp.budget + 1e-9
        assert rep.report.objective == pytest.approx(rep.roi.sum(), abs=1e-9)

    def test_roi_ratio_two_platforms(self, rng):
        mp = random_mp(rng, 2, 1, 5)
        rep = solve_mp(mp, LOG5, SolverConfig(max_iters=20, tol=1e-12))
        assert rep.roi_ratio == pytest.approx(rep.roi[1] / rep.roi[0])
        assert rep.report.extra["roi_ratio"] == rep.roi_ratio


class TestCombine:
    def test_blocks_and_maps(self, rng):
        a_inst, b_inst = random_instance(rng, 4), random_instance(rng, 5)
        mp, maps = combine_platforms([a_inst, b_inst], [0.5, 0.5], 3.0)
        assert mp.shape == (2, 1, 1 + 3 + 4) and mp.advertiser == 0
        assert maps[0][a_inst.advertiser] == 0 and maps[1][b_inst.advertiser] == 0
        np.testing.assert_array_equal(mp.rates[1, 0, maps[1]], b_inst.rates)
        assert np.all(mp.rates[0, 0, 4:] == 0)
        assert validate_mp(mp) == []


class TestHelpers:
    def test_weights(self):
        np.testing.assert_array_equal(uniform_zeta(2, 4), np.full((2, 4), 0.25))
        np.testing.assert_allclose(cost_proportional_sigma([1.0, 3.0]), [0.25, 0.75])
        with pytest.raises(ValueError):
            cost_proportional_sigma([0.0, 0.0])

    def test_validate_flags_overfull_column(self):
        p = np.zeros((3, 3))
        p[1, 2] = 0.7
        imp = ImpressionMatrix.from_dense(p)
        mp = MultiPlatformInstance(((imp, imp),), 0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
        v = validate_mp(mp)
        assert [x.rule for x in v] == ["column normalization exceeded"]
        assert v[0].where == "platform 0 viewer 2"

    def test_constructor_checks(self):
        imp = ImpressionMatrix.from_dense(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            MultiPlatformInstance(((imp,),), 5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            MultiPlatformInstance(((imp,),), 0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            MultiPlatformInstance(((imp,),), 0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0)


class TestFormat:
    @pytest.mark.parametrize("variant", list(Variant))
    def test_round_trip(self, rng, tmp_path, variant):
        mp = random_mp(rng, 2, 2, 4, variant)
        save_mp(mp, tmp_path / "x.mp")
        back = load_mp(tmp_path / "x.mp")
        assert dumps_mp(back) == dumps_mp(mp)
        a = rng.random(mp.dim)
        np.testing.assert_array_equal(mp_potentials(back, a), mp_potentials(mp, a))

    @pytest.mark.parametrize("text", ["", "bpo-instance v1\n", "bpo-mp v1\nL 1\n",
                                      "bpo-mp v1\nL 1\nQ 1\nN 2\nadvertiser 0\nbudget 1\nzap\n"])
    def test_malformed(self, text):
        with pytest.raises(FormatError):
            loads_mp(text)
