import itertools
import math

import numpy as np
import pytest

import upliftsim as u
from upliftsim.contextual import (
    LinearContextualEnvironment,
    RidgeModel,
    beta_schedule,
    c2upucb_select,
    linucb_index,
    ridge_update,
    run_c2upucb,
)
from upliftsim.rng import substream


class TestRidgeModel:
    def test_zero_moment_zero_estimate(self):
        model = RidgeModel(dim=3, num_treatments=1, lambda_reg=1.0)
        assert np.all(model.estimate(0) == 0)
        assert np.all(model.estimate(1) == 0)

    def test_one_dimensional_update(self):
        model = RidgeModel(dim=1, num_treatments=1, lambda_reg=1.0)
        ridge_update(model, 1, np.array([1.0]), 2.0)
        assert model.estimate(1)[0] == pytest.approx(1.0)

    def test_batch_least_squares_oracle(self):
        # theta-hat equals (lambda I + X'X)^-1 X'y from a direct dense solve
        rng = substream(0, "ridge")
        d, n, lam = 4, 400, 2.5
        model = RidgeModel(dim=d, num_treatments=1, lambda_reg=lam)
        X = rng.standard_normal((n, d)) * 0.4
        y = rng.standard_normal(n)
        for i in range(n):
            model.update(1, X[i], y[i])
        direct = np.linalg.solve(lam * np.eye(d) + X.T @ X, X.T @ y)
        np.testing.assert_allclose(model.estimate(1), direct, atol=1e-9)

    def test_refactorization_bounds_drift(self):
        # past the refactor cadence the cached inverse still matches a solve
        rng = substream(1, "ridge")
        d, n, lam = 3, 700, 1.0
        model = RidgeModel(dim=d, num_treatments=0, lambda_reg=lam)
        X = rng.standard_normal((n, d)) * 0.5
        for i in range(n):
            model.update(0, X[i], float(X[i].sum()))
        np.testing.assert_allclose(model.gram_inverse(0) @ model.gram(0), np.eye(d), atol=1e-8)

    def test_dimension_mismatch(self):
        model = RidgeModel(dim=2, num_treatments=1, lambda_reg=1.0)
        with pytest.raises(ValueError):
            model.update(1, np.zeros(3), 1.0)


class TestLinUcbIndex:
    def test_beta_zero_is_prediction(self):
        model = RidgeModel(dim=2, num_treatments=1, lambda_reg=1.0)
        model.update(1, np.array([1.0, 0.0]), 3.0)
        x = np.array([1.0, 0.0])
        assert linucb_index(model, 1, x, 0.0) == pytest.approx(float(model.estimate(1) @ x))

    def test_fresh_model_unit_feature(self):
        model = RidgeModel(dim=3, num_treatments=1, lambda_reg=1.0)
        x = np.array([1.0, 0.0, 0.0])
        assert linucb_index(model, 1, x, 2.5) == pytest.approx(2.5)

    def test_width_matches_dense_solve(self):
        rng = substream(2, "linucb")
        d = 5
        model = RidgeModel(dim=d, num_treatments=1, lambda_reg=3.0)
        for _ in range(80):
            model.update(1, rng.standard_normal(d) * 0.4, rng.standard_normal())
        x = rng.standard_normal(d) * 0.3
        beta = 1.7
        width = linucb_index(model, 1, x, beta) - linucb_index(model, 1, x, 0.0)
        expect = beta * math.sqrt(float(x @ np.linalg.solve(model.gram(1), x)))
        assert width == pytest.approx(expect, abs=1e-9)

    def test_negative_beta_rejected(self):
        model = RidgeModel(dim=1, num_treatments=1, lambda_reg=1.0)
        with pytest.raises(ValueError):
            linucb_index(model, 1, np.array([1.0]), -0.1)


class TestBetaSchedule:
    def test_plug_in_value(self):
        # at t=0 the determinant term vanishes; delta = 2/e makes the log
        # term equal one, giving 1 + sqrt(2)
        got = beta_schedule(0, S=1.0, lambda_reg=1.0, d=3, m=10, Z=1, delta=2.0 / math.e)
        assert got == pytest.approx(1.0 + math.sqrt(2.0))

    def test_monotone_in_t(self):
        vals = [beta_schedule(t, 1.0, 2.0, 4, 50, 2, 0.05) for t in range(0, 2000, 50)]
        assert np.all(np.diff(vals) >= 0)

    def test_symbolic_reevaluation(self):
        t, S, lam, d, m, Z, delta = 100, 1.0, 10.0, 5, 100, 2, 0.05
        expect = math.sqrt(lam) * S + math.sqrt(
            2 * math.log((Z + 1) / delta) + d * math.log(1 + m * t / (d * lam)))
        assert beta_schedule(t, S, lam, d, m, Z, delta) == pytest.approx(expect)


class TestSelect:
    def test_basic_topk(self):
        chosen, z = c2upucb_select(np.array([0.5, -0.1, 0.9]), 2)
        assert chosen == [3, 1]
        assert z == [1, 1]

    def test_negative_excluded_under_budget(self):
        chosen, _ = c2upucb_select(np.array([0.5, -0.1, 0.9]), 3)
        assert chosen == [3, 1]

    def test_multi_treatment_argmax(self):
        idx = np.array([[0.2, 0.8], [0.3, 0.3], [-1.0, -2.0]])
        chosen, z = c2upucb_select(idx, 2)
        assert chosen == [1, 2]
        assert z == [2, 1]  # ties toward the lower treatment

    def test_brute_force_oracle(self):
        # greedy top-L equals exhaustive subset search for the separable sum
        rng = substream(3, "select")
        for _ in range(1000):
            m = int(rng.integers(2, 13))
            L = int(rng.integers(0, 5))
            vals = rng.standard_normal(m)
            chosen, _ = c2upucb_select(vals, L)
            got = sum(vals[v - 1] for v in chosen)
            best = 0.0
            for size in range(0, min(L, m) + 1):
                for subset in itertools.combinations(range(m), size):
                    best = max(best, sum(vals[list(subset)]))
            assert got == pytest.approx(best, abs=1e-12)


class TestEnvironment:
    def test_parameters_in_unit_ball(self):
        env = LinearContextualEnvironment(20, 4, 3, seed=7)
        for z in range(4):
            assert np.linalg.norm(env.theta(z)) <= 1.0 + 1e-12

    def test_features_in_unit_ball(self):
        env = LinearContextualEnvironment(50, 3, 1, seed=8)
        for _ in range(5):
            X = env.draw_features()
            assert np.all(np.linalg.norm(X, axis=1) <= 1.0 + 1e-12)

    def test_zero_noise_payoffs_exact(self):
        env = LinearContextualEnvironment(10, 3, 2, seed=9, noise_scale=0.0)
        X = env.draw_features()
        assign = np.array([0, 1, 2, 0, 1, 2, 0, 1, 2, 0])
        y = env.payoffs(X, assign)
        expect = np.einsum("ij,ij->i", X, env.thetas[assign])
        np.testing.assert_allclose(y, expect, atol=1e-12)

    def test_noise_clipped(self):
        env = LinearContextualEnvironment(2000, 2, 1, seed=10)
        X = env.draw_features()
        y = env.payoffs(X, np.zeros(2000, dtype=np.int64))
        resid = y - X @ env.theta(0)
        assert np.abs(resid).max() <= env.NOISE_CLIP


class TestRunC2UpUcb:
    def test_budget_zero_never_treats(self):
        env = LinearContextualEnvironment(8, 2, 1, seed=11)
        trace = run_c2upucb(env, L=0, T=40, baseline_known=True, lambda_reg=1.0, delta=0.05)
        assert np.all(trace.actions == 0)
        # regret each round equals the oracle's positive-uplift sum
        assert np.all(trace.instant_regret >= 0)

    def test_lambda_below_budget_rejected(self):
        env = LinearContextualEnvironment(8, 2, 1, seed=12)
        with pytest.raises(ValueError):
            run_c2upucb(env, L=3, T=10, baseline_known=True, lambda_reg=1.0, delta=0.05)

    def test_zero_noise_regret_flattens(self):
        # With zero noise the estimates converge, so per-round regret decays
        # toward zero.  (It cannot vanish exactly: features are redrawn every
        # round, so near-ties in true uplift keep occurring at ever smaller
        # scales.)
        env = LinearContextualEnvironment(5, 2, 1, seed=13, noise_scale=0.0)
        trace = run_c2upucb(env, L=2, T=2000, baseline_known=False, lambda_reg=2.0, delta=0.05)
        quarter = 500
        first = trace.instant_regret[:quarter].mean()
        last = trace.instant_regret[-quarter:].mean()
        assert last <= 0.25 * first
        assert np.all(np.diff(trace.cumulative_regret) >= -1e-12)

    def test_potential_inequality_checked(self):
        env = LinearContextualEnvironment(30, 3, 2, seed=14)
        trace, diag = run_c2upucb(env, L=4, T=120, baseline_known=False, lambda_reg=4.0,
                                  delta=0.05, collect_diagnostics=True)
        assert np.all(diag.potential_sums <= diag.potential_bounds + 1e-9)
        assert trace.horizon == 120

    def test_determinism(self):
        env1 = LinearContextualEnvironment(12, 3, 1, seed=15)
        env2 = LinearContextualEnvironment(12, 3, 1, seed=15)
        t1 = run_c2upucb(env1, L=3, T=60, baseline_known=False, lambda_reg=3.0, delta=0.05)
        t2 = run_c2upucb(env2, L=3, T=60, baseline_known=False, lambda_reg=3.0, delta=0.05)
        np.testing.assert_array_equal(t1.actions, t2.actions)
        np.testing.assert_array_equal(t1.cumulative_regret, t2.cumulative_regret)


def test_make_env_factory():
    env = u.make_linear_contextual_env(10, 3, 2, seed=21)
    assert env.m == 10 and env.d == 3 and env.Z == 2
