import numpy as np
import pytest

import upliftsim as u
from upliftsim import policies as P
from upliftsim.checks import InvariantChecker, InvariantViolation, coverage_run, run_policy_checked
from upliftsim.rng import substream


def build(tag, spec, lam=1.5, **kw):
    return P.make_policy(
        tag, num_actions=spec.num_actions, num_variables=spec.num_variables, lam=lam,
        horizon=kw.pop("horizon", 600),
        baseline_means=spec.baseline_means, affected_sets=spec.affected_sets,
        L_bound=kw.pop("L_bound", int(spec.affected_counts.max())),
        epsilon=kw.pop("epsilon", 0.03),
        sigma2=0.1, prior_mean=50.0, prior_var=0.01, rng=substream(9, "chk"), **kw)


@pytest.mark.parametrize("tag", list(P.ALL_TAGS))
def test_all_policies_pass_checks(gaussian_preset, tag):
    env = u.make_environment(gaussian_preset, 123)
    pol = build(tag, gaussian_preset)
    actions, checker = run_policy_checked(gaussian_preset, env, pol, 400)
    assert checker.rounds_checked == 400
    assert actions.min() >= 1 and actions.max() <= 10


def test_checks_pass_on_lower_bound_instance():
    spec = u.make_lower_bound_instance(3, 6, [0.0, 0.4, 1.0], [2, 3, 6], "FULLY_SHARED")
    env = u.make_environment(spec, 5)
    pol = P.make_policy("UPUCB_WB", num_actions=3, num_variables=6, lam=1.0,
                        affected_sets=spec.affected_sets)
    run_policy_checked(spec, env, pol, 300)


def test_checks_pass_with_ilift_wb_transition(gaussian_preset):
    # small lambda forces the phase switch early so both phases are covered
    env = u.make_environment(gaussian_preset, 3)
    pol = build("UPUCB_ILIFT_WB", gaussian_preset, lam=1e-4, horizon=300)
    run_policy_checked(gaussian_preset, env, pol, 300)
    assert pol.phase == pol.UPUCB


def test_domination_violation_detected(gaussian_preset):
    env = u.make_environment(gaussian_preset, 8)
    pol = build("UPUCB_WB", gaussian_preset)
    checker = InvariantChecker(gaussian_preset, pol)
    for t in range(1, 30):
        a = pol.select_action(t)
        x = env.sample_payoffs(a)
        pol.observe(a, x)
        checker.after_observe(a, x)
    pol.est.baseline_counts[:] = 0  # corrupt the state on purpose
    a = pol.select_action(30)
    x = env.sample_payoffs(a)
    pol.observe(a, x)
    with pytest.raises(InvariantViolation, match="domination"):
        checker.after_observe(a, x)


def test_transformed_reward_violation_detected(gaussian_preset):
    env = u.make_environment(gaussian_preset, 8)
    pol = build("UPUCB_BL", gaussian_preset)
    checker = InvariantChecker(gaussian_preset, pol)
    for t in range(1, 20):
        a = pol.select_action(t)
        x = env.sample_payoffs(a)
        pol.observe(a, x)
        checker.after_observe(a, x)
    checker.transformed_sums += 5.0  # desync the oracle route
    a = pol.select_action(20)
    x = env.sample_payoffs(a)
    pol.observe(a, x)
    with pytest.raises(InvariantViolation, match="transformed-reward"):
        checker.after_observe(a, x)


def test_coverage_run_mostly_clean(gaussian_preset):
    # at the theory-mode radius, violations should be rare
    lam = P.theory_lambda("UPUCB_BL", 10, 100, 500, 0.05)
    bad_a = bad_0 = 0
    for seed in range(20):
        env = u.make_environment(gaussian_preset, seed)
        va, v0 = coverage_run(gaussian_preset, env, lam, 500)
        bad_a += va
        bad_0 += v0
    assert bad_a <= 2 and bad_0 <= 2
