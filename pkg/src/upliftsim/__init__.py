"""Uplift-estimating bandit policies, instance families and a replicated-run
verification harness."""

from .core import (
    BASELINE,
    BernoulliIndependent,
    GaussianCorrelated,
    RegretTrace,
    UpliftingBanditSpec,
    action_uplift,
    clip,
    expected_reward,
    load_spec,
    regret_of_run,
    save_spec,
    spec_from_dict,
    spec_to_dict,
    suboptimality_gaps,
    validate_spec,
)
from .environments import (
    BLOCK_SHARED,
    FULLY_SHARED,
    EnvironmentInstance,
    make_bernoulli_cluster_preset,
    make_environment,
    make_gaussian_preset,
    make_lower_bound_environment,
    make_lower_bound_instance,
)
from .estimators import (
    ConfidenceInterval,
    EstimatorState,
    baseline_mean_estimate,
    confidence_interval,
    mean_estimate,
    observe,
    radius,
    ucb_index,
)
from .contextual import (
    LinearContextualEnvironment,
    RidgeModel,
    beta_schedule,
    c2upucb_select,
    linucb_index,
    make_linear_contextual_env,
    ridge_update,
    run_c2upucb,
)
from .policies import make_policy, pull_count_bound, regret_bound, theory_delta_tilde, theory_lambda

__version__ = "0.1.0"
