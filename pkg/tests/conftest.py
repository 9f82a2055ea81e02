import numpy as np
import pytest
from hypothesis import settings

import upliftsim as u

settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")


@pytest.fixture(scope="session")
def gaussian_preset():
    return u.make_gaussian_preset()


@pytest.fixture(scope="session")
def bernoulli_preset():
    return u.make_bernoulli_cluster_preset()


@pytest.fixture
def tiny_spec():
    """K=2, m=3 instance with disjoint affected sets and simple means."""
    baseline = np.array([0.2, 0.4, 0.6])
    action_means = np.array([
        [0.5, 0.4, 0.6],
        [0.2, 0.7, 0.6],
    ])
    cov = np.eye(3) * 0.25
    return u.UpliftingBanditSpec(
        num_actions=2,
        num_variables=3,
        baseline_means=baseline,
        action_means=action_means,
        affected_sets=(frozenset({1}), frozenset({2})),
        noise_model=u.GaussianCorrelated(cov),
    )
