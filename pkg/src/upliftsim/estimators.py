"""Online sufficient statistics and the confidence-bound formulas policies use.

The exploration scale ``lam`` is the single exposed knob: theory-mode callers
pass log(1/delta_tilde), tuned-mode callers pass a grid value directly.  A
count of zero yields an infinite radius; +inf compares greater than any
finite real, which forces initial exploration even if a policy skips the
round-robin phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BASELINE

INF = math.inf


def radius(count: int, lam: float) -> float:
    """Confidence radius sqrt(2*lam/count); +inf when the count is zero."""
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return INF
    return math.sqrt(2.0 * lam / count)


def radius_vector(counts: np.ndarray, lam: float) -> np.ndarray:
    """Vectorized :func:`radius` over an integer count array."""
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    counts = np.asarray(counts, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(counts > 0, np.sqrt(2.0 * lam / np.maximum(counts, 1e-300)), INF)


class EstimatorState:
    """Counts and running payoff sums per action, plus the cross-action
    baseline statistics when affected sets are known.

    Single-writer: one state per run, updated in place by :func:`observe`.
    """

    def __init__(self, num_actions: int, num_variables: int, track_baseline: bool = False):
        self.num_actions = int(num_actions)
        self.num_variables = int(num_variables)
        self.pull_counts = np.zeros(self.num_actions, dtype=np.int64)
        self.payoff_sums = np.zeros((self.num_actions, self.num_variables))
        if track_baseline:
            self.baseline_counts = np.zeros(self.num_variables, dtype=np.int64)
            self.baseline_sums = np.zeros(self.num_variables)
        else:
            self.baseline_counts = None
            self.baseline_sums = None
        self.round = 0

    @property
    def tracks_baseline(self) -> bool:
        return self.baseline_counts is not None


def new_state(num_actions: int, num_variables: int, track_baseline: bool = False) -> EstimatorState:
    return EstimatorState(num_actions, num_variables, track_baseline)


def observe(state: EstimatorState, a: int, payoffs, affected_sets=None) -> EstimatorState:
    """Record one round: action ``a`` was taken and ``payoffs`` observed.

    When affected sets are supplied, every variable the action does not
    affect also feeds the baseline estimator.
    """
    payoffs = np.asarray(payoffs, dtype=float)
    if payoffs.shape != (state.num_variables,):
        raise ValueError(f"payoff vector must have length {state.num_variables}")
    if not 1 <= a <= state.num_actions:
        raise IndexError(f"action index {a} out of range 1..{state.num_actions}")
    state.pull_counts[a - 1] += 1
    state.payoff_sums[a - 1] += payoffs
    state.round += 1
    if affected_sets is not None:
        if not state.tracks_baseline:
            raise ValueError("state was created without baseline tracking")
        unaffected = np.ones(state.num_variables, dtype=bool)
        for v in affected_sets[a - 1]:
            unaffected[v - 1] = False
        state.baseline_counts[unaffected] += 1
        state.baseline_sums[unaffected] += payoffs[unaffected]
    return state


def mean_estimate(state: EstimatorState, a: int, v: int) -> float:
    """Empirical mean payoff of (action, variable); 0 before the first pull
    (the max(1, count) convention)."""
    return float(state.payoff_sums[a - 1, v - 1] / max(1, state.pull_counts[a - 1]))


def baseline_mean_estimate(state: EstimatorState, v: int) -> float:
    if not state.tracks_baseline:
        raise ValueError("state does not track baseline statistics")
    return float(state.baseline_sums[v - 1] / max(1, state.baseline_counts[v - 1]))


def mean_matrix(state: EstimatorState) -> np.ndarray:
    """(K, m) matrix of empirical means with the max(1, count) convention."""
    return state.payoff_sums / np.maximum(state.pull_counts, 1)[:, None]


def baseline_mean_vector(state: EstimatorState) -> np.ndarray:
    return state.baseline_sums / np.maximum(state.baseline_counts, 1)


def _intersection_mask(affected_sets, num_variables: int) -> np.ndarray:
    common = None
    for s in affected_sets:
        common = set(s) if common is None else common & set(s)
    mask = np.zeros(num_variables, dtype=bool)
    for v in common or ():
        mask[v - 1] = True
    return mask


def ucb_index(state: EstimatorState, a, v: int, lam: float, affected_sets) -> float:
    """Three-case upper confidence index.

    BASELINE on a variable affected by every action is pinned to 0 (no
    dedicated baseline arm exists, so those variables are only ever compared
    between actions).  An action on a variable it affects uses its own
    statistics; everything else falls back to the baseline estimator.
    """
    if a is BASELINE:
        if all(v in s for s in affected_sets):
            return 0.0
        return baseline_mean_estimate(state, v) + radius(int(state.baseline_counts[v - 1]), lam)
    if v in affected_sets[a - 1]:
        return mean_estimate(state, a, v) + radius(int(state.pull_counts[a - 1]), lam)
    return baseline_mean_estimate(state, v) + radius(int(state.baseline_counts[v - 1]), lam)


@dataclass(frozen=True)
class ConfidenceInterval:
    """Closed interval center +- radius; an infinite radius covers the line."""

    center: float
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    @property
    def lower(self) -> float:
        return self.center - self.radius

    @property
    def upper(self) -> float:
        return self.center + self.radius

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    def intersects(self, other: "ConfidenceInterval") -> bool:
        """Closed-interval intersection: touching endpoints intersect."""
        return self.lower <= other.upper and other.lower <= self.upper


def confidence_interval(state: EstimatorState, a: int, v: int, lam: float) -> ConfidenceInterval:
    return ConfidenceInterval(
        center=mean_estimate(state, a, v),
        radius=radius(int(state.pull_counts[a - 1]), lam),
    )
