"""Ground-truth instances and the exact arithmetic of uplifts, gaps and regret.

An instance has K actions and m payoff variables.  Taking an action draws a
payoff vector; the reward is the sum of the payoffs.  Each action perturbs
only the variables in its affected set, so outside that set its mean payoffs
equal the baseline means exactly.  Everything in this module is pure and
deterministic; sampling lives in :mod:`upliftsim.environments`.

Actions are indexed 1..K.  The no-action baseline is addressed by the
distinguished :data:`BASELINE` tag, never by an index, so it cannot be
confused with an action.  Variable indices are also 1-based in the public
API (violation coordinates, affected sets).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np


class _BaselineTag:
    """Singleton tag selecting the baseline instead of an action index."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BASELINE"


BASELINE = _BaselineTag()

ActionOrBaseline = Union[int, _BaselineTag]


def clip(x: float, lo: float, hi: float) -> float:
    """Restrict ``x`` to the interval [lo, hi]."""
    if lo > hi:
        raise ValueError(f"clip requires lo <= hi, got lo={lo}, hi={hi}")
    return max(lo, min(hi, x))


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GaussianCorrelated:
    """Gaussian payoff noise with one covariance shared by baseline and actions.

    The covariance must be symmetric PSD with diagonal entries at most 1 so
    that every per-variable noise is 1-sub-Gaussian.
    """

    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "covariance", _readonly(self.covariance))

    @property
    def kind(self) -> str:
        return "gaussian_correlated"


@dataclass(frozen=True)
class BernoulliIndependent:
    """Independent Bernoulli payoffs; the means are the success probabilities."""

    @property
    def kind(self) -> str:
        return "bernoulli_independent"


NoiseModel = Union[GaussianCorrelated, BernoulliIndependent]


@dataclass(frozen=True)
class UpliftingBanditSpec:
    """Ground truth of one instance: means, affected sets and noise model.

    ``affected_sets`` holds 1-based variable indices.  Immutable after
    construction; safe to share across workers.
    """

    num_actions: int
    num_variables: int
    baseline_means: np.ndarray
    action_means: np.ndarray
    affected_sets: tuple[frozenset[int], ...]
    noise_model: NoiseModel

    def __post_init__(self):
        K, m = self.num_actions, self.num_variables
        if K < 1 or m < 1:
            raise ValueError("num_actions and num_variables must be positive")
        baseline = _readonly(self.baseline_means)
        actions = _readonly(self.action_means)
        if baseline.shape != (m,):
            raise ValueError(f"baseline_means must have shape ({m},)")
        if actions.shape != (K, m):
            raise ValueError(f"action_means must have shape ({K}, {m})")
        if len(self.affected_sets) != K:
            raise ValueError(f"expected {K} affected sets")
        sets = tuple(frozenset(int(v) for v in s) for s in self.affected_sets)
        for a, s in enumerate(sets, start=1):
            for v in s:
                if not 1 <= v <= m:
                    raise ValueError(f"affected set of action {a} has out-of-range variable {v}")
        object.__setattr__(self, "baseline_means", baseline)
        object.__setattr__(self, "action_means", actions)
        object.__setattr__(self, "affected_sets", sets)

    @cached_property
    def affected_mask(self) -> np.ndarray:
        """(K, m) boolean matrix; entry [a-1, v-1] says v is affected by a."""
        mask = np.zeros((self.num_actions, self.num_variables), dtype=bool)
        for a, s in enumerate(self.affected_sets):
            for v in s:
                mask[a, v - 1] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def affected_counts(self) -> np.ndarray:
        """(K,) sizes of the affected sets."""
        out = np.array([len(s) for s in self.affected_sets], dtype=np.int64)
        out.setflags(write=False)
        return out

    def mean_vector(self, a: ActionOrBaseline) -> np.ndarray:
        """Expected payoff vector of an action, or of the baseline."""
        if a is BASELINE:
            return self.baseline_means
        _check_action(self, a)
        return self.action_means[a - 1]


def _check_action(spec: UpliftingBanditSpec, a: int) -> None:
    if not isinstance(a, (int, np.integer)) or isinstance(a, bool):
        raise TypeError(f"action must be an integer in 1..{spec.num_actions} or BASELINE, got {a!r}")
    if not 1 <= a <= spec.num_actions:
        raise IndexError(f"action index {a} out of range 1..{spec.num_actions}")


def expected_reward(spec: UpliftingBanditSpec, a: ActionOrBaseline) -> float:
    """Expected total reward of action ``a`` (or of pure observation)."""
    return float(spec.mean_vector(a).sum())


def action_uplift(spec: UpliftingBanditSpec, a: int) -> float:
    """Total uplift of an action: its mean payoff advantage over the baseline,
    summed over the variables it affects."""
    _check_action(spec, a)
    idx = [v - 1 for v in sorted(spec.affected_sets[a - 1])]
    if not idx:
        return 0.0
    return float((spec.action_means[a - 1, idx] - spec.baseline_means[idx]).sum())


def suboptimality_gaps(spec: UpliftingBanditSpec):
    """Per-action gaps to the best expected reward.

    Returns ``(gaps, min_nonzero_gap)`` where ``min_nonzero_gap`` is None when
    every action is optimal.
    """
    rewards = spec.action_means.sum(axis=1)
    gaps = rewards.max() - rewards
    positive = gaps[gaps > 0]
    min_nonzero = float(positive.min()) if positive.size else None
    return gaps, min_nonzero


@dataclass(frozen=True)
class RegretTrace:
    """Per-round actions with instantaneous and cumulative expected regret."""

    horizon: int
    actions: np.ndarray
    instant_regret: np.ndarray
    cumulative_regret: np.ndarray

    def __post_init__(self):
        T = self.horizon
        actions = np.array(self.actions, dtype=np.int64, copy=True)
        actions.setflags(write=False)
        inst = _readonly(self.instant_regret)
        cum = _readonly(self.cumulative_regret)
        if actions.shape != (T,) or inst.shape != (T,) or cum.shape != (T,):
            raise ValueError("trace arrays must all have length equal to the horizon")
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "instant_regret", inst)
        object.__setattr__(self, "cumulative_regret", cum)

    @property
    def final_regret(self) -> float:
        return float(self.cumulative_regret[-1]) if self.horizon else 0.0


def regret_of_run(spec: UpliftingBanditSpec, actions) -> RegretTrace:
    """Expected (gap-sum) regret of an action sequence.

    This is expected regret per the model definition, not realized-reward
    regret: round t contributes the suboptimality gap of the action taken.
    """
    actions = np.asarray(actions, dtype=np.int64)
    if actions.ndim != 1:
        raise ValueError("actions must be a 1-D sequence")
    if actions.size and (actions.min() < 1 or actions.max() > spec.num_actions):
        bad = actions[(actions < 1) | (actions > spec.num_actions)][0]
        raise IndexError(f"action index {bad} out of range 1..{spec.num_actions}")
    gaps, _ = suboptimality_gaps(spec)
    inst = gaps[actions - 1] if actions.size else np.zeros(0)
    return RegretTrace(
        horizon=int(actions.size),
        actions=actions,
        instant_regret=inst,
        cumulative_regret=np.cumsum(inst),
    )


@dataclass(frozen=True)
class SpecViolation:
    """One invariant breach, with 1-based (action, variable) coordinates when
    they apply."""

    kind: str
    action: int | None
    variable: int | None
    message: str


def validate_spec(spec: UpliftingBanditSpec) -> list[SpecViolation]:
    """Check every instance invariant; an empty list means the spec is valid.

    Checks, per action/variable where relevant:
      - unaffected variables have action means exactly equal to the baseline;
      - Bernoulli means lie in [0, 1];
      - Gaussian covariance is symmetric with diagonal entries <= 1.
    """
    violations: list[SpecViolation] = []
    K, m = spec.num_actions, spec.num_variables
    mask = spec.affected_mask
    equal = spec.action_means == spec.baseline_means[None, :]
    bad = ~equal & ~mask
    for a, v in zip(*np.nonzero(bad)):
        violations.append(
            SpecViolation(
                kind="unaffected_mean_mismatch",
                action=int(a) + 1,
                variable=int(v) + 1,
                message=(
                    f"action {a + 1} does not affect variable {v + 1} but its mean "
                    f"{spec.action_means[a, v]!r} differs from the baseline "
                    f"{spec.baseline_means[v]!r}"
                ),
            )
        )
    noise = spec.noise_model
    if isinstance(noise, BernoulliIndependent):
        for v in np.nonzero((spec.baseline_means < 0) | (spec.baseline_means > 1))[0]:
            violations.append(
                SpecViolation(
                    kind="bernoulli_mean_out_of_range",
                    action=None,
                    variable=int(v) + 1,
                    message=f"baseline mean {spec.baseline_means[v]!r} outside [0, 1]",
                )
            )
        for a, v in zip(*np.nonzero((spec.action_means < 0) | (spec.action_means > 1))):
            violations.append(
                SpecViolation(
                    kind="bernoulli_mean_out_of_range",
                    action=int(a) + 1,
                    variable=int(v) + 1,
                    message=f"mean {spec.action_means[a, v]!r} outside [0, 1]",
                )
            )
    elif isinstance(noise, GaussianCorrelated):
        cov = noise.covariance
        if cov.shape != (m, m):
            violations.append(
                SpecViolation(
                    kind="covariance_shape",
                    action=None,
                    variable=None,
                    message=f"covariance has shape {cov.shape}, expected ({m}, {m})",
                )
            )
        else:
            if not np.allclose(cov, cov.T, atol=1e-12):
                violations.append(
                    SpecViolation(
                        kind="covariance_not_symmetric",
                        action=None,
                        variable=None,
                        message="covariance is not symmetric",
                    )
                )
            for v in np.nonzero(np.diag(cov) > 1.0 + 1e-12)[0]:
                violations.append(
                    SpecViolation(
                        kind="noise_variance_above_one",
                        action=None,
                        variable=int(v) + 1,
                        message=f"covariance diagonal {cov[v, v]!r} exceeds 1",
                    )
                )
    return violations


def spec_to_dict(spec: UpliftingBanditSpec) -> dict:
    """Plain-JSON representation mirroring the spec fields."""
    if isinstance(spec.noise_model, GaussianCorrelated):
        noise = {
            "kind": "gaussian_correlated",
            "covariance": spec.noise_model.covariance.tolist(),
        }
    else:
        noise = {"kind": "bernoulli_independent"}
    return {
        "num_actions": spec.num_actions,
        "num_variables": spec.num_variables,
        "baseline_means": spec.baseline_means.tolist(),
        "action_means": spec.action_means.tolist(),
        "affected_sets": [sorted(s) for s in spec.affected_sets],
        "noise_model": noise,
    }


def spec_from_dict(doc: dict) -> UpliftingBanditSpec:
    kind = doc["noise_model"]["kind"]
    if kind == "gaussian_correlated":
        noise: NoiseModel = GaussianCorrelated(np.asarray(doc["noise_model"]["covariance"], dtype=float))
    elif kind == "bernoulli_independent":
        noise = BernoulliIndependent()
    else:
        raise ValueError(f"unknown noise model kind {kind!r}")
    return UpliftingBanditSpec(
        num_actions=int(doc["num_actions"]),
        num_variables=int(doc["num_variables"]),
        baseline_means=np.asarray(doc["baseline_means"], dtype=float),
        action_means=np.asarray(doc["action_means"], dtype=float),
        affected_sets=tuple(frozenset(int(v) for v in s) for s in doc["affected_sets"]),
        noise_model=noise,
    )


def save_spec(spec: UpliftingBanditSpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(spec_to_dict(spec), fh)
        fh.write("\n")


def load_spec(path) -> UpliftingBanditSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))
