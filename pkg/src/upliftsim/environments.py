"""Seedable payoff samplers and constructors for every instance family.

Two instances built from the same (spec, seed) produce bitwise-identical
payoff streams for any action sequence: the raw draws consumed per round do
not depend on the chosen action, only the applied means do.  This also means
policies evaluated on the same seed see the same underlying noise.
"""

from __future__ import annotations

import importlib.resources
import json

import numpy as np

from .core import (
    BASELINE,
    BernoulliIndependent,
    GaussianCorrelated,
    UpliftingBanditSpec,
    _check_action,
)
from .rng import substream

BLOCK_SHARED = "BLOCK_SHARED"
FULLY_SHARED = "FULLY_SHARED"


def psd_factor(cov: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Symmetric square root of a PSD matrix; raises if it is not PSD.

    eigh-based rather than Cholesky so rank-deficient covariances (shared
    noise, Dirac baselines) factor cleanly.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if not np.allclose(cov, cov.T, atol=1e-10):
        raise ValueError("covariance must be symmetric")
    w, u = np.linalg.eigh(cov)
    floor = -tol * max(1.0, float(np.abs(w).max(initial=1.0)))
    if w.min(initial=0.0) < floor:
        raise ValueError(f"covariance is not positive semidefinite (min eigenvalue {w.min()})")
    w = np.clip(w, 0.0, None)
    return (u * np.sqrt(w)) @ u.T


def _uniform_mix(factor: np.ndarray):
    """Detect a factor of the form a*I + b*J (equicorrelated square root).

    Returns (a, b) when the closed form applies, else None; applying it is
    O(m) per draw instead of a dense matrix-vector product.
    """
    m = factor.shape[0]
    if m < 2:
        return None
    b = float(factor[0, 1])
    a = float(factor[0, 0]) - b
    if np.allclose(factor, a * np.eye(m) + b, rtol=0.0, atol=1e-12):
        return a, b
    return None


class EnvironmentInstance:
    """Live sampler for one instance.

    Holds mutable generator state, so a single instance is single-threaded;
    parallel runs each build their own from disjoint seeds.  An optional
    per-action covariance table overrides the spec covariance (the spec type
    can only express one shared covariance; the block-shared hard instances
    need an action-dependent one).  ``noise_scale=0`` is the exact zero-noise
    diagnostic mode: payoffs equal their means while the raw stream is still
    consumed, so trajectories stay comparable across noise scales.
    """

    def __init__(self, spec: UpliftingBanditSpec, rng_seed: int, noise_scale: float = 1.0,
                 action_covariances=None):
        self.spec = spec
        self.rng_seed = int(rng_seed)
        self.noise_scale = float(noise_scale)
        self._gen = substream(self.rng_seed, "payoffs")
        self._gaussian = isinstance(spec.noise_model, GaussianCorrelated)
        self._action_factors = None
        if self._gaussian:
            self._base_factor = psd_factor(spec.noise_model.covariance)
            self._base_mix = _uniform_mix(self._base_factor)
            if action_covariances is not None:
                if len(action_covariances) != spec.num_actions:
                    raise ValueError("need one covariance per action")
                self._action_factors = [psd_factor(c) for c in action_covariances]
        elif action_covariances is not None:
            raise ValueError("per-action covariances only apply to Gaussian noise")

    @property
    def has_shared_noise(self) -> bool:
        """True when the noise draw is identical for every action."""
        return self._action_factors is None

    def _factor(self, a) -> np.ndarray:
        if a is BASELINE or self._action_factors is None:
            return self._base_factor
        return self._action_factors[a - 1]

    def sample_payoffs(self, a) -> np.ndarray:
        """Draw one payoff vector under action ``a`` (or BASELINE) and advance
        the sampler."""
        if a is not BASELINE:
            _check_action(self.spec, a)
        mean = self.spec.mean_vector(a)
        m = self.spec.num_variables
        if self._gaussian:
            z = self._gen.standard_normal(m)
            if self._action_factors is None and self._base_mix is not None:
                am, bm = self._base_mix
                noise = am * z + bm * z.sum()
            else:
                noise = self._factor(a) @ z
            return mean + self.noise_scale * noise
        u = self._gen.random(m)
        raw = (u < mean).astype(float)
        return mean + self.noise_scale * (raw - mean)

    def sample_noise_block(self, n: int) -> np.ndarray:
        """Draw the raw noise for the next ``n`` rounds in one batch.

        Only valid for shared-noise Gaussian instances, where payoffs are
        ``mean(a_t) + block[t]``.  Consumes the stream exactly as ``n`` calls
        of :meth:`sample_payoffs` would and applies the identical transform,
        so the two access paths produce bitwise-equal payoff streams.
        """
        if not (self._gaussian and self.has_shared_noise):
            raise ValueError("batched noise requires a shared Gaussian noise model")
        z = self._gen.standard_normal((n, self.spec.num_variables))
        if self._base_mix is not None:
            am, bm = self._base_mix
            return self.noise_scale * (am * z + bm * z.sum(axis=1)[:, None])
        return self.noise_scale * (z @ self._base_factor.T)

    def sample_uniform_block(self, n: int) -> np.ndarray:
        """Raw uniforms for ``n`` Bernoulli rounds (thresholded per action)."""
        if self._gaussian:
            raise ValueError("uniform blocks apply to Bernoulli noise only")
        return self._gen.random((n, self.spec.num_variables))


def make_environment(spec: UpliftingBanditSpec, rng_seed: int, noise_scale: float = 1.0,
                     action_covariances=None) -> EnvironmentInstance:
    return EnvironmentInstance(spec, rng_seed, noise_scale, action_covariances)


def make_gaussian_preset() -> UpliftingBanditSpec:
    """The 10-action, 100-variable Gaussian instance used throughout.

    Disjoint affected blocks of 10 variables per action, baseline payoff 0.5
    everywhere.  Action 1 lifts each of its variables by 0.05 (total uplift
    0.5); the others lift by 0.03 (total 0.3), so the minimum nonzero gap is
    exactly 0.2 and every payoff mean stays in [0, 1].  The noise is
    equicorrelated with the correlation chosen so the total-noise variance
    1'S1 is exactly 80 while every per-variable variance is 1.

    The construction is fully deterministic: no generator is involved, so
    acceptance checks reproduce bit-for-bit.
    """
    K, m, block = 10, 100, 10
    baseline = np.full(m, 0.5)
    action_means = np.tile(baseline, (K, 1))
    affected = []
    for a in range(K):
        lo, hi = a * block, (a + 1) * block
        action_means[a, lo:hi] += 0.05 if a == 0 else 0.03
        affected.append(frozenset(range(lo + 1, hi + 1)))
    rho = (80.0 / m - 1.0) / (m - 1.0)
    cov = np.full((m, m), rho)
    np.fill_diagonal(cov, 1.0)
    return UpliftingBanditSpec(
        num_actions=K,
        num_variables=m,
        baseline_means=baseline,
        action_means=action_means,
        affected_sets=tuple(affected),
        noise_model=GaussianCorrelated(cov),
    )


def load_cluster_table() -> dict:
    """The checked-in per-cluster visit rates and sizes."""
    text = importlib.resources.files("upliftsim.data").joinpath("criteo_clusters.json").read_text("utf-8")
    return json.loads(text)


def make_bernoulli_cluster_preset() -> UpliftingBanditSpec:
    """The 20-action Bernoulli instance built from published cluster rates.

    Variables are 100000 individuals laid out as contiguous blocks, one block
    per cluster.  The baseline mean of every individual is the untreated rate
    of its cluster; action a switches cluster a (and only it) to the treated
    rate.  The published 3-decimal rates are used verbatim as ground truth.
    """
    table = load_cluster_table()
    sizes = np.asarray(table["cluster_sizes"], dtype=np.int64)
    treated = np.asarray(table["treated_rates"], dtype=float)
    untreated = np.asarray(table["untreated_rates"], dtype=float)
    K = len(sizes)
    m = int(sizes.sum())
    baseline = np.repeat(untreated, sizes)
    action_means = np.tile(baseline, (K, 1))
    affected = []
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    for a in range(K):
        lo, hi = int(offsets[a]), int(offsets[a + 1])
        action_means[a, lo:hi] = treated[a]
        affected.append(frozenset(range(lo + 1, hi + 1)))
    return UpliftingBanditSpec(
        num_actions=K,
        num_variables=m,
        baseline_means=baseline,
        action_means=action_means,
        affected_sets=tuple(affected),
        noise_model=BernoulliIndependent(),
    )


def _lower_bound_means(K, m, gaps, affected_counts):
    gaps = np.asarray(gaps, dtype=float)
    counts = np.asarray(affected_counts, dtype=np.int64)
    if gaps.shape != (K,) or counts.shape != (K,):
        raise ValueError("gaps and affected_counts must both have length K")
    if gaps[0] != 0.0:
        raise ValueError("the first action must be optimal (gaps[1] = 0)")
    if (gaps < 0).any():
        raise ValueError("gaps must be nonnegative")
    if (counts < 1).any() or (counts > m).any():
        raise ValueError("affected counts must lie in 1..m")
    r_star = 1.0 + float(gaps.max())
    action_means = np.zeros((K, m))
    affected = []
    for a in range(K):
        L = int(counts[a])
        action_means[a, :L] = (r_star - gaps[a]) / L
        affected.append(frozenset(range(1, L + 1)))
    return action_means, tuple(affected), counts


def make_lower_bound_instance(K: int, m: int, gaps, affected_counts,
                              variant: str) -> UpliftingBanditSpec:
    """Hard instance family: zero baseline, first-L_a uniform means.

    Action a affects variables 1..L_a with mean (r* - gap_a)/L_a each, where
    r* = 1 + max gap, so action 1 is optimal with reward r* and the gap
    vector is recovered exactly.  FULLY_SHARED puts one unit-variance noise
    on all variables (all-ones covariance shared with the baseline).
    BLOCK_SHARED puts one unit noise on each action's affected block only;
    that covariance is action-dependent, so the spec records the (noiseless)
    baseline covariance and the environment carries the per-action table
    (see :func:`make_lower_bound_environment`).
    """
    action_means, affected, _ = _lower_bound_means(K, m, gaps, affected_counts)
    if variant == FULLY_SHARED:
        cov = np.ones((m, m))
    elif variant == BLOCK_SHARED:
        cov = np.zeros((m, m))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return UpliftingBanditSpec(
        num_actions=K,
        num_variables=m,
        baseline_means=np.zeros(m),
        action_means=action_means,
        affected_sets=affected,
        noise_model=GaussianCorrelated(cov),
    )


def lower_bound_action_covariances(K: int, m: int, affected_counts) -> list[np.ndarray]:
    """Per-action covariances of the BLOCK_SHARED variant."""
    counts = np.asarray(affected_counts, dtype=np.int64)
    covs = []
    for a in range(K):
        L = int(counts[a])
        cov = np.zeros((m, m))
        cov[:L, :L] = 1.0
        covs.append(cov)
    return covs


def make_lower_bound_environment(K: int, m: int, gaps, affected_counts, variant: str,
                                 rng_seed: int, noise_scale: float = 1.0) -> EnvironmentInstance:
    spec = make_lower_bound_instance(K, m, gaps, affected_counts, variant)
    covs = lower_bound_action_covariances(K, m, affected_counts) if variant == BLOCK_SHARED else None
    return EnvironmentInstance(spec, rng_seed, noise_scale, action_covariances=covs)
