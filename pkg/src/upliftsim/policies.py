"""The eight non-contextual decision policies as uniform state machines.

Every policy exposes ``select_action(t)`` / ``observe(a, payoffs)`` and keeps
an :class:`~upliftsim.estimators.EstimatorState`.  All of them take each
action once in rounds 1..K, then follow their index rule with ties broken
toward the lowest action index so traces are reproducible.

The module also houses the theory-mode error-probability table (the
delta-tilde each theorem assigns to its confidence radii) and the theorem
pull-count/regret bounds the verification harness replays.
"""

from __future__ import annotations

import math

import numpy as np

from .core import clip
from .estimators import EstimatorState, observe, radius, radius_vector

UCB_BASELINE = "UCB_BASELINE"
THOMPSON_GAUSSIAN = "THOMPSON_GAUSSIAN"
UPUCB_BL = "UPUCB_BL"
UPUCB_WB = "UPUCB_WB"
UPUCB_L_BL = "UPUCB_L_BL"
UPUCB_L_WB = "UPUCB_L_WB"
UPUCB_ILIFT_BL = "UPUCB_ILIFT_BL"
UPUCB_ILIFT_WB = "UPUCB_ILIFT_WB"

ALL_TAGS = (
    UCB_BASELINE,
    THOMPSON_GAUSSIAN,
    UPUCB_BL,
    UPUCB_WB,
    UPUCB_L_BL,
    UPUCB_L_WB,
    UPUCB_ILIFT_BL,
    UPUCB_ILIFT_WB,
)

# Knowledge each tag requires from the instance (validated by the harness).
REQUIREMENTS = {
    UCB_BASELINE: (),
    THOMPSON_GAUSSIAN: (),
    UPUCB_BL: ("baseline_means", "affected_sets"),
    UPUCB_WB: ("affected_sets",),
    UPUCB_L_BL: ("baseline_means", "L_bound"),
    UPUCB_L_WB: ("L_bound",),
    UPUCB_ILIFT_BL: ("baseline_means", "epsilon"),
    UPUCB_ILIFT_WB: ("epsilon",),
}


def theory_delta_tilde(tag: str, K: int, m: int, T: int, delta: float, L: int | None = None) -> float:
    """Per-radius error probability each guarantee assigns in theory mode."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if tag in (UPUCB_BL, UCB_BASELINE, THOMPSON_GAUSSIAN):
        return delta / (2 * K * T)
    if tag == UPUCB_WB:
        if L is None:
            raise ValueError("UPUCB_WB needs the uniform affected-set bound L")
        return delta / (4 * K * L * T)
    if tag in (UPUCB_L_BL, UPUCB_L_WB, UPUCB_ILIFT_BL, UPUCB_ILIFT_WB):
        return delta / (2 * K * m * T)
    raise ValueError(f"unknown policy tag {tag!r}")


def theory_lambda(tag: str, K: int, m: int, T: int, delta: float, L: int | None = None) -> float:
    """Exploration scale log(1/delta_tilde) used by the theorem statements."""
    return math.log(1.0 / theory_delta_tilde(tag, K, m, T, delta, L))


def identification_threshold(epsilon: float, lam: float, factor: float = 8.0) -> int:
    """Pulls needed before the identified set is trusted: ceil(factor*lam/eps^2)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return int(math.ceil(factor * lam / epsilon**2))


# ---------------------------------------------------------------------------
# Reference per-action index computations.  These follow the written
# definitions literally; the policy classes below use vectorized equivalents
# and the test suite pins the two against each other.
# ---------------------------------------------------------------------------

def upucb_bl_index(state: EstimatorState, a: int, lam: float, baseline_means, affected_sets) -> float:
    """Known baseline, known affected sets: sum of per-variable UCBs minus
    baseline means over the affected set."""
    n = int(state.pull_counts[a - 1])
    c = radius(n, lam)
    g = 0.0
    for v in sorted(affected_sets[a - 1]):
        mean = state.payoff_sums[a - 1, v - 1] / max(1, n)
        g += mean + c - baseline_means[v - 1]
    return g


def upucb_wb_index(state: EstimatorState, a: int, lam: float, affected_sets,
                   baseline_bound: str = "ucb") -> float:
    """Unknown baseline: difference of the action UCB and the baseline UCB,
    summed over the affected set.

    ``baseline_bound="lcb"`` is the ablation variant that subtracts the
    baseline lower confidence bound instead.
    """
    sign = {"ucb": 1.0, "lcb": -1.0}[baseline_bound]
    n = int(state.pull_counts[a - 1])
    c = radius(n, lam)
    g = 0.0
    for v in sorted(affected_sets[a - 1]):
        own = state.payoff_sums[a - 1, v - 1] / max(1, n) + c
        if all(v in s for s in affected_sets):
            base = 0.0
        else:
            n0 = int(state.baseline_counts[v - 1])
            base = state.baseline_sums[v - 1] / max(1, n0) + sign * radius(n0, lam)
        g += own - base
    return g


def upucb_l_bl_index(state: EstimatorState, a: int, lam: float, baseline_means, L_bound: int):
    """Known baseline, affected sets unknown up to a size bound.

    Returns ``(G, I, P)``: the identified variables (confidence interval
    excludes the baseline mean), the exact-size padding set of largest
    individual uplift indices, and their summed index.
    """
    n = int(state.pull_counts[a - 1])
    c = radius(n, lam)
    means = state.payoff_sums[a - 1] / max(1, n)
    uplift_idx = means + c - np.asarray(baseline_means)
    identified = (np.asarray(baseline_means) < means - c) | (np.asarray(baseline_means) > means + c)
    I = {v + 1 for v in np.flatnonzero(identified)}
    budget = max(0, L_bound - len(I))
    rest = np.flatnonzero(~identified)
    order = rest[np.argsort(-uplift_idx[rest], kind="stable")]
    P = {int(v) + 1 for v in order[:budget]}
    G = float(uplift_idx[identified].sum()) + float(uplift_idx[order[:budget]].sum())
    return G, I, P


def upucb_l_wb_index(state: EstimatorState, a: int, lam: float, L_bound: int, pivot: int | None = None):
    """Unknown baseline and affected sets: the most-pulled action acts as the
    round's baseline.

    Identification requires the two closed confidence intervals to be
    disjoint (touching endpoints do not identify).  Padding may stay below
    its budget: only strictly positive indices are ever added, since the
    cardinality constraint is an upper bound.

    Returns ``(G, I, P, pivot)``.
    """
    if pivot is None:
        pivot = int(np.argmax(state.pull_counts)) + 1
    n_a = int(state.pull_counts[a - 1])
    n_b = int(state.pull_counts[pivot - 1])
    c_a, c_b = radius(n_a, lam), radius(n_b, lam)
    mean_a = state.payoff_sums[a - 1] / max(1, n_a)
    mean_b = state.payoff_sums[pivot - 1] / max(1, n_b)
    hi_a, lo_a = mean_a + c_a, mean_a - c_a
    hi_b, lo_b = mean_b + c_b, mean_b - c_b
    disjoint = (hi_a < lo_b) | (hi_b < lo_a)
    U = hi_a - hi_b
    I = {v + 1 for v in np.flatnonzero(disjoint)}
    budget = max(0, 2 * L_bound - len(I))
    rest = np.flatnonzero(~disjoint & (U > 0))
    order = rest[np.argsort(-U[rest], kind="stable")]
    P = {int(v) + 1 for v in order[:budget]}
    G = float(U[disjoint].sum()) + float(U[order[:budget]].sum())
    return G, I, P, pivot


def ucb_baseline_index(state: EstimatorState, a: int, lam: float) -> float:
    """Classic reward UCB with the m-scaled width that makes the exploration
    scale comparable with the per-variable policies."""
    n = int(state.pull_counts[a - 1])
    mean_reward = float(state.payoff_sums[a - 1].sum()) / max(1, n)
    return mean_reward + state.num_variables * radius(n, lam)


# ---------------------------------------------------------------------------
# Policy state machines.
# ---------------------------------------------------------------------------

class BasePolicy:
    """Round-robin initialization, then argmax of the policy's index."""

    tag: str = "?"

    def __init__(self, num_actions: int, num_variables: int, lam: float,
                 track_baseline: bool = False):
        if lam is not None and lam <= 0:
            raise ValueError("lam must be positive")
        self.K = int(num_actions)
        self.m = int(num_variables)
        self.lam = lam
        self.est = EstimatorState(self.K, self.m, track_baseline=track_baseline)
        self._pending = None

    def _indices(self) -> np.ndarray:
        raise NotImplementedError

    def indices(self) -> np.ndarray:
        """Current per-action index vector (valid once every action was taken)."""
        return self._indices()

    def select_action(self, t: int) -> int:
        if t != self.est.round + 1:
            raise RuntimeError(f"select_action called out of order: t={t}, completed={self.est.round}")
        if t <= self.K:
            a = t
        else:
            a = int(np.argmax(self._indices())) + 1
        self._pending = a
        return a

    def observe(self, a: int, payoffs) -> None:
        if self._pending is not None and a != self._pending:
            raise RuntimeError(f"observed action {a} but {self._pending} was selected")
        self._pending = None
        self._update(a, payoffs)

    def _update(self, a: int, payoffs) -> None:
        observe(self.est, a, payoffs)


class UcbBaselinePolicy(BasePolicy):
    tag = UCB_BASELINE

    def _indices(self) -> np.ndarray:
        n = np.maximum(self.est.pull_counts, 1)
        mean_reward = self.est.payoff_sums.sum(axis=1) / n
        return mean_reward + self.m * radius_vector(self.est.pull_counts, self.lam)


class ThompsonGaussianPolicy(BasePolicy):
    """Gaussian posterior sampling on total rewards with known noise scale.

    The observation-noise variance is m^2 * sigma2 (the reward noise scales
    with the number of variables); the prior is supplied by the harness,
    conventionally the mean and variance of the instance's true rewards.
    """

    tag = THOMPSON_GAUSSIAN

    def __init__(self, num_actions, num_variables, sigma2, prior_mean, prior_var, rng):
        super().__init__(num_actions, num_variables, lam=1.0)
        if sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if prior_var < 0:
            raise ValueError("prior variance must be nonnegative")
        self.sigma2 = float(sigma2)
        self.noise_var = float(num_variables) ** 2 * float(sigma2)
        self.prior_mean = np.broadcast_to(np.asarray(prior_mean, dtype=float), (self.K,)).copy()
        self.prior_var = float(prior_var)
        self.rng = rng

    def posterior(self):
        """Conjugate posterior (mean, variance) per action."""
        n = self.est.pull_counts
        s = self.est.payoff_sums.sum(axis=1)
        if self.prior_var == 0.0:
            return self.prior_mean.copy(), np.zeros(self.K)
        precision = 1.0 / self.prior_var + n / self.noise_var
        var = 1.0 / precision
        mean = (self.prior_mean / self.prior_var + s / self.noise_var) * var
        return mean, var

    def _indices(self) -> np.ndarray:
        mean, var = self.posterior()
        return mean + np.sqrt(var) * self.rng.standard_normal(self.K)

    def select_action(self, t: int) -> int:
        # Draw (and discard) during initialization too, so the sampling
        # stream advances one K-block per round regardless of phase.
        if t != self.est.round + 1:
            raise RuntimeError(f"select_action called out of order: t={t}, completed={self.est.round}")
        if t <= self.K:
            self.rng.standard_normal(self.K)
            a = t
        else:
            a = int(np.argmax(self._indices())) + 1
        self._pending = a
        return a


class _MaskedPolicy(BasePolicy):
    """Shared plumbing for policies that know the affected sets."""

    def __init__(self, num_actions, num_variables, lam, affected_sets, track_baseline):
        super().__init__(num_actions, num_variables, lam, track_baseline=track_baseline)
        self.affected_sets = tuple(frozenset(s) for s in affected_sets)
        mask = np.zeros((self.K, self.m), dtype=bool)
        for a, s in enumerate(self.affected_sets):
            for v in s:
                mask[a, v - 1] = True
        self.mask = mask
        self.lsizes = mask.sum(axis=1)


class UpUcbBlPolicy(_MaskedPolicy):
    tag = UPUCB_BL

    def __init__(self, num_actions, num_variables, lam, baseline_means, affected_sets):
        super().__init__(num_actions, num_variables, lam, affected_sets, track_baseline=False)
        self.mu0 = np.asarray(baseline_means, dtype=float)

    def _indices(self) -> np.ndarray:
        n = self.est.pull_counts
        means = self.est.payoff_sums / np.maximum(n, 1)[:, None]
        base = np.where(self.mask, means - self.mu0[None, :], 0.0).sum(axis=1)
        c = radius_vector(n, self.lam)
        bonus = np.where(self.lsizes > 0, self.lsizes * c, 0.0)
        return base + bonus


class UpUcbWbPolicy(_MaskedPolicy):
    tag = UPUCB_WB

    def __init__(self, num_actions, num_variables, lam, affected_sets, baseline_bound="ucb"):
        super().__init__(num_actions, num_variables, lam, affected_sets, track_baseline=True)
        if baseline_bound not in ("ucb", "lcb"):
            raise ValueError("baseline_bound must be 'ucb' or 'lcb'")
        self.baseline_bound = baseline_bound
        self.in_all = self.mask.all(axis=0)

    def _update(self, a, payoffs):
        observe(self.est, a, payoffs, self.affected_sets)

    def baseline_indices(self) -> np.ndarray:
        """Per-variable baseline bound: 0 where every action affects the
        variable, else baseline mean plus/minus its radius."""
        sign = 1.0 if self.baseline_bound == "ucb" else -1.0
        n0 = self.est.baseline_counts
        mean0 = self.est.baseline_sums / np.maximum(n0, 1)
        return np.where(self.in_all, 0.0, mean0 + sign * radius_vector(n0, self.lam))

    def _indices(self) -> np.ndarray:
        n = self.est.pull_counts
        means = self.est.payoff_sums / np.maximum(n, 1)[:, None]
        own = means + radius_vector(n, self.lam)[:, None]
        u0 = self.baseline_indices()
        return np.where(self.mask, own - u0[None, :], 0.0).sum(axis=1)


class _IntervalPolicy(BasePolicy):
    """Shared interval arithmetic for the size-bounded policies."""

    def _bounds(self):
        n = self.est.pull_counts
        means = self.est.payoff_sums / np.maximum(n, 1)[:, None]
        c = radius_vector(n, self.lam)[:, None]
        return means - c, means + c


class UpUcbLBlPolicy(_IntervalPolicy):
    tag = UPUCB_L_BL

    def __init__(self, num_actions, num_variables, lam, baseline_means, L_bound):
        super().__init__(num_actions, num_variables, lam)
        if not 0 <= L_bound <= num_variables:
            raise ValueError("L_bound must lie in 0..m")
        self.mu0 = np.asarray(baseline_means, dtype=float)
        self.L_bound = int(L_bound)

    def _indices(self) -> np.ndarray:
        lo, hi = self._bounds()
        identified = (self.mu0[None, :] < lo) | (self.mu0[None, :] > hi)
        U = hi - self.mu0[None, :]
        G = np.empty(self.K)
        for a in range(self.K):
            ia = identified[a]
            g = float(U[a][ia].sum())
            budget = max(0, self.L_bound - int(ia.sum()))
            if budget:
                rest = np.flatnonzero(~ia)
                order = rest[np.argsort(-U[a][rest], kind="stable")]
                g += float(U[a][order[:budget]].sum())
            G[a] = g
        return G

    def index_details(self, a: int):
        return upucb_l_bl_index(self.est, a, self.lam, self.mu0, self.L_bound)


class UpUcbLWbPolicy(_IntervalPolicy):
    tag = UPUCB_L_WB

    def __init__(self, num_actions, num_variables, lam, L_bound):
        super().__init__(num_actions, num_variables, lam)
        if not 0 <= L_bound <= num_variables:
            raise ValueError("L_bound must lie in 0..m")
        self.L_bound = int(L_bound)

    def current_pivot(self) -> int:
        return int(np.argmax(self.est.pull_counts)) + 1

    def _indices(self) -> np.ndarray:
        lo, hi = self._bounds()
        p = self.current_pivot() - 1
        disjoint = (hi < lo[p][None, :]) | (hi[p][None, :] < lo)
        U = hi - hi[p][None, :]
        G = np.empty(self.K)
        for a in range(self.K):
            ia = disjoint[a]
            g = float(U[a][ia].sum())
            budget = max(0, 2 * self.L_bound - int(ia.sum()))
            if budget:
                rest = np.flatnonzero(~ia & (U[a] > 0))
                order = rest[np.argsort(-U[a][rest], kind="stable")]
                g += float(U[a][order[:budget]].sum())
            G[a] = g
        return G

    def index_details(self, a: int):
        return upucb_l_wb_index(self.est, a, self.lam, self.L_bound)


class UpUcbILiftBlPolicy(_IntervalPolicy):
    """Known baseline with a lower bound on every individual uplift.

    Starts from the full variable set per action and, once an action has been
    pulled the identification threshold many times, re-derives its identified
    set from the current means on every such round.
    """

    tag = UPUCB_ILIFT_BL

    def __init__(self, num_actions, num_variables, lam, baseline_means, epsilon):
        super().__init__(num_actions, num_variables, lam)
        self.mu0 = np.asarray(baseline_means, dtype=float)
        self.epsilon = float(epsilon)
        self.n0 = identification_threshold(self.epsilon, lam, factor=8.0)
        self.identified = np.ones((self.K, self.m), dtype=bool)

    def _indices(self) -> np.ndarray:
        _, hi = self._bounds()
        return np.where(self.identified, hi - self.mu0[None, :], 0.0).sum(axis=1)

    def _update(self, a, payoffs):
        observe(self.est, a, payoffs)
        i = a - 1
        if self.est.pull_counts[i] >= self.n0:
            means = self.est.payoff_sums[i] / self.est.pull_counts[i]
            self.identified[i] = np.abs(means - self.mu0) > self.epsilon / 2.0


class UpUcbILiftWbPolicy(BasePolicy):
    """Unknown baseline with a lower bound on pairwise effect gaps.

    Phase one runs successive elimination for the identification threshold
    many sweeps (or until the horizon runs out, in which case it keeps
    cycling the active actions in index order).  At the transition it freezes,
    per variable, the actions whose confidence interval meets another
    action's; those actions are the variable's baseline witnesses and the
    complement is the action's identified set.  Phase two scores the
    surviving actions like the known-affected policy, replacing the baseline
    bound with the most-pulled witness's bound.  The phase never moves back.
    """

    tag = UPUCB_ILIFT_WB

    ELIMINATE = "ELIMINATE"
    UPUCB = "UPUCB"

    def __init__(self, num_actions, num_variables, lam, epsilon, horizon):
        super().__init__(num_actions, num_variables, lam)
        self.epsilon = float(epsilon)
        self.horizon = int(horizon)
        self.n0 = identification_threshold(self.epsilon, lam, factor=32.0)
        self.phase = self.ELIMINATE
        self.active = list(range(1, self.K + 1))
        self.sweeps_done = 0
        self._queue: list[int] = []
        self._exhausted = False
        self._cycle_pos = 0
        self.reward_sums = np.zeros(self.K)
        self.baseline_witnesses = None  # (K, m) bool, frozen at the transition
        self.identified = None          # (K, m) bool, complement per action
        self.transition_round = None

    def _start_sweep(self, t: int) -> None:
        if self.sweeps_done >= self.n0:
            self._transition()
            return
        remaining = self.horizon - (t - 1)
        if remaining < len(self.active):
            self._exhausted = True
            return
        self._queue = list(self.active)

    def _transition(self) -> None:
        n = self.est.pull_counts
        means = self.est.payoff_sums / np.maximum(n, 1)[:, None]
        c = radius_vector(n, self.lam)[:, None]
        lo, hi = means - c, means + c
        witnesses = np.zeros((self.K, self.m), dtype=bool)
        for a in range(self.K):
            for b in range(a + 1, self.K):
                meet = (hi[a] >= lo[b]) & (hi[b] >= lo[a])
                witnesses[a] |= meet
                witnesses[b] |= meet
        self.baseline_witnesses = witnesses
        self.identified = ~witnesses
        self.phase = self.UPUCB
        self.transition_round = self.est.round

    def _indices(self) -> np.ndarray:
        n = self.est.pull_counts
        means = self.est.payoff_sums / np.maximum(n, 1)[:, None]
        hi = means + radius_vector(n, self.lam)[:, None]
        scores = np.where(self.baseline_witnesses, n[:, None], -1)
        bstar = np.argmax(scores, axis=0)
        has_witness = self.baseline_witnesses.any(axis=0)
        u0 = np.where(has_witness, hi[bstar, np.arange(self.m)], 0.0)
        G = np.where(self.identified, hi - u0[None, :], 0.0).sum(axis=1)
        out = np.full(self.K, -np.inf)
        idx = np.array(self.active) - 1
        out[idx] = G[idx]
        return out

    def select_action(self, t: int) -> int:
        if t != self.est.round + 1:
            raise RuntimeError(f"select_action called out of order: t={t}, completed={self.est.round}")
        if self.phase == self.ELIMINATE:
            if self._exhausted:
                a = self.active[self._cycle_pos % len(self.active)]
                self._cycle_pos += 1
                self._pending = a
                return a
            if not self._queue:
                self._start_sweep(t)
            if self.phase == self.ELIMINATE:
                if self._exhausted:
                    return self.select_action(t)
                a = self._queue.pop(0)
                self._pending = a
                return a
        a = int(np.argmax(self._indices())) + 1
        self._pending = a
        return a

    def _update(self, a, payoffs):
        observe(self.est, a, payoffs)
        self.reward_sums[a - 1] += float(np.sum(payoffs))
        if self.phase == self.ELIMINATE and not self._exhausted and not self._queue:
            self.sweeps_done += 1
            idx = np.array(self.active) - 1
            r_hat = self.reward_sums[idx] / self.est.pull_counts[idx]
            c_rho = self.m * math.sqrt(2.0 * self.lam / self.sweeps_done)
            keep = r_hat + 2.0 * c_rho >= r_hat.max()
            self.active = [int(i) + 1 for i in idx[keep]]


def make_policy(tag: str, *, num_actions: int, num_variables: int, lam: float | None = None,
                horizon: int | None = None, baseline_means=None, affected_sets=None,
                L_bound: int | None = None, epsilon: float | None = None,
                sigma2: float | None = None, prior_mean=None, prior_var: float | None = None,
                rng=None, baseline_bound: str = "ucb") -> BasePolicy:
    """Build a policy, checking its knowledge requirements are satisfied."""
    provided = {
        "baseline_means": baseline_means is not None,
        "affected_sets": affected_sets is not None,
        "L_bound": L_bound is not None,
        "epsilon": epsilon is not None,
    }
    if tag not in REQUIREMENTS:
        raise ValueError(f"unknown policy tag {tag!r}")
    missing = [k for k in REQUIREMENTS[tag] if not provided[k]]
    if missing:
        raise ValueError(f"{tag} requires knowledge of {', '.join(missing)}")
    if tag == UCB_BASELINE:
        return UcbBaselinePolicy(num_actions, num_variables, lam)
    if tag == THOMPSON_GAUSSIAN:
        if sigma2 is None or prior_mean is None or prior_var is None or rng is None:
            raise ValueError("THOMPSON_GAUSSIAN needs sigma2, prior_mean, prior_var, rng")
        return ThompsonGaussianPolicy(num_actions, num_variables, sigma2, prior_mean, prior_var, rng)
    if tag == UPUCB_BL:
        return UpUcbBlPolicy(num_actions, num_variables, lam, baseline_means, affected_sets)
    if tag == UPUCB_WB:
        return UpUcbWbPolicy(num_actions, num_variables, lam, affected_sets, baseline_bound)
    if tag == UPUCB_L_BL:
        return UpUcbLBlPolicy(num_actions, num_variables, lam, baseline_means, L_bound)
    if tag == UPUCB_L_WB:
        return UpUcbLWbPolicy(num_actions, num_variables, lam, L_bound)
    if tag == UPUCB_ILIFT_BL:
        return UpUcbILiftBlPolicy(num_actions, num_variables, lam, baseline_means, epsilon)
    if tag == UPUCB_ILIFT_WB:
        if horizon is None:
            raise ValueError("UPUCB_ILIFT_WB needs the horizon")
        return UpUcbILiftWbPolicy(num_actions, num_variables, lam, epsilon, horizon)
    raise AssertionError


# ---------------------------------------------------------------------------
# Theorem bounds replayed by the verification harness.
# ---------------------------------------------------------------------------

def pull_count_bound(tag: str, lam: float, gap: float, L_a: int, L_star: int,
                     m: int, L_bound: int | None = None, epsilon: float | None = None) -> float:
    """High-probability cap on a suboptimal action's pulls at the end of a run."""
    if gap <= 0:
        return math.inf
    if tag == UPUCB_BL:
        return 8.0 * L_a**2 * lam / gap**2 + 1.0
    if tag == UPUCB_WB:
        return 8.0 * (L_a + L_star) ** 2 * lam / gap**2 + 1.0
    if tag == UPUCB_L_BL:
        return 32.0 * L_bound**2 * lam / gap**2 + 1.0
    if tag == UPUCB_L_WB:
        return 512.0 * L_bound**2 * lam / gap**2 + 1.0
    if tag == UPUCB_ILIFT_BL:
        return 8.0 * clip(gap / epsilon, L_a, m) ** 2 * lam / gap**2 + 1.0
    if tag == UPUCB_ILIFT_WB:
        return 8.0 * clip(2.0 * gap / epsilon, L_a + L_star, 2.0 * m) ** 2 * lam / gap**2 + 1.0
    raise ValueError(f"no pull-count bound for {tag!r}")


def regret_bound(tag: str, lam: float, gaps, L_sizes, m: int,
                 L_bound: int | None = None, epsilon: float | None = None) -> float:
    """Displayed cumulative-regret bound: sum over suboptimal actions of the
    pull-count cap times the gap."""
    gaps = np.asarray(gaps, dtype=float)
    L_sizes = np.asarray(L_sizes, dtype=np.int64)
    L_star = int(L_sizes[int(np.argmin(gaps))])
    total = 0.0
    for a in range(len(gaps)):
        if gaps[a] > 0:
            cap = pull_count_bound(tag, lam, float(gaps[a]), int(L_sizes[a]), L_star,
                                   m, L_bound=L_bound, epsilon=epsilon)
            total += cap * float(gaps[a])
    return total
