"""Round-by-round structural checks wired around the reference policies.

These verify, on live runs, the relations the analysis leans on: the
baseline counter dominating every action's counter off its affected set, the
equivalence of the difference-of-UCBs index with a combined per-variable UCB
score, the equivalence of the known-baseline index with a UCB on transformed
rewards, the padding-set cardinality discipline, and the one-way phase
switch of the elimination policy.  They run on the reference path only and
are meant for moderate horizons.
"""

from __future__ import annotations

import numpy as np

from . import policies as P
from .estimators import radius_vector


class InvariantViolation(AssertionError):
    pass


class InvariantChecker:
    """Attach to one policy run; call :meth:`after_observe` every round."""

    def __init__(self, spec, policy, atol: float = 1e-9):
        self.spec = spec
        self.policy = policy
        self.atol = atol
        self.mask = spec.affected_mask
        self.lsizes = spec.affected_counts
        self.transformed_sums = np.zeros(spec.num_actions)
        rewards = spec.action_means.sum(axis=1)
        self._best_action = int(np.argmax(rewards))
        self._best_uplift = rewards.max() - float(spec.baseline_means.sum())
        self._last_phase = None
        self._frozen_identified = None
        self.rounds_checked = 0

    def _fail(self, name, detail):
        raise InvariantViolation(f"{name} violated at round {self.policy.est.round}: {detail}")

    def after_observe(self, a: int, payoffs: np.ndarray) -> None:
        policy = self.policy
        est = policy.est
        t = est.round
        K = self.spec.num_actions

        if est.tracks_baseline:
            outside_min = np.min(
                np.where(~self.mask, est.baseline_counts[None, :], np.iinfo(np.int64).max),
                axis=1,
            )
            has_outside = ~self.mask.all(axis=1)
            bad = has_outside & (outside_min < est.pull_counts)
            if bad.any():
                b = int(np.argmax(bad)) + 1
                self._fail("baseline-count domination",
                           f"action {b}: min outside-count {outside_min[b - 1]} < pulls "
                           f"{est.pull_counts[b - 1]}")

        if isinstance(policy, P.UpUcbBlPolicy):
            affected = self.mask[a - 1]
            self.transformed_sums[a - 1] += float(
                (payoffs[affected] - self.spec.baseline_means[affected]).sum())
            if t > K:
                G = policy.indices()
                n = est.pull_counts
                alt = self.transformed_sums / np.maximum(n, 1) \
                    + self.lsizes * radius_vector(n, policy.lam)
                scale = 1.0 + np.abs(alt).max()
                if np.abs(G - alt).max() > self.atol * scale:
                    self._fail("transformed-reward UCB equivalence",
                               f"max deviation {np.abs(G - alt).max()}")
                if int(np.argmax(G)) != int(np.argmax(alt)):
                    self._fail("transformed-reward UCB equivalence",
                               "argmax differs between the two index routes")

        if isinstance(policy, P.UpUcbWbPolicy) and policy.baseline_bound == "ucb" and t > K:
            G = policy.indices()
            u0 = policy.baseline_indices()
            n = est.pull_counts
            means = est.payoff_sums / np.maximum(n, 1)[:, None]
            own = means + radius_vector(n, policy.lam)[:, None]
            total0 = float(u0.sum())
            for b in range(K):
                lhs = G[b] + total0
                rhs = float(own[b][self.mask[b]].sum()) + float(u0[~self.mask[b]].sum())
                if abs(lhs - rhs) > self.atol * (1.0 + abs(rhs)):
                    self._fail("combined-UCB identity", f"action {b + 1}: {lhs} vs {rhs}")

        if isinstance(policy, (P.UpUcbLBlPolicy, P.UpUcbLWbPolicy)) and t > K:
            two_sided = isinstance(policy, P.UpUcbLWbPolicy)
            budget_base = 2 * policy.L_bound if two_sided else policy.L_bound
            for b in range(1, K + 1):
                details = policy.index_details(b)
                I, Pset = details[1], details[2]
                if I & Pset:
                    self._fail("padding disjointness", f"action {b}: overlap {sorted(I & Pset)}")
                budget = max(0, budget_base - len(I))
                if two_sided:
                    if len(Pset) > budget:
                        self._fail("padding cardinality",
                                   f"action {b}: |P|={len(Pset)} > budget {budget}")
                elif len(Pset) != min(budget, self.spec.num_variables - len(I)):
                    self._fail("padding cardinality",
                               f"action {b}: |P|={len(Pset)} != budget {budget}")
            if not two_sided and policy.L_bound >= int(self.lsizes.max()):
                # optimism: on the clean event (every interval covers its
                # mean) the best action's index dominates its true uplift
                n = est.pull_counts
                means = est.payoff_sums / np.maximum(n, 1)[:, None]
                radii = radius_vector(n, policy.lam)[:, None]
                clean = bool((np.abs(means - self.spec.action_means) <= radii).all())
                if clean:
                    g_best = float(policy.indices()[self._best_action])
                    if g_best < self._best_uplift - self.atol:
                        self._fail("size-bounded index optimism",
                                   f"best-action index {g_best} < uplift {self._best_uplift}")

        if isinstance(policy, P.UpUcbILiftWbPolicy):
            phase = policy.phase
            if self._last_phase == P.UpUcbILiftWbPolicy.UPUCB and phase != P.UpUcbILiftWbPolicy.UPUCB:
                self._fail("phase monotonicity", "policy returned to elimination")
            if phase == P.UpUcbILiftWbPolicy.UPUCB:
                if self._frozen_identified is None:
                    self._frozen_identified = policy.identified.copy()
                elif not np.array_equal(self._frozen_identified, policy.identified):
                    self._fail("identified-set freeze", "sets changed after the transition")
            self._last_phase = phase
        self.rounds_checked += 1


def run_policy_checked(spec, env, policy, T: int, atol: float = 1e-9):
    """Reference run with every-round invariant checking.

    Returns ``(actions, checker)``; raises :class:`InvariantViolation` on the
    first breach.
    """
    checker = InvariantChecker(spec, policy, atol=atol)
    actions = np.empty(T, dtype=np.int64)
    for t in range(1, T + 1):
        a = policy.select_action(t)
        x = env.sample_payoffs(a)
        policy.observe(a, x)
        checker.after_observe(a, x)
        actions[t - 1] = a
    return actions, checker


def coverage_run(spec, env, lam: float, T: int):
    """Run the known-affected difference-of-UCBs policy and report whether
    any per-(action, affected variable) or baseline confidence interval ever
    failed to cover its true mean."""
    policy = P.make_policy(
        P.UPUCB_WB,
        num_actions=spec.num_actions,
        num_variables=spec.num_variables,
        lam=lam,
        affected_sets=spec.affected_sets,
    )
    mask = spec.affected_mask
    action_violation = False
    baseline_violation = False
    sqrt2lam = np.sqrt(2.0 * lam)
    for t in range(1, T + 1):
        a = policy.select_action(t)
        x = env.sample_payoffs(a)
        policy.observe(a, x)
        est = policy.est
        i = a - 1
        if not action_violation:
            affected = mask[i]
            n = est.pull_counts[i]
            mean = est.payoff_sums[i, affected] / n
            dev = np.abs(mean - spec.action_means[i, affected])
            if (dev >= sqrt2lam / np.sqrt(n)).any():
                action_violation = True
        if not baseline_violation:
            changed = ~mask[i]
            n0 = est.baseline_counts[changed]
            mean0 = est.baseline_sums[changed] / np.maximum(n0, 1)
            dev0 = np.abs(mean0 - spec.baseline_means[changed])
            live = n0 > 0
            if (dev0[live] >= sqrt2lam / np.sqrt(n0[live])).any():
                baseline_violation = True
        if action_violation and baseline_violation:
            break
    return action_violation, baseline_violation
