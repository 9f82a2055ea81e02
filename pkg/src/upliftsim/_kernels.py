"""Compiled round loops for the tuned-protocol policies.

These kernels replay exactly the decision rules of the reference policy
classes in :mod:`upliftsim.policies` (round-robin initialization, argmax with
lowest-index ties, identical index formulas); the test suite pins the two
implementations against each other on shared noise.  They exist purely so
the replicated-run harness can sweep a hundred seeds over a hundred thousand
rounds within the verification time budgets.

Only shared-noise instances run here: the caller pre-draws the per-round
noise (action-independent) in blocks and each policy carries its own small
state arrays between blocks.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import policies as P
from .rng import substream


@njit(cache=True)
def _argmax_first(values):
    best = values[0]
    arg = 0
    for i in range(1, values.shape[0]):
        if values[i] > best:
            best = values[i]
            arg = i
    return arg


@njit(cache=True)
def _top_sum(buf, count, budget):
    """Sum of the ``budget`` largest entries of buf[:count] (ties immaterial).

    Partial selection sort in place: buf[:count] is scratch and gets
    reordered.  Budgets are small (at most twice the size bound), so this
    stays allocation-free and cheap.
    """
    if budget <= 0 or count <= 0:
        return 0.0
    if budget >= count:
        s = 0.0
        for i in range(count):
            s += buf[i]
        return s
    s = 0.0
    for i in range(budget):
        arg = i
        best = buf[i]
        for j in range(i + 1, count):
            if buf[j] > best:
                best = buf[j]
                arg = j
        buf[arg] = buf[i]
        buf[i] = best
        s += best
    return s


@njit(cache=True)
def _run_ucb(t0, n, K, m, lam, action_means_rewards, noise_rewards, N, RS, G, out):
    for i in range(n):
        t = t0 + i
        a = t - 1 if t <= K else _argmax_first(G)
        RS[a] += action_means_rewards[a] + noise_rewards[i]
        N[a] += 1
        G[a] = RS[a] / N[a] + m * math.sqrt(2.0 * lam / N[a])
        out[i] = a + 1


@njit(cache=True)
def _run_thompson(t0, n, K, action_means_rewards, noise_rewards, normals,
                  prior_mean, prior_var, noise_var, N, RS, out):
    for i in range(n):
        t = t0 + i
        if t <= K:
            a = t - 1
        else:
            best = -1.0e300
            a = 0
            for b in range(K):
                if prior_var == 0.0:
                    mean = prior_mean[b]
                    var = 0.0
                else:
                    prec = 1.0 / prior_var + N[b] / noise_var
                    var = 1.0 / prec
                    mean = (prior_mean[b] / prior_var + RS[b] / noise_var) * var
                sample = mean + math.sqrt(var) * normals[i, b]
                if sample > best:
                    best = sample
                    a = b
        RS[a] += action_means_rewards[a] + noise_rewards[i]
        N[a] += 1
        out[i] = a + 1


@njit(cache=True)
def _run_upucb_bl(t0, n, K, m, lam, vlist, lsizes, mu0, action_means, noise, N, S, G, out):
    for i in range(n):
        t = t0 + i
        a = t - 1 if t <= K else _argmax_first(G)
        N[a] += 1
        for v in range(m):
            S[a, v] += action_means[a, v] + noise[i, v]
        c = math.sqrt(2.0 * lam / N[a])
        g = lsizes[a] * c
        for j in range(lsizes[a]):
            v = vlist[a, j]
            g += S[a, v] / N[a] - mu0[v]
        G[a] = g
        out[i] = a + 1


@njit(cache=True)
def _run_upucb_wb(t0, n, K, m, lam, sign, vlist, lsizes, mask, in_all, action_means,
                  noise, N, S, N0, S0, U0, own, base, out):
    for i in range(n):
        t = t0 + i
        if t <= K:
            a = t - 1
        else:
            best = -1.0e300
            a = 0
            for b in range(K):
                g = own[b] - base[b]
                if g > best:
                    best = g
                    a = b
        N[a] += 1
        for v in range(m):
            x = action_means[a, v] + noise[i, v]
            S[a, v] += x
            if not mask[a, v]:
                N0[v] += 1
                S0[v] += x
        c = math.sqrt(2.0 * lam / N[a])
        o = lsizes[a] * c
        for j in range(lsizes[a]):
            o += S[a, vlist[a, j]] / N[a]
        own[a] = o
        for v in range(m):
            if not mask[a, v] and not in_all[v]:
                U0[v] = S0[v] / N0[v] + sign * math.sqrt(2.0 * lam / N0[v])
        for b in range(K):
            s = 0.0
            for j in range(lsizes[b]):
                s += U0[vlist[b, j]]
            base[b] = s
        out[i] = a + 1


@njit(cache=True)
def _refresh_l_bl(a, m, lam, L_bound, mu0, N, S, buf):
    c = math.sqrt(2.0 * lam / N[a])
    g = 0.0
    count = 0
    ident = 0
    for v in range(m):
        mean = S[a, v] / N[a]
        u = mean + c - mu0[v]
        if mu0[v] < mean - c or mu0[v] > mean + c:
            g += u
            ident += 1
        else:
            buf[count] = u
            count += 1
    budget = L_bound - ident
    if budget > 0:
        g += _top_sum(buf, count, budget)
    return g


@njit(cache=True)
def _run_upucb_l_bl(t0, n, K, m, lam, L_bound, mu0, action_means, noise, N, S, G, buf, out):
    for i in range(n):
        t = t0 + i
        a = t - 1 if t <= K else _argmax_first(G)
        N[a] += 1
        for v in range(m):
            S[a, v] += action_means[a, v] + noise[i, v]
        G[a] = _refresh_l_bl(a, m, lam, L_bound, mu0, N, S, buf)
        out[i] = a + 1


@njit(cache=True)
def _l_wb_row(b, m, L_bound, MEANS, CR, lop, hip, buf):
    cb = CR[b]
    g = 0.0
    count = 0
    ident = 0
    for v in range(m):
        mean = MEANS[b, v]
        hi = mean + cb
        lo = mean - cb
        u = hi - hip[v]
        if hi < lop[v] or hip[v] < lo:
            g += u
            ident += 1
        elif u > 0.0:
            buf[count] = u
            count += 1
    budget = 2 * L_bound - ident
    if budget > 0:
        g += _top_sum(buf, count, budget)
    return g


@njit(cache=True)
def _run_upucb_l_wb(t0, n, K, m, lam, L_bound, action_means, noise, N, S, MEANS, CR,
                    G, buf, lop, hip, pivot_state, out):
    # pivot_state = [pivot index, pivot count at the last refresh]; indices of
    # untouched actions stay valid while the pivot row is unchanged.
    for i in range(n):
        t = t0 + i
        a = t - 1 if t <= K else _argmax_first(G)
        N[a] += 1
        for v in range(m):
            S[a, v] += action_means[a, v] + noise[i, v]
            MEANS[a, v] = S[a, v] / N[a]
        CR[a] = math.sqrt(2.0 * lam / N[a])
        if t >= K:
            p = 0
            best_n = N[0]
            for b in range(1, K):
                if N[b] > best_n:
                    best_n = N[b]
                    p = b
            if p != pivot_state[0] or N[p] != pivot_state[1]:
                cp = CR[p]
                for v in range(m):
                    meanp = MEANS[p, v]
                    lop[v] = meanp - cp
                    hip[v] = meanp + cp
                for b in range(K):
                    G[b] = _l_wb_row(b, m, L_bound, MEANS, CR, lop, hip, buf)
                pivot_state[0] = p
                pivot_state[1] = N[p]
            else:
                G[a] = _l_wb_row(a, m, L_bound, MEANS, CR, lop, hip, buf)
        out[i] = a + 1


@njit(cache=True)
def _run_ilift_bl(t0, n, K, m, lam, eps, n0, mu0, action_means, noise, N, S, ident, G, out):
    for i in range(n):
        t = t0 + i
        a = t - 1 if t <= K else _argmax_first(G)
        N[a] += 1
        for v in range(m):
            S[a, v] += action_means[a, v] + noise[i, v]
        if N[a] >= n0:
            for v in range(m):
                mean = S[a, v] / N[a]
                ident[a, v] = abs(mean - mu0[v]) > eps / 2.0
        c = math.sqrt(2.0 * lam / N[a])
        g = 0.0
        for v in range(m):
            if ident[a, v]:
                g += S[a, v] / N[a] + c - mu0[v]
        G[a] = g
        out[i] = a + 1


class _FastBase:
    uses_normals = False

    def __init__(self, K, m, action_means):
        self.K = K
        self.m = m
        self.action_means = np.ascontiguousarray(action_means)
        self.reward_means = np.ascontiguousarray(action_means.sum(axis=1))


class FastUcbBaseline(_FastBase):
    def __init__(self, K, m, action_means, lam):
        super().__init__(K, m, action_means)
        self.lam = lam
        self.N = np.zeros(K, dtype=np.int64)
        self.RS = np.zeros(K)
        self.G = np.zeros(K)

    def run_chunk(self, t0, noise, out):
        _run_ucb(t0, noise.shape[0], self.K, self.m, self.lam, self.reward_means,
                 noise.sum(axis=1), self.N, self.RS, self.G, out)


class FastThompson(_FastBase):
    uses_normals = True

    def __init__(self, K, m, action_means, sigma2, prior_mean, prior_var, rng):
        super().__init__(K, m, action_means)
        self.noise_var = float(m) ** 2 * sigma2
        self.prior_mean = np.broadcast_to(np.asarray(prior_mean, dtype=float), (K,)).copy()
        self.prior_var = float(prior_var)
        self.rng = rng
        self.N = np.zeros(K, dtype=np.int64)
        self.RS = np.zeros(K)

    def run_chunk(self, t0, noise, out):
        normals = self.rng.standard_normal((noise.shape[0], self.K))
        _run_thompson(t0, noise.shape[0], self.K, self.reward_means, noise.sum(axis=1),
                      normals, self.prior_mean, self.prior_var, self.noise_var,
                      self.N, self.RS, out)


class _FastMasked(_FastBase):
    def __init__(self, K, m, action_means, affected_sets, lam):
        super().__init__(K, m, action_means)
        self.lam = lam
        self.lsizes = np.array([len(s) for s in affected_sets], dtype=np.int64)
        width = max(1, int(self.lsizes.max()))
        self.vlist = np.zeros((K, width), dtype=np.int64)
        for a, s in enumerate(affected_sets):
            for j, v in enumerate(sorted(s)):
                self.vlist[a, j] = v - 1
        self.N = np.zeros(K, dtype=np.int64)
        self.S = np.zeros((K, m))
        self.G = np.zeros(K)


class FastUpUcbBl(_FastMasked):
    def __init__(self, K, m, action_means, affected_sets, lam, baseline_means):
        super().__init__(K, m, action_means, affected_sets, lam)
        self.mu0 = np.ascontiguousarray(baseline_means)

    def run_chunk(self, t0, noise, out):
        _run_upucb_bl(t0, noise.shape[0], self.K, self.m, self.lam, self.vlist,
                      self.lsizes, self.mu0, self.action_means, noise, self.N, self.S,
                      self.G, out)


class FastUpUcbWb(_FastMasked):
    def __init__(self, K, m, action_means, affected_sets, lam, baseline_bound="ucb"):
        super().__init__(K, m, action_means, affected_sets, lam)
        self.sign = 1.0 if baseline_bound == "ucb" else -1.0
        mask = np.zeros((K, m), dtype=np.bool_)
        for a, s in enumerate(affected_sets):
            for v in s:
                mask[a, v - 1] = True
        self.mask = mask
        self.in_all = mask.all(axis=0)
        self.N0 = np.zeros(m, dtype=np.int64)
        self.S0 = np.zeros(m)
        self.U0 = np.zeros(m)
        self.own = np.zeros(K)
        self.base = np.zeros(K)

    def run_chunk(self, t0, noise, out):
        _run_upucb_wb(t0, noise.shape[0], self.K, self.m, self.lam, self.sign,
                      self.vlist, self.lsizes, self.mask, self.in_all, self.action_means,
                      noise, self.N, self.S, self.N0, self.S0, self.U0, self.own,
                      self.base, out)


class FastUpUcbLBl(_FastMasked):
    def __init__(self, K, m, action_means, affected_sets, lam, baseline_means, L_bound):
        super().__init__(K, m, action_means, affected_sets, lam)
        self.mu0 = np.ascontiguousarray(baseline_means)
        self.L_bound = int(L_bound)
        self.buf = np.zeros(m)

    def run_chunk(self, t0, noise, out):
        _run_upucb_l_bl(t0, noise.shape[0], self.K, self.m, self.lam, self.L_bound,
                        self.mu0, self.action_means, noise, self.N, self.S, self.G,
                        self.buf, out)


class FastUpUcbLWb(_FastMasked):
    def __init__(self, K, m, action_means, affected_sets, lam, L_bound):
        super().__init__(K, m, action_means, affected_sets, lam)
        self.L_bound = int(L_bound)
        self.MEANS = np.zeros((K, m))
        self.CR = np.zeros(K)
        self.buf = np.zeros(m)
        self.lop = np.zeros(m)
        self.hip = np.zeros(m)
        self.pivot_state = np.array([-1, -1], dtype=np.int64)

    def run_chunk(self, t0, noise, out):
        _run_upucb_l_wb(t0, noise.shape[0], self.K, self.m, self.lam, self.L_bound,
                        self.action_means, noise, self.N, self.S, self.MEANS, self.CR,
                        self.G, self.buf, self.lop, self.hip, self.pivot_state, out)


class FastILiftBl(_FastMasked):
    def __init__(self, K, m, action_means, affected_sets, lam, baseline_means, epsilon):
        super().__init__(K, m, action_means, affected_sets, lam)
        self.mu0 = np.ascontiguousarray(baseline_means)
        self.eps = float(epsilon)
        self.n0 = P.identification_threshold(self.eps, lam, factor=8.0)
        self.ident = np.ones((K, m), dtype=np.bool_)

    def run_chunk(self, t0, noise, out):
        _run_ilift_bl(t0, noise.shape[0], self.K, self.m, self.lam, self.eps, self.n0,
                      self.mu0, self.action_means, noise, self.N, self.S, self.ident,
                      self.G, out)


FAST_TAGS = {
    P.UCB_BASELINE,
    P.THOMPSON_GAUSSIAN,
    P.UPUCB_BL,
    P.UPUCB_WB,
    P.UPUCB_L_BL,
    P.UPUCB_L_WB,
    P.UPUCB_ILIFT_BL,
}


def make_fast_policy(tag, *, spec, lam=None, L_bound=None, epsilon=None, sigma2=None,
                     prior_mean=None, prior_var=None, policy_seed=None,
                     baseline_bound="ucb"):
    """Fast-path twin of :func:`upliftsim.policies.make_policy`."""
    K, m = spec.num_actions, spec.num_variables
    means = spec.action_means
    sets = spec.affected_sets
    if tag == P.UCB_BASELINE:
        return FastUcbBaseline(K, m, means, lam)
    if tag == P.THOMPSON_GAUSSIAN:
        rng = substream(policy_seed[0], policy_seed[1])
        return FastThompson(K, m, means, sigma2, prior_mean, prior_var, rng)
    if tag == P.UPUCB_BL:
        return FastUpUcbBl(K, m, means, sets, lam, spec.baseline_means)
    if tag == P.UPUCB_WB:
        return FastUpUcbWb(K, m, means, sets, lam, baseline_bound)
    if tag == P.UPUCB_L_BL:
        return FastUpUcbLBl(K, m, means, sets, lam, spec.baseline_means, L_bound)
    if tag == P.UPUCB_L_WB:
        return FastUpUcbLWb(K, m, means, sets, lam, L_bound)
    if tag == P.UPUCB_ILIFT_BL:
        return FastILiftBl(K, m, means, sets, lam, spec.baseline_means, epsilon)
    raise ValueError(f"no fast kernel for {tag!r}")
