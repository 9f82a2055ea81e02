"""Batch experiment runner: replicated runs, sweeps, summaries, CSV export.

A run is identified by (policy label, parameter point, seed) and is fully
deterministic: the environment stream depends only on the seed, the policy
stream on (seed, label, parameter point).  Workers execute runs in parallel
and results are reduced by sorted key, so output never depends on
scheduling.  Per-round traces are recorded on a logarithmic grid of rounds
(plus the quartiles and the horizon) to keep hundred-seed sweeps small;
full traces sit behind a flag.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import policies as P
from .contextual import make_linear_contextual_env, run_c2upucb
from .core import UpliftingBanditSpec, load_spec, suboptimality_gaps
from .environments import (
    BLOCK_SHARED,
    FULLY_SHARED,
    make_bernoulli_cluster_preset,
    make_environment,
    make_gaussian_preset,
    make_lower_bound_environment,
    make_lower_bound_instance,
)
from .rng import substream, substream_id

OUTPUT_DIR_ENV = "UPLIFTSIM_OUTPUT_DIR"

THEORY = "THEORY"
TUNED = "TUNED"

GAUSSIAN_LAMBDA_GRID = [float(k) for k in range(1, 11)]
BERNOULLI_LAMBDA_GRID = [k * 10.0**-g for g in (5, 6, 7) for k in range(1, 11)]
GAUSSIAN_SIGMA2_GRID = [k * 10.0**-g for g in (0, 1, 2) for k in range(1, 11)]
BERNOULLI_SIGMA2_GRID = [k * 10.0**-g for g in (5, 6, 7) for k in range(1, 11)]


class ConfigError(Exception):
    """Invalid configuration; ``errors`` lists field-path messages."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class PolicySetting:
    """One roster entry before grid expansion."""

    tag: str
    label: str
    lambdas: tuple | None = None      # TUNED grid; None = instance default
    sigma2s: tuple | None = None      # Thompson grid
    L_bound: int | None = None
    epsilon: float | None = None
    baseline_bound: str = "ucb"


@dataclass(frozen=True)
class ExperimentConfig:
    instance: dict
    horizon: int
    seeds: tuple
    policies: tuple
    mode: str = TUNED
    delta: float = 0.05
    noise_scale: float = 1.0
    log_grid_points: int = 200
    full_traces: bool = False
    threads: int = 1
    output_dir: str | None = None
    contextual: dict | None = None


@dataclass(frozen=True)
class ResolvedPolicy:
    """One fully-resolved (policy, parameter point) pair."""

    tag: str
    label: str
    params_id: str
    lam: float | None
    sigma2: float | None
    L_bound: int | None
    epsilon: float | None
    baseline_bound: str
    delta_tilde: float | None
    prior_mean: float | None = None
    prior_var: float | None = None

    @property
    def key(self):
        return (self.label, self.params_id)


@dataclass
class RunRecord:
    label: str
    params_id: str
    seed: int
    grid: np.ndarray
    cum_regret: np.ndarray
    actions: np.ndarray

    @property
    def final_regret(self) -> float:
        return float(self.cum_regret[-1])


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    grid: np.ndarray
    records: list
    summary_rows: list = field(default_factory=list)
    resolved: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Configuration parsing and validation.
# ---------------------------------------------------------------------------

def _as_grid(value, path, errors, positive=True):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        value = [value]
    if not isinstance(value, list) or not value:
        errors.append(f"{path}: expected a number or a nonempty list")
        return None
    out = []
    for i, x in enumerate(value):
        if not isinstance(x, (int, float)) or (positive and x <= 0):
            errors.append(f"{path}[{i}]: expected a positive number")
        else:
            out.append(float(x))
    return tuple(out)


def parse_config(doc: dict) -> ExperimentConfig:
    errors: list[str] = []
    instance = doc.get("instance")
    if not isinstance(instance, dict) or "kind" not in instance:
        errors.append("instance: expected an object with a 'kind' field")
        instance = {"kind": "gaussian_preset"}
    kind = instance.get("kind")
    known = {"gaussian_preset", "bernoulli_cluster", "lower_bound", "custom", "contextual"}
    if kind not in known:
        errors.append(f"instance.kind: unknown kind {kind!r}, expected one of {sorted(known)}")

    horizon = doc.get("horizon")
    if not isinstance(horizon, int) or horizon < 1:
        errors.append("horizon: expected a positive integer")
        horizon = 1

    seeds_doc = doc.get("seeds")
    seeds: tuple = ()
    if isinstance(seeds_doc, list) and seeds_doc and all(isinstance(s, int) for s in seeds_doc):
        seeds = tuple(seeds_doc)
    elif isinstance(seeds_doc, dict) and isinstance(seeds_doc.get("base"), int) \
            and isinstance(seeds_doc.get("count"), int) and seeds_doc["count"] >= 1:
        seeds = tuple(range(seeds_doc["base"], seeds_doc["base"] + seeds_doc["count"]))
    else:
        errors.append("seeds: expected a nonempty list of integers or {base, count}")

    mode = doc.get("mode", TUNED)
    if mode not in (THEORY, TUNED):
        errors.append(f"mode: expected THEORY or TUNED, got {mode!r}")
        mode = TUNED
    delta = doc.get("delta", 0.05)
    if not isinstance(delta, (int, float)) or not 0 < delta < 1:
        errors.append("delta: expected a number in (0, 1)")
        delta = 0.05

    policies = []
    pol_doc = doc.get("policies", [])
    if kind == "contextual":
        if pol_doc:
            errors.append("policies: must be empty for contextual instances (see 'contextual')")
        if not isinstance(doc.get("contextual"), dict):
            errors.append("contextual: required object for contextual instances")
    elif not isinstance(pol_doc, list) or not pol_doc:
        errors.append("policies: expected a nonempty list")
    else:
        for i, entry in enumerate(pol_doc):
            path = f"policies[{i}]"
            if not isinstance(entry, dict) or "tag" not in entry:
                errors.append(f"{path}: expected an object with a 'tag' field")
                continue
            tag = entry["tag"]
            baseline_bound = entry.get("baseline_bound", "ucb")
            if tag == "UPUCB_WB_BLCB":
                tag, baseline_bound = P.UPUCB_WB, "lcb"
            if tag not in P.ALL_TAGS:
                errors.append(f"{path}.tag: unknown policy tag {entry['tag']!r}")
                continue
            if baseline_bound not in ("ucb", "lcb"):
                errors.append(f"{path}.baseline_bound: expected 'ucb' or 'lcb'")
                baseline_bound = "ucb"
            L_bound = entry.get("L_bound")
            if L_bound is not None and (not isinstance(L_bound, int) or L_bound < 0):
                errors.append(f"{path}.L_bound: expected a nonnegative integer")
                L_bound = None
            epsilon = entry.get("epsilon")
            if epsilon is not None and (not isinstance(epsilon, (int, float)) or epsilon <= 0):
                errors.append(f"{path}.epsilon: expected a positive number")
                epsilon = None
            label = entry.get("label") or _default_label(tag, baseline_bound, L_bound)
            policies.append(PolicySetting(
                tag=tag,
                label=label,
                lambdas=_as_grid(entry.get("lambda"), f"{path}.lambda", errors),
                sigma2s=_as_grid(entry.get("sigma2"), f"{path}.sigma2", errors),
                L_bound=L_bound,
                epsilon=float(epsilon) if epsilon is not None else None,
                baseline_bound=baseline_bound,
            ))

    noise_scale = doc.get("noise_scale", 1.0)
    if not isinstance(noise_scale, (int, float)) or noise_scale < 0:
        errors.append("noise_scale: expected a nonnegative number")
        noise_scale = 1.0
    threads = doc.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        errors.append("threads: expected a positive integer")
        threads = 1
    log_points = doc.get("log_grid_points", 200)
    if not isinstance(log_points, int) or log_points < 2:
        errors.append("log_grid_points: expected an integer >= 2")
        log_points = 200

    cfg = ExperimentConfig(
        instance=dict(instance),
        horizon=horizon,
        seeds=seeds,
        policies=tuple(policies),
        mode=mode,
        delta=float(delta),
        noise_scale=float(noise_scale),
        log_grid_points=log_points,
        full_traces=bool(doc.get("full_traces", False)),
        threads=threads,
        output_dir=doc.get("output_dir"),
        contextual=doc.get("contextual"),
    )
    if errors:
        raise ConfigError(errors)
    return cfg


def _default_label(tag, baseline_bound, L_bound):
    label = tag
    if tag == P.UPUCB_WB and baseline_bound == "lcb":
        label = "UPUCB_WB_BLCB"
    return label


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"config file {path}: {exc}"]) from exc
    return parse_config(doc)


# ---------------------------------------------------------------------------
# Instance construction and knowledge resolution.
# ---------------------------------------------------------------------------

def build_spec(instance: dict) -> UpliftingBanditSpec:
    kind = instance["kind"]
    if kind == "gaussian_preset":
        return make_gaussian_preset()
    if kind == "bernoulli_cluster":
        return make_bernoulli_cluster_preset()
    if kind == "lower_bound":
        return make_lower_bound_instance(
            K=int(instance["K"]), m=int(instance["m"]),
            gaps=instance["gaps"], affected_counts=instance["affected_counts"],
            variant=instance.get("variant", FULLY_SHARED),
        )
    if kind == "custom":
        return load_spec(instance["path"])
    raise ConfigError([f"instance.kind: cannot build a bandit spec for {kind!r}"])


def build_environment(instance: dict, spec: UpliftingBanditSpec, seed: int, noise_scale: float):
    if instance["kind"] == "lower_bound" and instance.get("variant", FULLY_SHARED) == BLOCK_SHARED:
        return make_lower_bound_environment(
            K=spec.num_actions, m=spec.num_variables, gaps=instance["gaps"],
            affected_counts=instance["affected_counts"], variant=BLOCK_SHARED,
            rng_seed=seed, noise_scale=noise_scale,
        )
    return make_environment(spec, seed, noise_scale)


def true_min_individual_uplift(spec: UpliftingBanditSpec) -> float:
    """Smallest absolute per-variable effect over all (action, affected
    variable) pairs; undefined when every affected set is empty."""
    best = None
    for a, s in enumerate(spec.affected_sets):
        for v in s:
            eff = abs(spec.action_means[a, v - 1] - spec.baseline_means[v - 1])
            best = eff if best is None else min(best, eff)
    if best is None:
        raise ValueError("no affected variables: the minimum individual uplift is undefined")
    return float(best)


def _fmt_num(x: float) -> str:
    out = repr(float(x))
    return out


def resolve_policies(cfg: ExperimentConfig, spec: UpliftingBanditSpec) -> list[ResolvedPolicy]:
    """Expand parameter grids and fill knowledge defaults from the instance."""
    K, m, T = spec.num_actions, spec.num_variables, cfg.horizon
    gaps, _ = suboptimality_gaps(spec)
    rewards = spec.action_means.sum(axis=1)
    prior_mean = float(rewards.mean())
    prior_var = float(rewards.var())
    default_L = int(spec.affected_counts.max())
    bernoulli = cfg.instance.get("kind") == "bernoulli_cluster"
    resolved = []
    errors = []
    for setting in cfg.policies:
        L_bound = setting.L_bound if setting.L_bound is not None else default_L
        epsilon = setting.epsilon
        if epsilon is None and "epsilon" in P.REQUIREMENTS[setting.tag]:
            epsilon = true_min_individual_uplift(spec)
        if setting.tag == P.THOMPSON_GAUSSIAN:
            if cfg.mode == THEORY:
                grid = setting.sigma2s or (1.0,)
            else:
                grid = setting.sigma2s or tuple(
                    BERNOULLI_SIGMA2_GRID if bernoulli else GAUSSIAN_SIGMA2_GRID)
            for s2 in grid:
                resolved.append(ResolvedPolicy(
                    tag=setting.tag, label=setting.label,
                    params_id=f"sigma2={_fmt_num(s2)}", lam=None, sigma2=s2,
                    L_bound=None, epsilon=None, baseline_bound="ucb",
                    delta_tilde=None, prior_mean=prior_mean, prior_var=prior_var,
                ))
            continue
        if cfg.mode == THEORY:
            dt = P.theory_delta_tilde(setting.tag, K, m, T, cfg.delta, L=L_bound)
            grid = (math.log(1.0 / dt),)
        else:
            dt = None
            grid = setting.lambdas or tuple(
                BERNOULLI_LAMBDA_GRID if bernoulli else GAUSSIAN_LAMBDA_GRID)
        for lam in grid:
            resolved.append(ResolvedPolicy(
                tag=setting.tag, label=setting.label,
                params_id=f"lambda={_fmt_num(lam)}", lam=float(lam), sigma2=None,
                L_bound=L_bound, epsilon=epsilon, baseline_bound=setting.baseline_bound,
                delta_tilde=dt,
            ))
    if errors:
        raise ConfigError(errors)
    _ = gaps
    return resolved


def build_policy(rp: ResolvedPolicy, spec: UpliftingBanditSpec, horizon: int, seed: int):
    """Reference-path policy for one resolved point."""
    rng = substream(seed, f"policy:{rp.label}:{rp.params_id}")
    return P.make_policy(
        rp.tag,
        num_actions=spec.num_actions,
        num_variables=spec.num_variables,
        lam=rp.lam,
        horizon=horizon,
        baseline_means=spec.baseline_means,
        affected_sets=spec.affected_sets,
        L_bound=rp.L_bound,
        epsilon=rp.epsilon,
        sigma2=rp.sigma2,
        prior_mean=rp.prior_mean,
        prior_var=rp.prior_var,
        rng=rng,
        baseline_bound=rp.baseline_bound,
    )


# ---------------------------------------------------------------------------
# Run loops.
# ---------------------------------------------------------------------------

def run_single(env, policy, T: int) -> np.ndarray:
    """Reference loop: one policy, one environment, T rounds."""
    actions = np.empty(T, dtype=np.int64)
    for t in range(1, T + 1):
        a = policy.select_action(t)
        policy.observe(a, env.sample_payoffs(a))
        actions[t - 1] = a
    return actions


def log_grid(T: int, points: int = 200) -> np.ndarray:
    """Logarithmic round grid including the quartiles and the horizon."""
    if points >= T:
        return np.arange(1, T + 1, dtype=np.int64)
    marks = np.geomspace(1, T, num=points).round().astype(np.int64)
    anchors = np.array([max(1, T // 4), max(1, T // 2), max(1, 3 * T // 4), T], dtype=np.int64)
    return np.unique(np.concatenate([marks, anchors]))


_WORKER_CTX: dict = {}


def _init_worker(payload):
    _WORKER_CTX.clear()
    _WORKER_CTX.update(payload)
    _WORKER_CTX["spec"] = build_spec(payload["instance"])


def _trace_at_grid(actions: np.ndarray, gaps: np.ndarray, grid: np.ndarray):
    cum = np.cumsum(gaps[actions - 1])
    return cum[grid - 1], actions[grid - 1]


def _run_reference_task(args):
    point_idx, seed = args
    spec = _WORKER_CTX["spec"]
    cfg: ExperimentConfig = _WORKER_CTX["cfg"]
    rp: ResolvedPolicy = _WORKER_CTX["resolved"][point_idx]
    env = build_environment(cfg.instance, spec, seed, cfg.noise_scale)
    policy = build_policy(rp, spec, cfg.horizon, seed)
    actions = run_single(env, policy, cfg.horizon)
    gaps = _WORKER_CTX["gaps"]
    grid = _WORKER_CTX["grid"]
    cum, acts = _trace_at_grid(actions, gaps, grid)
    return point_idx, seed, cum, acts


def _run_fast_seed_task(seed):
    from ._kernels import make_fast_policy

    spec = _WORKER_CTX["spec"]
    cfg: ExperimentConfig = _WORKER_CTX["cfg"]
    indices = _WORKER_CTX["fast_indices"]
    resolved = _WORKER_CTX["resolved"]
    T = cfg.horizon
    env = make_environment(spec, seed, cfg.noise_scale)
    states = []
    outs = []
    for i in indices:
        rp = resolved[i]
        states.append(make_fast_policy(
            rp.tag, spec=spec, lam=rp.lam, L_bound=rp.L_bound, epsilon=rp.epsilon,
            sigma2=rp.sigma2, prior_mean=rp.prior_mean, prior_var=rp.prior_var,
            policy_seed=(seed, f"policy:{rp.label}:{rp.params_id}"),
            baseline_bound=rp.baseline_bound,
        ))
        outs.append(np.empty(T, dtype=np.int64))
    chunk = 8192
    for t0 in range(0, T, chunk):
        n = min(chunk, T - t0)
        noise = env.sample_noise_block(n)
        for st, out in zip(states, outs):
            st.run_chunk(t0 + 1, noise, out[t0:t0 + n])
    gaps = _WORKER_CTX["gaps"]
    grid = _WORKER_CTX["grid"]
    results = []
    for i, out in zip(indices, outs):
        cum, acts = _trace_at_grid(out, gaps, grid)
        results.append((i, seed, cum, acts))
    return results


def _fast_path_available(cfg: ExperimentConfig, spec: UpliftingBanditSpec) -> bool:
    from .core import GaussianCorrelated

    if cfg.instance.get("kind") == "lower_bound" and cfg.instance.get("variant") == BLOCK_SHARED:
        return False
    return isinstance(spec.noise_model, GaussianCorrelated)


def run_experiment(cfg: ExperimentConfig, engine: str = "auto") -> ExperimentResult:
    """Execute every (policy point, seed) run and aggregate summaries."""
    if cfg.instance.get("kind") == "contextual":
        return _run_contextual_experiment(cfg)
    spec = build_spec(cfg.instance)
    _validate_roster(cfg, spec)
    resolved = resolve_policies(cfg, spec)
    gaps, _ = suboptimality_gaps(spec)
    grid = np.arange(1, cfg.horizon + 1) if cfg.full_traces else log_grid(cfg.horizon, cfg.log_grid_points)

    if engine not in ("auto", "reference", "fast"):
        raise ValueError("engine must be auto, reference or fast")
    use_fast = engine != "reference" and _fast_path_available(cfg, spec)
    from ._kernels import FAST_TAGS  # import postponed: numba warmup is slow

    fast_indices = [i for i, rp in enumerate(resolved) if use_fast and rp.tag in FAST_TAGS]
    ref_indices = [i for i in range(len(resolved)) if i not in set(fast_indices)]
    if engine == "fast" and ref_indices:
        bad = sorted({resolved[i].tag for i in ref_indices})
        raise ValueError(f"no fast kernels for {bad}")

    payload = {
        "instance": cfg.instance,
        "cfg": cfg,
        "resolved": resolved,
        "gaps": gaps,
        "grid": grid,
        "fast_indices": fast_indices,
    }
    records: list[RunRecord] = []

    def consume(point_idx, seed, cum, acts):
        rp = resolved[point_idx]
        records.append(RunRecord(label=rp.label, params_id=rp.params_id, seed=seed,
                                 grid=grid, cum_regret=cum, actions=acts))

    ref_tasks = [(i, seed) for i in ref_indices for seed in cfg.seeds]
    if cfg.threads > 1 and (len(ref_tasks) + len(cfg.seeds)) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads, initializer=_init_worker,
                                 initargs=(payload,)) as pool:
            if fast_indices:
                for results in pool.map(_run_fast_seed_task, cfg.seeds, chunksize=1):
                    for item in results:
                        consume(*item)
            for item in pool.map(_run_reference_task, ref_tasks, chunksize=8):
                consume(*item)
    else:
        _init_worker(payload)
        if fast_indices:
            for seed in cfg.seeds:
                for item in _run_fast_seed_task(seed):
                    consume(*item)
        for task in ref_tasks:
            consume(*_run_reference_task(task))

    records.sort(key=lambda r: (r.label, r.params_id, r.seed))
    summary_rows = summarize(records)
    result = ExperimentResult(config=cfg, grid=grid, records=records,
                              summary_rows=summary_rows,
                              resolved=_resolved_doc(cfg, spec, resolved, grid))
    return result


def _validate_roster(cfg: ExperimentConfig, spec: UpliftingBanditSpec) -> None:
    errors = []
    for i, setting in enumerate(cfg.policies):
        needs = P.REQUIREMENTS[setting.tag]
        if "epsilon" in needs and setting.epsilon is None:
            try:
                true_min_individual_uplift(spec)
            except ValueError:
                errors.append(
                    f"policies[{i}].epsilon: required (instance has no affected variables "
                    "to derive it from)")
        if setting.L_bound is not None and setting.L_bound > spec.num_variables:
            errors.append(f"policies[{i}].L_bound: exceeds the number of variables")
        if cfg.mode == TUNED and setting.tag != P.THOMPSON_GAUSSIAN and setting.lambdas is None \
                and cfg.instance.get("kind") not in ("gaussian_preset", "bernoulli_cluster"):
            errors.append(f"policies[{i}].lambda: required in TUNED mode for this instance")
    if cfg.horizon < spec.num_actions:
        errors.append("horizon: must be at least the number of actions")
    if errors:
        raise ConfigError(errors)


def _resolved_doc(cfg, spec, resolved, grid) -> dict:
    doc = {
        "instance": cfg.instance,
        "horizon": cfg.horizon,
        "seeds": list(cfg.seeds),
        "mode": cfg.mode,
        "delta": cfg.delta,
        "noise_scale": cfg.noise_scale,
        "num_actions": spec.num_actions,
        "num_variables": spec.num_variables,
        "log_grid": [int(t) for t in grid] if len(grid) <= 4096 else "full",
        "policies": [],
    }
    for rp in resolved:
        doc["policies"].append({
            "label": rp.label,
            "params_id": rp.params_id,
            "tag": rp.tag,
            "lambda": rp.lam,
            "sigma2": rp.sigma2,
            "L_bound": rp.L_bound,
            "epsilon": rp.epsilon,
            "baseline_bound": rp.baseline_bound,
            "delta_tilde": rp.delta_tilde,
            "prior_mean": rp.prior_mean,
            "prior_var": rp.prior_var,
            "env_stream": "philox:<seed>:payoffs",
            "policy_stream": substream_id(0, f"policy:{rp.label}:{rp.params_id}").replace(
                "philox:0:", "philox:<seed>:"),
        })
    return doc


def _run_contextual_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    ctx = dict(cfg.contextual or {})
    required = ("num_individuals", "dim", "num_treatments", "budget", "lambda_reg")
    missing = [k for k in required if k not in ctx]
    if missing:
        raise ConfigError([f"contextual.{k}: required" for k in missing])
    label = "C2UPUCB_BL" if ctx.get("baseline_known") else "C2UPUCB"
    params_id = f"lambda_reg={_fmt_num(ctx['lambda_reg'])}"
    grid = log_grid(cfg.horizon, cfg.log_grid_points) if not cfg.full_traces \
        else np.arange(1, cfg.horizon + 1)
    records = []
    for seed in cfg.seeds:
        env = make_linear_contextual_env(
            int(ctx["num_individuals"]), int(ctx["dim"]), int(ctx["num_treatments"]),
            seed, noise_scale=cfg.noise_scale)
        trace = run_c2upucb(env, int(ctx["budget"]), cfg.horizon,
                            bool(ctx.get("baseline_known", False)),
                            float(ctx["lambda_reg"]), cfg.delta)
        records.append(RunRecord(
            label=label, params_id=params_id, seed=seed, grid=grid,
            cum_regret=trace.cumulative_regret[grid - 1],
            actions=trace.actions[grid - 1],
        ))
    records.sort(key=lambda r: (r.label, r.params_id, r.seed))
    return ExperimentResult(config=cfg, grid=grid, records=records,
                            summary_rows=summarize(records),
                            resolved={"instance": cfg.instance, "contextual": ctx,
                                      "horizon": cfg.horizon, "seeds": list(cfg.seeds)})


# ---------------------------------------------------------------------------
# Aggregation and CSV export.
# ---------------------------------------------------------------------------

def nearest_rank_percentile(values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile: the ceil(q*n)-th smallest value."""
    values = np.sort(np.asarray(values, dtype=float))
    n = len(values)
    if n == 0:
        raise ValueError("empty sample")
    rank = max(1, math.ceil(q * n))
    return float(values[rank - 1])


def summarize(records) -> list[dict]:
    """Per (label, params_id, grid round): mean, stderr, population std and
    nearest-rank 95th percentile of cumulative regret over seeds."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.label, r.params_id), []).append(r)
    rows = []
    for (label, params_id), runs in sorted(groups.items()):
        runs = sorted(runs, key=lambda r: r.seed)
        mat = np.stack([r.cum_regret for r in runs])
        grid = runs[0].grid
        mean = mat.mean(axis=0)
        std = mat.std(axis=0)
        stderr = std / math.sqrt(mat.shape[0])
        for j, t in enumerate(grid):
            rows.append({
                "policy": label,
                "params_id": params_id,
                "t": int(t),
                "mean": float(mean[j]),
                "stderr": float(stderr[j]),
                "std": float(std[j]),
                "p95": nearest_rank_percentile(mat[:, j], 0.95),
            })
    return rows


def default_output_dir(cfg_dir=None) -> str:
    return cfg_dir or os.environ.get(OUTPUT_DIR_ENV) or os.getcwd()


def export_csv(result: ExperimentResult, out_dir=None) -> dict:
    """Write traces.csv, summary.csv and config.resolved.json; returns paths."""
    out_dir = default_output_dir(out_dir or result.config.output_dir)
    os.makedirs(out_dir, exist_ok=True)
    traces_path = os.path.join(out_dir, "traces.csv")
    summary_path = os.path.join(out_dir, "summary.csv")
    resolved_path = os.path.join(out_dir, "config.resolved.json")
    with open(traces_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("policy,params_id,seed,t,action,cum_regret\n")
        for r in result.records:
            for j, t in enumerate(r.grid):
                fh.write(f"{r.label},{r.params_id},{r.seed},{int(t)},{int(r.actions[j])},"
                         f"{_fmt_num(r.cum_regret[j])}\n")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("policy,params_id,t,mean,stderr,std,p95\n")
        for row in result.summary_rows:
            fh.write(f"{row['policy']},{row['params_id']},{row['t']},{_fmt_num(row['mean'])},"
                     f"{_fmt_num(row['stderr'])},{_fmt_num(row['std'])},{_fmt_num(row['p95'])}\n")
    with open(resolved_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"traces": traces_path, "summary": summary_path, "resolved": resolved_path}


# ---------------------------------------------------------------------------
# Sweeps and ablations.
# ---------------------------------------------------------------------------

def tuning_score(final_regrets: np.ndarray) -> float:
    """Tuning criterion: mean plus one population standard deviation."""
    final_regrets = np.asarray(final_regrets, dtype=float)
    return float(final_regrets.mean() + final_regrets.std())


def sweep_and_select(cfg: ExperimentConfig, engine: str = "auto"):
    """Run every grid point over all seeds and pick the best per policy label.

    Returns ``(selection, result)`` where selection maps label to the winning
    params_id and its score.
    """
    if cfg.mode != TUNED:
        raise ConfigError(["mode: sweeps require TUNED mode"])
    result = run_experiment(cfg, engine=engine)
    finals: dict = {}
    for r in result.records:
        finals.setdefault((r.label, r.params_id), []).append(r.final_regret)
    if not finals:
        raise ConfigError(["policies: the sweep produced no runs"])
    selection: dict = {}
    for (label, params_id), values in sorted(finals.items()):
        score = tuning_score(np.array(values))
        cur = selection.get(label)
        if cur is None or score < cur["score"]:
            selection[label] = {"params_id": params_id, "score": score,
                                "mean": float(np.mean(values)),
                                "std": float(np.std(values))}
    return selection, result


ABLATION_L_VALUES = (5, 8, 10, 15)


def ablation_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Roster for the two ablations: misspecified size bound and the
    baseline-LCB variant, each across the exploration grid."""
    if cfg.instance.get("kind") != "gaussian_preset":
        raise ConfigError(["instance.kind: the ablation suite runs on the gaussian_preset"])
    lambdas = tuple(GAUSSIAN_LAMBDA_GRID)
    settings = []
    for L in ABLATION_L_VALUES:
        settings.append(PolicySetting(tag=P.UPUCB_L_BL, label=f"UPUCB_L_BL[L={L}]",
                                      lambdas=lambdas, L_bound=L))
    settings.append(PolicySetting(tag=P.UPUCB_WB, label="UPUCB_WB", lambdas=lambdas))
    settings.append(PolicySetting(tag=P.UPUCB_WB, label="UPUCB_WB_BLCB", lambdas=lambdas,
                                  baseline_bound="lcb"))
    return replace(cfg, policies=tuple(settings), mode=TUNED)


def ablation_suite(cfg: ExperimentConfig, engine: str = "auto") -> ExperimentResult:
    return run_experiment(ablation_config(cfg), engine=engine)
