"""Command line entry points: run, sweep, ablation, validate.

Exit codes: 0 on success, 2 on configuration errors, 3 on runtime failures.
The default output directory comes from --out, then the config, then the
UPLIFTSIM_OUTPUT_DIR environment variable, then the working directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import harness
from .core import load_spec, validate_spec
from .harness import ConfigError


def _add_common(sub):
    sub.add_argument("config", help="path to the JSON experiment config")
    sub.add_argument("--seeds", type=int, default=None,
                     help="override the seed count (keeps the configured base)")
    sub.add_argument("--horizon", type=int, default=None, help="override the horizon")
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--threads", type=int, default=None, help="worker processes")
    sub.add_argument("--log-grid", type=int, default=None, dest="log_grid",
                     help="number of logging grid points")
    sub.add_argument("--full-traces", action="store_true", help="log every round")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="upliftsim",
                                     description="Replicated bandit simulations with uplift-estimating policies")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, descr in (("run", "run every configured (policy, parameter, seed) combination"),
                        ("sweep", "run the parameter grids and select the best point per policy"),
                        ("ablation", "run the misspecified-bound and baseline-LCB ablations")):
        _add_common(subs.add_parser(name, help=descr))
    val = subs.add_parser("validate", help="validate a config or an instance spec file")
    val.add_argument("path", help="JSON config or instance spec")
    return parser


def _apply_overrides(cfg: harness.ExperimentConfig, args) -> harness.ExperimentConfig:
    updates = {}
    if args.seeds is not None:
        if args.seeds < 1:
            raise ConfigError(["--seeds: must be positive"])
        base = cfg.seeds[0] if cfg.seeds else 0
        updates["seeds"] = tuple(range(base, base + args.seeds))
    if args.horizon is not None:
        if args.horizon < 1:
            raise ConfigError(["--horizon: must be positive"])
        updates["horizon"] = args.horizon
    if args.out is not None:
        updates["output_dir"] = args.out
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError(["--threads: must be positive"])
        updates["threads"] = args.threads
    if args.log_grid is not None:
        if args.log_grid < 2:
            raise ConfigError(["--log-grid: must be at least 2"])
        updates["log_grid_points"] = args.log_grid
    if args.full_traces:
        updates["full_traces"] = True
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _cmd_run(args) -> int:
    cfg = _apply_overrides(harness.load_config(args.config), args)
    result = harness.run_experiment(cfg)
    paths = harness.export_csv(result, args.out)
    print(f"wrote {paths['traces']}, {paths['summary']}, {paths['resolved']}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _apply_overrides(harness.load_config(args.config), args)
    selection, result = harness.sweep_and_select(cfg)
    paths = harness.export_csv(result, args.out)
    out_dir = harness.default_output_dir(args.out or cfg.output_dir)
    sel_path = f"{out_dir}/selection.json"
    with open(sel_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(selection, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for label, info in sorted(selection.items()):
        print(f"{label}: {info['params_id']} (mean {info['mean']:.4g}, std {info['std']:.4g})")
    print(f"wrote {paths['summary']}, {sel_path}")
    return 0


def _cmd_ablation(args) -> int:
    cfg = _apply_overrides(harness.load_config(args.config), args)
    result = harness.ablation_suite(cfg)
    paths = harness.export_csv(result, args.out)
    print(f"wrote {paths['traces']}, {paths['summary']}, {paths['resolved']}")
    return 0


def _cmd_validate(args) -> int:
    with open(args.path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "num_actions" in doc and "noise_model" in doc:
        spec = load_spec(args.path)
        violations = validate_spec(spec)
        if violations:
            for v in violations:
                print(f"violation [{v.kind}] action={v.action} variable={v.variable}: {v.message}")
            raise ConfigError([f"{len(violations)} spec violations"])
        print("spec ok")
        return 0
    cfg = harness.parse_config(doc)
    spec = harness.build_spec(cfg.instance) if cfg.instance.get("kind") != "contextual" else None
    if spec is not None:
        harness._validate_roster(cfg, spec)
        violations = validate_spec(spec)
        if violations:
            raise ConfigError([f"instance: {len(violations)} spec violations"])
    print("config ok")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "ablation": _cmd_ablation,
        "validate": _cmd_validate,
    }[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to a distinct exit code
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
