"""Render regret curves from a harness summary CSV.

Consumes only the stable summary schema (policy, params_id, t, mean, stderr,
std, p95); it has no dependency on the simulation package, so the two can be
installed and tested independently.  The mean metric draws one curve per
(policy, parameter point) with a shaded band of one standard error on each
side; the 95th-percentile metric draws plain curves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

REQUIRED_COLUMNS = ("policy", "params_id", "t", "mean", "stderr", "std", "p95")
METRICS = ("mean", "p95")


class PlotError(ValueError):
    pass


@dataclass
class PlotSpec:
    summary_path: str
    metric: str = "mean"
    out_path: str = "regret.png"
    policies: list | None = None
    log_x: bool = False
    log_y: bool = False
    title: str | None = None
    _: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.metric not in METRICS:
            raise PlotError(f"metric must be one of {METRICS}, got {self.metric!r}")


def read_summary(path):
    """Parse the summary CSV into a list of typed row dicts."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise PlotError(f"summary file {path} lacks columns: {', '.join(missing)}")
        rows = []
        for row in reader:
            rows.append({
                "policy": row["policy"],
                "params_id": row["params_id"],
                "t": int(row["t"]),
                "mean": float(row["mean"]),
                "stderr": float(row["stderr"]),
                "std": float(row["std"]),
                "p95": float(row["p95"]),
            })
    if not rows:
        raise PlotError(f"summary file {path} has no data rows")
    return rows


def _grouped_curves(rows, policies):
    if policies is not None:
        wanted = set(policies)
        present = {r["policy"] for r in rows}
        unknown = wanted - present
        if unknown:
            raise PlotError(f"policies not present in the summary: {sorted(unknown)}")
        rows = [r for r in rows if r["policy"] in wanted]
    if not rows:
        raise PlotError("policy filter selected no rows")
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["policy"], r["params_id"]), []).append(r)
    curves = []
    for (policy, params_id), grp in sorted(groups.items()):
        grp = sorted(grp, key=lambda r: r["t"])
        curves.append({
            "label": f"{policy} ({params_id})",
            "t": np.array([r["t"] for r in grp]),
            "mean": np.array([r["mean"] for r in grp]),
            "stderr": np.array([r["stderr"] for r in grp]),
            "p95": np.array([r["p95"] for r in grp]),
        })
    return curves


def build_figure(spec: PlotSpec):
    """Create (but do not save) the figure for a plot spec."""
    curves = _grouped_curves(read_summary(spec.summary_path), spec.policies)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for curve in curves:
        if spec.metric == "mean":
            line, = ax.plot(curve["t"], curve["mean"], label=curve["label"])
            ax.fill_between(curve["t"], curve["mean"] - curve["stderr"],
                            curve["mean"] + curve["stderr"],
                            color=line.get_color(), alpha=0.25, linewidth=0)
        else:
            ax.plot(curve["t"], curve["p95"], label=curve["label"])
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret" if spec.metric == "mean" else "95th percentile regret")
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    return fig


def plot_regret(spec: PlotSpec) -> str:
    """Render and save the figure; returns the output path.

    Validation happens before the file is touched, so a failing spec never
    leaves a partial image behind.
    """
    fig = build_figure(spec)
    try:
        fig.savefig(spec.out_path)
    finally:
        plt.close(fig)
    return spec.out_path
