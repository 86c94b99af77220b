"""CSV emission and matplotlib figure rendering for the CLI report paths.

CSVs are the primary artifact (long format, one figure per file); the
PNGs are rendered next to them from the same rows. Schemas are stable:

sweep.csv    axis, value, seed, scheduler, sum_throughput, avg_power,
             min_delivery_ratio, mean_sets_evaluated
boundary.csv ray, scale, verdict, margin, lambda_0..lambda_{n-1}
trace.csv    see queues.TRACE_COLUMNS
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "SWEEP_COLUMNS",
    "BOUNDARY_COLUMNS",
    "fig_complexity",
    "fig_region",
    "fig_run_trace",
    "fig_sweep",
    "read_csv_rows",
    "write_boundary_csv",
    "write_sweep_csv",
]

SWEEP_COLUMNS = ["axis", "value", "seed", "scheduler", "sum_throughput",
                 "avg_power", "min_delivery_ratio", "mean_sets_evaluated"]
BOUNDARY_COLUMNS = ["ray", "scale", "verdict", "margin"]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _figsize(width=4.8):
    return (width, width * GOLDEN)


def write_sweep_csv(path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def write_boundary_csv(path, rows: list, n_lambda: int) -> None:
    cols = BOUNDARY_COLUMNS + [f"lambda_{i}" for i in range(n_lambda)]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        writer.writerows(rows)


def read_csv_rows(path) -> list:
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _by_scheduler(rows):
    out: dict = {}
    for r in rows:
        out.setdefault(r["scheduler"], []).append(r)
    return out


def fig_sweep(rows: list, axis: str, out_png) -> Path:
    """Mean sum-throughput vs the sweep axis, one line per scheduler."""
    fig, ax = plt.subplots(figsize=_figsize())
    for sched, srows in sorted(_by_scheduler(rows).items()):
        by_value: dict = {}
        for r in srows:
            by_value.setdefault(float(r["value"]), []).append(
                float(r["sum_throughput"]))
        xs = sorted(by_value)
        means = [sum(by_value[v]) / len(by_value[v]) for v in xs]
        lo = [min(by_value[v]) for v in xs]
        hi = [max(by_value[v]) for v in xs]
        ax.plot(xs, means, marker="o", label=sched)
        ax.fill_between(xs, lo, hi, alpha=0.15)
    ax.set_xlabel(axis)
    ax.set_ylabel("sum NRT throughput (packets/slot)")
    ax.legend()
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.savefig(out_png, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return Path(out_png)


def fig_complexity(rows: list, out_png) -> Path:
    """Mean evaluated-set count vs deadline-user count, log y."""
    fig, ax = plt.subplots(figsize=_figsize())
    for sched, srows in sorted(_by_scheduler(rows).items()):
        by_value: dict = {}
        for r in srows:
            by_value.setdefault(float(r["value"]), []).append(
                float(r["mean_sets_evaluated"]))
        xs = sorted(by_value)
        means = [sum(by_value[v]) / len(by_value[v]) for v in xs]
        ax.plot(xs, means, marker="o", label=sched)
    ax.set_yscale("log")
    ax.set_xlabel("number of deadline users")
    ax.set_ylabel("mean sets evaluated per slot")
    ax.legend()
    fig.savefig(out_png, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return Path(out_png)


def fig_run_trace(samples: list, out_png) -> Path:
    """Four panels over time: queues, deficit queues, power, throughput."""
    fig, axes = plt.subplots(2, 2, figsize=(8.0, 8.0 * GOLDEN), sharex=True)
    slots = [s["slot"] for s in samples]
    panels = [
        ("q_max", "max data queue (bits)", axes[0][0]),
        ("y_max", "max QoS deficit", axes[0][1]),
        ("avg_power", "running avg power", axes[1][0]),
        ("sum_throughput", "running sum throughput", axes[1][1]),
    ]
    for key, label, ax in panels:
        ax.plot(slots, [s[key] for s in samples], lw=1.0)
        ax.set_ylabel(label)
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)
    axes[0][1].plot(slots, [s["x_queue"] for s in samples], lw=1.0, ls="--",
                    label="power deficit")
    axes[0][1].legend(fontsize=8)
    for ax in axes[1]:
        ax.set_xlabel("slot")
    fig.tight_layout()
    fig.savefig(out_png, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return Path(out_png)


def fig_region(rows: list, out_png) -> Path | None:
    """Boundary scatter for one- or two-user rate regions."""
    lam_cols = sorted(c for c in rows[0] if c.startswith("lambda_"))
    boundary = [r for r in rows if r["verdict"] == "boundary"]
    if not boundary or len(lam_cols) > 2:
        return None
    fig, ax = plt.subplots(figsize=_figsize())
    if len(lam_cols) == 1:
        xs = [float(r["lambda_0"]) for r in boundary]
        ax.plot(xs, [0.0] * len(xs), marker="|", ms=20, ls="none")
        ax.set_xlabel("lambda_0 (packets/slot)")
        ax.set_yticks([])
    else:
        pts = sorted((float(r["lambda_0"]), float(r["lambda_1"]))
                     for r in boundary)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o")
        inside = [r for r in rows if r["verdict"] == "inside"]
        ax.scatter([float(r["lambda_0"]) for r in inside],
                   [float(r["lambda_1"]) for r in inside],
                   s=8, alpha=0.4, label="inside")
        ax.set_xlabel("lambda_0 (packets/slot)")
        ax.set_ylabel("lambda_1 (packets/slot)")
        ax.legend()
    fig.savefig(out_png, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return Path(out_png)
