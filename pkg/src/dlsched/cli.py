"""Command-line front end.

Verbs:
    run       one simulation from a config file -> report JSON, trace CSV,
              optional decision log, trace figure
    sweep     an experiment sweep from a spec file -> long-format CSV and
              a figure per axis
    region    rate-region boundary probe from a query file -> boundary CSV
              and figure
    selftest  fast invariant checks, PASS/FAIL lines

Exit codes: 0 ok, 1 constraint-flag failure (run --strict) or selftest
failure, 2 usage or configuration errors. Environment variables prefixed
DLSCHED_ override config fields.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import load_config, load_sweep_spec
from .engine import ConfigError, SystemConfig, run
from .region import RegionQuery, boundary_on_ray, in_lambert_region
from . import reports

USAGE_ERROR = 2
CONSTRAINT_ERROR = 1


class DecisionLogger:
    """Streams one CSV row per slot: set bitmask, pick, phi, powers, durations."""

    def __init__(self, path, n_users: int):
        self.fh = open(path, "w", newline="")
        self.n_users = n_users
        cols = (["slot", "rt_set_mask", "nrt_pick", "phi", "objective",
                 "sets_evaluated"]
                + [f"p_{u}" for u in range(n_users)]
                + [f"mu_{u}" for u in range(n_users)])
        self.writer = csv.writer(self.fh)
        self.writer.writerow(cols)

    def __call__(self, k: int, decision) -> None:
        mask = sum(1 << u for u in decision.rt_set)
        row = [k, mask,
               "" if decision.nrt_pick is None else decision.nrt_pick,
               f"{decision.phi:.6g}", f"{decision.objective:.6g}",
               decision.sets_evaluated]
        row += [f"{decision.powers.get(u, 0.0):.6g}" for u in range(self.n_users)]
        row += [f"{decision.durations.get(u, 0.0):.6g}" for u in range(self.n_users)]
        self.writer.writerow(row)

    def close(self) -> None:
        self.fh.close()


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    logger = None
    if args.decisions:
        logger = DecisionLogger(out / "decisions.csv", cfg.n_rt + cfg.n_nrt)
    try:
        report = run(cfg, on_decision=logger)
    finally:
        if logger:
            logger.close()
    with open(out / "report.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    with open(out / "trace.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(report.samples[0]))
        writer.writeheader()
        writer.writerows(report.samples)
    if args.figures and report.samples:
        reports.fig_run_trace(report.samples, out / "run_trace.png")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"sum throughput {report.sum_throughput:.4f} packets/slot, "
          f"avg power {report.summary['avg_power']:.4f}, "
          f"constraints {'ok' if report.all_ok else 'FAILED'}")
    if args.strict and not report.all_ok:
        return CONSTRAINT_ERROR
    return 0


def _sweep_cell(payload):
    fields, value, seed, scheduler, axis = payload
    from .config import SweepSpec  # local import keeps workers light

    spec = SweepSpec(base=SystemConfig(**fields), axis=axis, values=[value],
                     seeds=[seed], schedulers=[scheduler])
    cfg = spec.cell_config(value, seed, scheduler)
    report = run(cfg)
    delivery = report.summary["delivery_ratio"].values()
    return {
        "axis": axis, "value": value, "seed": seed, "scheduler": scheduler,
        "sum_throughput": report.sum_throughput,
        "avg_power": report.summary["avg_power"],
        "min_delivery_ratio": min(delivery, default=1.0),
        "mean_sets_evaluated": report.mean_sets_evaluated,
    }


def cmd_sweep(args) -> int:
    spec = load_sweep_spec(args.spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(spec.base.to_dict(), value, seed, sched, spec.axis)
             for value in spec.values
             for seed in spec.seeds
             for sched in spec.schedulers]
    rows: list = [None] * len(cells)
    csv_path = out / "sweep.csv"
    try:
        if args.jobs > 1:
            with cf.ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for i, row in zip(range(len(cells)), pool.map(_sweep_cell, cells)):
                    rows[i] = row
        else:
            for i, cell in enumerate(cells):
                rows[i] = _sweep_cell(cell)
    finally:
        done = [r for r in rows if r is not None]
        reports.write_sweep_csv(csv_path, done)  # partial results on interrupt
    if args.figures:
        if spec.axis == "n_rt_complexity":
            reports.fig_complexity(rows, out / f"sweep_{spec.axis}.png")
        else:
            reports.fig_sweep(rows, spec.axis, out / f"sweep_{spec.axis}.png")
    print(f"{len(rows)} sweep rows -> {csv_path}")
    return 0


def _load_region_query(path):
    with open(path) as fh:
        obj = json.load(fh)
    rays = obj.pop("rays", None)
    n = len(rays[0]) if rays else len(obj.get("lambda_nrt", [1.0]))
    if rays is None:
        if n == 1:
            rays = [[1.0]]
        else:
            rays = [[math.cos(a), math.sin(a)]
                    for a in np.linspace(0.0, math.pi / 2.0, 5)]
    obj.setdefault("lambda_nrt", [0.0] * n)
    return RegionQuery(**obj), [list(map(float, r)) for r in rays]


def cmd_region(args) -> int:
    query, rays = _load_region_query(args.query)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    n = len(rays[0])
    for ridx, ray in enumerate(rays):
        s_star = boundary_on_ray(query, ray, tol_rel=0.01)
        for frac in (0.25, 0.5, 0.75, 0.9):
            lam = [frac * s_star * d for d in ray]
            sub = RegionQuery(
                lambda_nrt=lam, lambda_rt=list(query.lambda_rt),
                q=list(query.q), packet_bits=query.packet_bits,
                slot_len=query.slot_len, p_avg=query.p_avg,
                p_max=query.p_max, states=list(query.states),
                probs=list(query.probs), power_levels=query.power_levels)
            verdict = "inside" if in_lambert_region(sub)[0] else "outside"
            rows.append(dict({"ray": ridx, "scale": frac * s_star,
                              "verdict": verdict, "margin": 1.0 - frac},
                             **{f"lambda_{i}": lam[i] for i in range(n)}))
        lam = [s_star * d for d in ray]
        rows.append(dict({"ray": ridx, "scale": s_star, "verdict": "boundary",
                          "margin": 0.0},
                         **{f"lambda_{i}": lam[i] for i in range(n)}))
    csv_path = out / "boundary.csv"
    reports.write_boundary_csv(csv_path, rows, n)
    if args.figures:
        reports.fig_region(rows, out / "region.png")
    print(f"{len(rays)} rays -> {csv_path}")
    return 0


def _random_view(state, n_rt_max: int, continuous: bool):
    from .schedulers import EligibleSlotView

    n_rt = int(state.integers(0 if not continuous else 1, n_rt_max + 1))
    n_nrt = int(state.integers(1, 7))
    if continuous:
        rt_gain = [max(float(v), 0.05) for v in state.exponential(1.0, n_rt)]
        nrt_gain = [max(float(v), 0.05) for v in state.exponential(1.0, n_nrt)]
    else:
        rt_gain = [1.0] * n_rt
        nrt_gain = [1.0] * n_nrt
    return EligibleSlotView(
        rt_users=list(range(n_rt)),
        rt_y=[float(v) for v in state.uniform(0.0, 30.0, n_rt)],
        rt_gain=rt_gain, rt_bits=[1.0] * n_rt,
        nrt_users=list(range(100, 100 + n_nrt)),
        nrt_q=[float(v) for v in state.uniform(0.0, 200.0, n_nrt)],
        nrt_gain=nrt_gain,
        nrt_arrival=[int(v) for v in state.integers(0, 2, n_nrt)],
        x_q=float(state.uniform(0.2, 40.0)), slot_len=1.0, p_max=20.0,
        b_max=100.0)


def cmd_selftest(args) -> int:
    from .kernels import lambert_w0, lambert_rt_power, rt_only_power
    from .schedulers import schedule_exhaustive, schedule_lambert_strict, schedule_onoff

    ok = True

    def check(name: str, cond: bool) -> None:
        nonlocal ok
        print(f"{'PASS' if cond else 'FAIL'}  {name}")
        ok = ok and cond

    zs = np.concatenate([np.linspace(-1.0 / math.e + 1e-9, 1.0, 2000),
                         np.geomspace(1.0, 1e6, 2000)])
    res = max(abs(lambert_w0(float(z)) * math.exp(lambert_w0(float(z))) - z)
              / max(1.0, abs(z)) for z in zs)
    check(f"W0 residual {res:.1e} <= 1e-10", res <= 1e-10)

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(2000):
        pt, g = rng.uniform(1.2, 60.0), rng.uniform(0.1, 4.0)
        p = lambert_rt_power(pt, g, 1e12)
        x = 1.0 + p * g
        worst = max(worst, abs(math.log(x) - 1.0 - (pt * g - 1.0) / x))
    check(f"stationarity residual {worst:.1e} <= 1e-8", worst <= 1e-8)

    bad = max(abs(n / math.log1p(rt_only_power(n, 1.0, 1.0)) - 1.0)
              for n in range(1, 11))
    check(f"slot-budget identity {bad:.1e} <= 1e-12", bad <= 1e-12)

    state = np.random.default_rng(1)
    tie = np.random.default_rng(2)
    agree = all(
        abs(schedule_onoff(v, tie).objective - schedule_exhaustive(v, tie).objective)
        <= 1e-9 * max(1.0, abs(schedule_exhaustive(v, tie).objective))
        for v in (_random_view(state, 8, continuous=False) for _ in range(100)))
    check("prefix scan == exhaustive on 100 on-off slots", agree)

    agree = all(
        abs(schedule_lambert_strict(v, tie).objective
            - schedule_exhaustive(v, tie).objective)
        <= 1e-6 * max(1.0, abs(schedule_exhaustive(v, tie).objective))
        for v in (_random_view(state, 6, continuous=True) for _ in range(50)))
    check("pruned search == exhaustive on 50 continuous slots", agree)

    report = run(SystemConfig(horizon=5000, seed=3))
    check("5k-slot run: zero budget/deadline violations",
          report.summary["budget_violations"] == 0
          and report.summary["deadline_violations"] == 0)
    return 0 if ok else CONSTRAINT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dlsched",
        description="Joint scheduling and power allocation simulator for "
                    "deadline and queue-stable downlink users")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--strict", action="store_true",
                       help="exit 1 when a constraint flag fails")
    p_run.add_argument("--decisions", action="store_true",
                       help="stream a per-slot decision log CSV")
    p_run.add_argument("--no-figures", dest="figures", action="store_false")

    p_sweep = sub.add_parser("sweep", help="run an experiment sweep")
    p_sweep.add_argument("--spec", required=True)
    p_sweep.add_argument("--out", default="out")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--no-figures", dest="figures", action="store_false")

    p_region = sub.add_parser("region", help="probe the rate-region boundary")
    p_region.add_argument("--query", required=True)
    p_region.add_argument("--out", default="out")
    p_region.add_argument("--no-figures", dest="figures", action="store_false")

    sub.add_parser("selftest", help="fast invariant checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "region": cmd_region,
                "selftest": cmd_selftest}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
