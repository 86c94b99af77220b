"""Queue evolution, admission control, and running-average metrics.

The data queues hold bits for the buffered users; the two virtual queues
track constraint debt (per-user QoS deficit and the shared power deficit).
All updates project at zero, so every queue stays non-negative.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

__all__ = [
    "MetricsTrace",
    "QueueState",
    "admit",
    "stability_statistic",
    "update_data_queue",
    "update_virtual_x",
    "update_virtual_y",
]


def update_data_queue(q: float, admitted_bits: float, served: float) -> float:
    """Data-queue recursion (q + admitted - served)^+, all in bits."""
    v = q + admitted_bits - served
    return v if v > 0.0 else 0.0


def update_virtual_y(y: float, arrival: int, q_target: float,
                     served_indicator: int) -> float:
    """QoS-deficit recursion (y + arrival * q_target - served)^+."""
    v = y + arrival * q_target - served_indicator
    return v if v > 0.0 else 0.0


def update_virtual_x(x: float, slot_energy: float, slot_len: float,
                     p_avg: float) -> float:
    """Power-deficit recursion (x + slot_energy/Ts - p_avg)^+."""
    v = x + slot_energy / slot_len - p_avg
    return v if v > 0.0 else 0.0


def admit(q: float, arrival: int, b_max: float) -> int:
    """Admission rule: take the arrival only while the queue is below b_max."""
    if b_max <= 0.0:
        raise ValueError("admit: b_max must be > 0")
    return arrival if q < b_max else 0


def stability_statistic(trace) -> float:
    """Final queue value over the horizon length: the mean-rate-stability proxy."""
    n = len(trace)
    if n < 1:
        raise ValueError("stability_statistic: empty trace")
    return trace[-1] / n


@dataclass
class QueueState:
    """Queues at the start of a slot: data (bits), QoS deficits, power deficit."""

    data_q: dict = field(default_factory=dict)
    y_q: dict = field(default_factory=dict)
    x_q: float = 0.0

    def check_nonnegative(self) -> None:
        assert all(v >= 0.0 for v in self.data_q.values())
        assert all(v >= 0.0 for v in self.y_q.values())
        assert self.x_q >= 0.0


TRACE_COLUMNS = [
    "slot", "x_queue", "y_max", "q_max", "avg_power", "sum_throughput",
    "min_delivery_ratio", "objective_mean", "sets_evaluated_mean",
]


class MetricsTrace:
    """Running averages accumulated slot by slot.

    Tracks per-user admitted and served rates, delivery ratios for the
    deadline users, average power, the per-slot objective, evaluated-set
    counts, and sampled queue trajectories. Slots before `burn_in` are
    excluded from the averages (default 0: raw long-run means).
    """

    def __init__(self, rt_users, nrt_users, slot_len: float, burn_in: int = 0,
                 sample_every: int = 1000):
        self.rt_users = list(rt_users)
        self.nrt_users = list(nrt_users)
        self.slot_len = slot_len
        self.burn_in = burn_in
        self.sample_every = max(int(sample_every), 1)
        self.slots = 0
        self.counted = 0  # slots past burn-in
        self.admitted = {u: 0.0 for u in self.nrt_users}
        self.served_pkts = {u: 0.0 for u in self.nrt_users}
        self.rt_arrivals = {u: 0 for u in self.rt_users}
        self.rt_delivered = {u: 0 for u in self.rt_users}
        self.energy = 0.0
        self.objective = 0.0
        self.sets_evaluated = 0.0
        self.budget_violations = 0
        self.deadline_violations = 0
        self.degenerate_x_slots = 0
        self.fallthrough_slots = 0
        self.samples: list[dict] = []
        self.queue_samples: dict = {u: [] for u in self.nrt_users}
        self.sample_slots: list[int] = []

    def record_slot(self, k: int, admitted: dict, served_pkts: dict,
                    rt_arrived, rt_served, slot_energy: float,
                    objective: float, sets_evaluated: int) -> None:
        self.slots += 1
        if k < self.burn_in:
            return
        self.counted += 1
        for u, r in admitted.items():
            if r:
                self.admitted[u] += r
        for u, s in served_pkts.items():
            self.served_pkts[u] += s
        for u in rt_arrived:
            self.rt_arrivals[u] += 1
        for u in rt_served:
            self.rt_delivered[u] += 1
        self.energy += slot_energy
        self.objective += objective
        self.sets_evaluated += sets_evaluated

    def sample(self, k: int, state: QueueState) -> None:
        self.sample_slots.append(k)
        for u in self.nrt_users:
            self.queue_samples[u].append(state.data_q.get(u, 0.0))
        n = max(self.counted, 1)
        self.samples.append({
            "slot": k,
            "x_queue": state.x_q,
            "y_max": max(state.y_q.values(), default=0.0),
            "q_max": max(state.data_q.values(), default=0.0),
            "avg_power": self.energy / (n * self.slot_len),
            "sum_throughput": sum(self.served_pkts.values()) / n,
            "min_delivery_ratio": min(self.delivery_ratios().values(), default=1.0),
            "objective_mean": self.objective / n,
            "sets_evaluated_mean": self.sets_evaluated / n,
        })

    def delivery_ratios(self) -> dict:
        out = {}
        for u in self.rt_users:
            a = self.rt_arrivals[u]
            out[u] = self.rt_delivered[u] / a if a > 0 else 1.0
        return out

    def summary(self, state: QueueState) -> dict:
        n = max(self.counted, 1)
        k = max(self.slots, 1)
        qs = self.queue_samples
        return {
            "slots": self.slots,
            "admitted_avg": {u: self.admitted[u] / n for u in self.nrt_users},
            "served_rate": {u: self.served_pkts[u] / n for u in self.nrt_users},
            "sum_throughput": sum(self.served_pkts.values()) / n,
            "delivery_ratio": self.delivery_ratios(),
            "rt_arrivals": dict(self.rt_arrivals),
            "avg_power": self.energy / (n * self.slot_len),
            "objective_mean": self.objective / n,
            "sets_evaluated_mean": self.sets_evaluated / n,
            "stability": {
                "x_over_k": state.x_q / k,
                "y_over_k": {u: state.y_q.get(u, 0.0) / k for u in self.rt_users},
                "q_time_avg": {
                    u: (sum(qs[u]) / len(qs[u]) if qs[u] else 0.0)
                    for u in self.nrt_users
                },
            },
            "budget_violations": self.budget_violations,
            "deadline_violations": self.deadline_violations,
            "degenerate_x_slots": self.degenerate_x_slots,
            "fallthrough_slots": self.fallthrough_slots,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS)
            writer.writeheader()
            for row in self.samples:
                writer.writerow(row)

    def write_summary_json(self, path, state: QueueState) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(state), fh, indent=2, default=str)
