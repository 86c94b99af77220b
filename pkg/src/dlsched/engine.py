"""Slot-loop orchestration: generators -> scheduler -> queues -> metrics.

A run is strictly sequential (slot k+1 depends on slot k) and fully
deterministic given the config seed. Sweeps parallelize across configs
and seeds instead.
"""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field

from .queues import (
    MetricsTrace,
    QueueState,
    update_data_queue,
    update_virtual_x,
    update_virtual_y,
)
from .schedulers import (
    SCHEDULERS,
    EligibleSlotView,
    SlotDecision,
    _decision_objective,
    schedule_exhaustive,
    schedule_fixedp,
)
from .traffic import ChannelModel, TrafficModel, UserStreams, scalar_stream

__all__ = [
    "ConfigError",
    "RunReport",
    "SystemConfig",
    "gap_constant",
    "per_slot_objective",
    "run",
]

SCHEDULER_NAMES = ("onoff", "lambert_strict", "exhaustive", "fixedp",
                   "hetero_heuristic")
BUDGET_TOL = 1e-9  # absolute slack allowed on the slot-duration sum
_BLOCK = 16384     # slots drawn per generator block
_NRT_STREAM_OFFSET = 1_000_000  # keeps NRT streams fixed when n_rt changes


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


@dataclass
class SystemConfig:
    """Full parameterization of one simulation run."""

    n_rt: int = 10
    n_nrt: int = 10
    lambda_rt: object = 0.1          # scalar or per-user list
    lambda_nrt: object = 1.0
    q: object = 0.3                  # delivery-ratio target(s)
    packet_bits: float = 1.0
    packet_model: str = "fixed"
    packet_choices: list = field(default_factory=list)
    slot_len: float = 1.0
    p_avg: float = 10.0
    p_max: float = 20.0
    b_max: float = 1e4
    channel: str = "on_off"
    p_on: float = 1.0
    mean_gain: float = 1.0
    gamma_max: float = 50.0
    states: list = field(default_factory=list)
    probs: list = field(default_factory=list)
    scheduler: str = "onoff"
    horizon: int = 200_000
    seed: int = 1
    burn_in: int = 0
    heavy_traffic: bool = False
    admit_all: bool = False
    sample_every: int = 1000
    fixedp_bias: object = None       # defaults to the common q target
    debug_checks: bool = False

    def _per_user(self, value, n: int, name: str) -> list:
        if isinstance(value, (list, tuple)):
            if len(value) != n:
                raise ConfigError(f"{name}: expected {n} entries, got {len(value)}")
            return [float(v) for v in value]
        return [float(value)] * n

    def rt_rates(self) -> list:
        return self._per_user(self.lambda_rt, self.n_rt, "lambda_rt")

    def nrt_rates(self) -> list:
        return self._per_user(self.lambda_nrt, self.n_nrt, "lambda_nrt")

    def q_targets(self) -> list:
        return self._per_user(self.q, self.n_rt, "q")

    def channel_model(self) -> ChannelModel:
        return ChannelModel(kind=self.channel, p_on=self.p_on,
                            mean_gain=self.mean_gain, gamma_max=self.gamma_max,
                            states=list(self.states), probs=list(self.probs))

    def validate(self) -> list:
        """Raise ConfigError on invalid fields; return non-fatal warnings."""
        warnings = []
        if self.n_rt < 0 or self.n_nrt < 0:
            raise ConfigError("n_rt/n_nrt must be non-negative")
        if self.horizon < 1:
            raise ConfigError("horizon: must be >= 1")
        if self.slot_len <= 0:
            raise ConfigError("slot_len: must be > 0")
        if self.p_max <= 0:
            raise ConfigError("p_max: must be > 0")
        if self.p_avg < 0:
            raise ConfigError("p_avg: must be >= 0")
        if self.b_max <= 0:
            raise ConfigError("b_max: must be > 0")
        if self.packet_bits <= 0:
            raise ConfigError("packet_bits: must be > 0")
        for name, vals in (("lambda_rt", self.rt_rates()),
                           ("lambda_nrt", self.nrt_rates())):
            if any(v < 0.0 or v > 1.0 for v in vals):
                raise ConfigError(f"{name}: rates must be in [0, 1]")
        if any(v < 0.0 or v > 1.0 for v in self.q_targets()):
            raise ConfigError("q: delivery targets must be in [0, 1]")
        if self.scheduler not in SCHEDULER_NAMES:
            raise ConfigError(f"scheduler: unknown name {self.scheduler!r}")
        self.channel_model()  # validates channel fields
        if self.scheduler == "onoff":
            if self.channel != "on_off":
                raise ConfigError("scheduler 'onoff' requires the on_off channel")
            if self.packet_model == "heterogeneous":
                raise ConfigError("scheduler 'onoff' needs per-slot-equal packets")
        if self.scheduler == "exhaustive" and self.n_rt > 20:
            raise ConfigError("exhaustive scheduler refuses n_rt > 20")
        if self.p_avg > self.p_max:
            warnings.append("p_avg > p_max: the average-power constraint "
                            "can never bind")
        if self.burn_in >= self.horizon:
            warnings.append("burn_in >= horizon: averages will cover zero slots")
        return warnings

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunReport:
    """Outcome of one run: averages, constraint flags, diagnostics."""

    config: dict
    summary: dict
    sum_throughput: float
    power_ok: bool
    qos_ok: bool
    stability_ok: bool
    all_ok: bool
    gap_bound: float
    mean_sets_evaluated: float
    warnings: list
    samples: list
    sample_slots: list
    queue_samples: dict

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items()
               if k not in ("queue_samples", "sample_slots")}
        return out


def gap_constant(config: SystemConfig) -> float:
    """Drift-bound constant used for the reported optimality-gap diagnostic.

    [sum_RT(q_i^2 + 1) + p_max^2 + p_avg^2 + N_NR (L^2 + Ts^2 Rmax^2)] / 2
    with Rmax = ln(1 + p_max) for on-off channels and
    ln(1 + p_max * gamma_max) otherwise.
    """
    if config.channel == "on_off":
        rmax = math.log1p(config.p_max)
    else:
        rmax = math.log1p(config.p_max * config.gamma_max)
    q_part = sum(qi * qi + 1.0 for qi in config.q_targets())
    l2 = config.packet_bits ** 2
    return (q_part + config.p_max ** 2 + config.p_avg ** 2
            + config.n_nrt * (l2 + (config.slot_len * rmax) ** 2)) / 2.0


def per_slot_objective(decision: SlotDecision, view: EligibleSlotView) -> float:
    """Value of a decision under the per-slot drift objective."""
    return _decision_objective(view, decision)


def _scheduler_fn(config: SystemConfig):
    if config.scheduler == "fixedp":
        bias = config.fixedp_bias
        if bias is None:
            qs = config.q_targets()
            bias = qs[0] if qs else 0.0
            if any(v != bias for v in qs):
                raise ConfigError("fixedp needs a homogeneous q target or an "
                                  "explicit fixedp_bias")
        return functools.partial(schedule_fixedp, rt_bias=float(bias))
    return SCHEDULERS[config.scheduler]


def run(config: SystemConfig, on_decision=None) -> RunReport:
    """Execute the slot loop for `config.horizon` slots.

    `on_decision(k, decision)` is called once per slot when given (used by
    the CLI to stream decision logs); it must not mutate the decision.
    """
    warnings = config.validate()
    n_rt, n_nrt = config.n_rt, config.n_nrt
    ts, pmax, pavg, bmax = (config.slot_len, config.p_max, config.p_avg,
                            config.b_max)
    heavy = config.heavy_traffic
    rt_ids = list(range(n_rt))
    nrt_ids = list(range(n_rt, n_rt + n_nrt))
    q_targets = config.q_targets()
    channel = config.channel_model()
    rt_traffic = TrafficModel(rates=config.rt_rates(),
                              packet_bits=config.packet_bits,
                              packet_model=config.packet_model,
                              length_choices=list(config.packet_choices))
    nrt_rates = config.nrt_rates()
    random_packets = config.packet_model != "fixed"

    rt_streams = UserStreams(config.seed, n_rt)
    nrt_streams = UserStreams(config.seed, n_nrt, user_offset=_NRT_STREAM_OFFSET)
    tie_rng = scalar_stream(config.seed, "ties")
    coin_rng = scalar_stream(config.seed, "coin")
    sched = _scheduler_fn(config)
    rng = coin_rng if config.scheduler == "fixedp" else tie_rng

    state = QueueState(data_q={u: 0.0 for u in nrt_ids},
                       y_q={u: 0.0 for u in rt_ids}, x_q=0.0)
    metrics = MetricsTrace(rt_ids, nrt_ids, ts, burn_in=config.burn_in,
                           sample_every=config.sample_every)
    qs = [0.0] * n_nrt
    ys = [0.0] * n_rt
    x = 0.0
    peg = [float(bmax)] * n_nrt  # virtual backlog in heavy-traffic mode
    admit_cap = math.inf if config.admit_all else bmax
    lbits = config.packet_bits
    horizon = config.horizon
    k = 0

    while k < horizon:
        nb = min(_BLOCK, horizon - k)
        a_rt = rt_streams.arrival_block(rt_traffic.rates, nb)
        g_rt = rt_streams.gain_block(channel, nb)
        a_nrt = nrt_streams.arrival_block(nrt_rates, nb)
        g_nrt = nrt_streams.gain_block(channel, nb)
        b_rt = rt_streams.packet_block(rt_traffic, nb) if random_packets else None

        for t in range(nb):
            art = a_rt[t].tolist()
            grt = g_rt[t].tolist()
            anrt = a_nrt[t].tolist()
            gnrt = g_nrt[t].tolist()
            brt = b_rt[t].tolist() if random_packets else None

            rt_users, rt_y, rt_gain, rt_bits = [], [], [], []
            for i in range(n_rt):
                if art[i] and grt[i] > 0.0:
                    rt_users.append(i)
                    rt_y.append(ys[i])
                    rt_gain.append(grt[i])
                    rt_bits.append(brt[i] if random_packets else lbits)

            view = EligibleSlotView(
                rt_users=rt_users, rt_y=rt_y, rt_gain=rt_gain, rt_bits=rt_bits,
                nrt_users=nrt_ids,
                nrt_q=peg if heavy else qs,
                nrt_gain=gnrt,
                nrt_arrival=[0] * n_nrt if heavy else anrt,
                x_q=x, slot_len=ts, p_max=pmax, b_max=admit_cap)
            decision = sched(view, rng)

            total_mu = 0.0
            energy = 0.0
            for u, mu in decision.durations.items():
                total_mu += mu
                energy += decision.powers[u] * mu
            if total_mu > ts + BUDGET_TOL:
                metrics.budget_violations += 1
            for u in decision.rt_set:
                i = rt_users.index(u)
                sent = decision.durations[u] * math.log1p(
                    decision.powers[u] * rt_gain[i])
                if abs(sent - rt_bits[i]) > 1e-9 * rt_bits[i]:
                    metrics.deadline_violations += 1
            if x == 0.0:
                metrics.degenerate_x_slots += 1
            if decision.fallthrough:
                metrics.fallthrough_slots += 1

            served_pkts = {}
            pick = decision.nrt_pick
            if pick is not None:
                j = pick - n_rt
                mu = decision.durations[pick]
                served_bits = mu * math.log1p(decision.powers[pick] * gnrt[j])
                served_pkts[pick] = served_bits / (lbits * ts)
            else:
                served_bits = 0.0

            if config.debug_checks:
                recomputed = per_slot_objective(decision, view)
                assert abs(recomputed - decision.objective) <= \
                    1e-6 * (1.0 + abs(decision.objective)), \
                    f"objective bookkeeping drifted at slot {k + t}"

            if not heavy:
                for j, u in enumerate(nrt_ids):
                    r = decision.admissions.get(u, 0)
                    served = served_bits if u == pick else 0.0
                    if r or served:
                        qs[j] = update_data_queue(qs[j], lbits * r, served)
            for i in range(n_rt):
                if art[i] or ys[i]:
                    ys[i] = update_virtual_y(ys[i], art[i], q_targets[i],
                                             1 if i in decision.rt_set else 0)
            x = update_virtual_x(x, energy, ts, pavg)
            if x != x:
                raise ArithmeticError(f"numeric fault (NaN) at slot {k + t}")

            if on_decision is not None:
                on_decision(k + t, decision)
            metrics.record_slot(
                k + t, decision.admissions, served_pkts,
                [i for i in range(n_rt) if art[i]], decision.rt_set,
                energy, decision.objective, decision.sets_evaluated)
            if (k + t + 1) % metrics.sample_every == 0 or k + t + 1 == horizon:
                state.data_q = dict(zip(nrt_ids, qs))
                state.y_q = dict(zip(rt_ids, ys))
                state.x_q = x
                metrics.sample(k + t, state)
        k += nb

    state.data_q = dict(zip(nrt_ids, qs))
    state.y_q = dict(zip(rt_ids, ys))
    state.x_q = x
    summary = metrics.summary(state)
    stability = summary["stability"]
    power_ok = summary["avg_power"] <= pavg * 1.02 + 1e-12
    delivery = summary["delivery_ratio"]
    qos_ok = all(delivery[u] >= q_targets[i] - 0.02
                 for i, u in enumerate(rt_ids))
    stability_ok = (stability["x_over_k"] <= 1e-3
                    and all(v <= 1e-3 for v in stability["y_over_k"].values()))
    gap = gap_constant(config) / (config.packet_bits * config.b_max)
    return RunReport(
        config=config.to_dict(), summary=summary,
        sum_throughput=summary["sum_throughput"],
        power_ok=power_ok, qos_ok=qos_ok, stability_ok=stability_ok,
        all_ok=power_ok and qos_ok and stability_ok
        and metrics.budget_violations == 0 and metrics.deadline_violations == 0,
        gap_bound=gap, mean_sets_evaluated=summary["sets_evaluated_mean"],
        warnings=warnings, samples=metrics.samples,
        sample_slots=metrics.sample_slots,
        queue_samples=metrics.queue_samples)


def onoff_matches_exhaustive(view: EligibleSlotView, rng, rel: float = 1e-9) -> bool:
    """Debug helper: prefix-scan objective equals the full subset scan."""
    a = SCHEDULERS["onoff"](view, rng)
    b = schedule_exhaustive(view, rng)
    scale = max(abs(a.objective), abs(b.objective), 1.0)
    return abs(a.objective - b.objective) <= rel * scale
