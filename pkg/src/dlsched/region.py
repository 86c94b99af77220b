"""Desk-scale membership probe for the achievable arrival-rate region.

For discrete fading states the region membership question becomes: do
per-state time shares and powers exist that cover the buffered users'
arrival rates and the deadline users' delivery targets within the slot
and average-power budgets? The joint problem is nonconvex in (time,
power), so powers are gridded (log-spaced levels per user-state) and the
remaining problem in the time shares is an exact linear feasibility
solve. A feasible point is rounded to a single power per user-state
(time-weighted mean; concavity of the log-rate only helps), so a returned
certificate is genuine, while "outside" is only outside at this grid
resolution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .engine import SystemConfig, run

__all__ = [
    "RegionCertificate",
    "RegionQuery",
    "StabilityVerdict",
    "boundary_on_ray",
    "certificate_slacks",
    "in_lambert_region",
    "stress_stability",
]

JOINT_STATE_GUARD = 10_000
SLOPE_EPS = 1e-3  # bits per slot per packet-bit: stability slope threshold


@dataclass
class RegionQuery:
    """A rate vector plus the system it must be supportable in."""

    lambda_nrt: list
    lambda_rt: list = field(default_factory=list)
    q: list = field(default_factory=list)
    packet_bits: float = 1.0
    slot_len: float = 1.0
    p_avg: float = 10.0
    p_max: float = 20.0
    states: list = field(default_factory=lambda: [1.0])
    probs: list = field(default_factory=lambda: [1.0])
    power_levels: int = 64

    def __post_init__(self) -> None:
        if len(self.lambda_rt) != len(self.q):
            raise ValueError("lambda_rt and q must have matching lengths")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError("state probabilities must sum to 1")
        if len(self.states) != len(self.probs):
            raise ValueError("states and probs must have matching lengths")
        n = len(self.lambda_rt) + len(self.lambda_nrt)
        if len(self.states) ** n > JOINT_STATE_GUARD:
            raise ValueError(
                f"joint state space {len(self.states)}^{n} exceeds the "
                f"enumeration guard {JOINT_STATE_GUARD}")

    @property
    def n_rt(self) -> int:
        return len(self.lambda_rt)

    @property
    def n_users(self) -> int:
        return self.n_rt + len(self.lambda_nrt)

    def power_grid(self) -> np.ndarray:
        """Log-spaced power levels covering the {0, p_max} endpoints."""
        levels = np.geomspace(self.p_max * 1e-3, self.p_max,
                              self.power_levels - 1)
        return np.concatenate([[0.0], levels])

    def joint_states(self):
        """Yield (per-user gain tuple, probability) over the product space."""
        n = self.n_users
        for combo in itertools.product(range(len(self.states)), repeat=n):
            prob = 1.0
            for c in combo:
                prob *= self.probs[c]
            yield tuple(self.states[c] for c in combo), prob


@dataclass
class RegionCertificate:
    """Witness of membership: per-(user, joint state) time share and power."""

    time_share: dict   # (user, state index) -> seconds
    power: dict        # (user, state index) -> watts
    avg_power: float
    service: dict      # user -> bits per slot delivered on average


@dataclass
class StabilityVerdict:
    verdict: str              # "stable" | "unstable"
    max_slope: float          # bits per slot, worst buffered user
    slopes: dict
    report: object = None


def _demands(query: RegionQuery) -> list:
    """Required average service in bits/slot, deadline users first."""
    L = query.packet_bits
    return ([q * lam * L for q, lam in zip(query.q, query.lambda_rt)]
            + [lam * L for lam in query.lambda_nrt])


def in_lambert_region(query: RegionQuery):
    """Membership test. Returns (inside, certificate-or-None).

    Feasibility is solved exactly in the time shares for the gridded
    powers; service demands are treated as lower bounds (surplus service
    is discardable). "inside" therefore certifies membership, while
    "outside" means no certificate at this grid resolution.
    """
    states = list(query.joint_states())
    grid = query.power_grid()
    n_users = query.n_users
    n_states = len(states)
    n_p = len(grid)
    ts = query.slot_len
    demands = _demands(query)

    n_vars = n_users * n_states * n_p

    def var(i: int, m: int, p: int) -> int:
        return (i * n_states + m) * n_p + p

    # Per-(user,state,power) coefficients.
    rate = np.zeros(n_vars)
    energy = np.zeros(n_vars)  # contribution to average power
    for m, (gains, prob) in enumerate(states):
        for i in range(n_users):
            base = var(i, m, 0)
            rates = np.log1p(grid * gains[i])
            rate[base:base + n_p] = rates * prob
            energy[base:base + n_p] = grid * prob / ts

    a_ub, b_ub = [], []
    # Service demands (>= demand, flipped to <=).
    for i, demand in enumerate(demands):
        row = np.zeros(n_vars)
        base = var(i, 0, 0)
        row[base:base + n_states * n_p] = -rate[base:base + n_states * n_p]
        a_ub.append(row)
        b_ub.append(-demand)
    # Slot budget per state.
    for m in range(n_states):
        row = np.zeros(n_vars)
        for i in range(n_users):
            base = var(i, m, 0)
            row[base:base + n_p] = 1.0
        a_ub.append(row)
        b_ub.append(ts)
    # Average power budget.
    a_ub.append(energy)
    b_ub.append(query.p_avg)

    res = linprog(c=energy, A_ub=np.array(a_ub), b_ub=np.array(b_ub),
                  bounds=(0.0, ts), method="highs")
    if res.status != 0:
        return False, None

    mu = res.x
    time_share, power, service = {}, {}, {}
    for i in range(n_users):
        total_bits = 0.0
        for m, (gains, prob) in enumerate(states):
            base = var(i, m, 0)
            shares = mu[base:base + n_p]
            t = float(shares.sum())
            if t <= 1e-12:
                continue
            # Time-weighted mean power: same time and energy, at least as
            # much service by concavity of the log rate.
            p_bar = float(shares @ grid) / t
            time_share[(i, m)] = t
            power[(i, m)] = p_bar
            total_bits += t * math.log1p(p_bar * gains[i]) * prob
        service[i] = total_bits
    avg_power = sum(time_share[k] * power[k] * states[k[1]][1]
                    for k in time_share) / ts
    return True, RegionCertificate(time_share=time_share, power=power,
                                   avg_power=avg_power, service=service)


def certificate_slacks(query: RegionQuery, cert: RegionCertificate) -> dict:
    """Re-verify a certificate; every slack must be >= -1e-9."""
    states = list(query.joint_states())
    demands = _demands(query)
    slacks = {}
    for i, demand in enumerate(demands):
        got = sum(
            cert.time_share[(i, m)]
            * math.log1p(cert.power[(i, m)] * states[m][0][i]) * states[m][1]
            for m in range(len(states)) if (i, m) in cert.time_share)
        slacks[f"service_user{i}"] = got - demand
    for m in range(len(states)):
        used = sum(cert.time_share.get((i, m), 0.0)
                   for i in range(query.n_users))
        slacks[f"slot_state{m}"] = query.slot_len - used
    slacks["avg_power"] = query.p_avg - cert.avg_power
    for (i, m), p in cert.power.items():
        if p > query.p_max + 1e-9 or p < -1e-9:
            slacks[f"power_bound_{i}_{m}"] = min(query.p_max - p, p)
    return slacks


def boundary_on_ray(query: RegionQuery, direction, tol_rel: float = 0.01,
                    s_max: float = 1e4) -> float:
    """Scale of the inside/outside transition along `direction`.

    Bisects the membership test to `tol_rel` relative accuracy. The
    returned scale s* means s* * direction is the last certified-inside
    point on the ray at this grid resolution.
    """
    direction = np.asarray(direction, dtype=float)
    if (direction < 0.0).any() or not direction.any():
        raise ValueError("direction must be non-negative and non-zero")

    def inside(s: float) -> bool:
        q = RegionQuery(
            lambda_nrt=list(direction * s), lambda_rt=list(query.lambda_rt),
            q=list(query.q), packet_bits=query.packet_bits,
            slot_len=query.slot_len, p_avg=query.p_avg, p_max=query.p_max,
            states=list(query.states), probs=list(query.probs),
            power_levels=query.power_levels)
        return in_lambert_region(q)[0]

    lo = 0.0
    hi = 1.0
    while inside(hi):
        lo = hi
        hi *= 2.0
        if hi > s_max:
            raise ValueError("no boundary found below the scale cap")
    while hi - lo > tol_rel * max(hi, 1e-12):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return lo


def stress_stability(config: SystemConfig, horizon: int | None = None) -> StabilityVerdict:
    """Empirical stability check: admit everything and watch the queues.

    Runs the simulator with admission forced on and fits a least-squares
    slope to each buffered queue over the last half of the horizon;
    "stable" means the worst slope stays under 1e-3 bits per slot per
    packet-bit.
    """
    fields = config.to_dict()
    fields["admit_all"] = True
    fields["heavy_traffic"] = False
    if horizon is not None:
        fields["horizon"] = int(horizon)
    fields["sample_every"] = max(fields["horizon"] // 400, 1)
    cfg = SystemConfig(**fields)
    report = run(cfg)

    slots = np.asarray(report.sample_slots, dtype=float)
    half = slots >= slots[-1] / 2.0
    slopes = {}
    for user, traj in report.queue_samples.items():
        y = np.asarray(traj, dtype=float)[half]
        x = slots[half]
        slopes[user] = float(np.polyfit(x, y, 1)[0]) if len(x) > 2 else 0.0
    max_slope = max(slopes.values(), default=0.0)
    verdict = "stable" if max_slope <= SLOPE_EPS * cfg.packet_bits else "unstable"
    return StabilityVerdict(verdict=verdict, max_slope=max_slope,
                            slopes=slopes, report=report)
