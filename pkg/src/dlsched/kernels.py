"""Closed-form power policies and the numerical kernels behind them.

Everything in here is a pure function of its arguments: the Lambert W
evaluation, the log-rate/duration formulas, the water-filling power rule
for buffered users, the W0-based power rule for deadline users, and the
bisection solver for the slot-budget multiplier phi.

Rates are in nats (natural log) throughout; mixing bases breaks the
exp()/W0 closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "BRANCH_POINT",
    "InfeasibleSetError",
    "PhiSolution",
    "PowerPolicyInput",
    "lambert_w0",
    "lambert_rt_power",
    "psi_nr_star",
    "rate",
    "rt_duration",
    "rt_only_power",
    "single_rt_power",
    "solve_phi",
    "waterfilling_power",
]

E = math.e
BRANCH_POINT = -1.0 / math.e

# Relative tolerance on the slot-budget residual |sum(mu) - Ts| in solve_phi.
PHI_TOL = 1e-9


class InfeasibleSetError(ValueError):
    """The RT set cannot be fit into the slot even at maximum power."""


def lambert_w0(z: float) -> float:
    """Principal branch W0 of the Lambert W function.

    Halley iteration from a piecewise initial guess (branch-point series
    for z near -1/e, log asymptote for large z). Converges to
    |w*exp(w) - z| <= 1e-12 * max(1, |z|) in a handful of steps.

    Parameters
    ----------
    z : float
        Argument, must be >= -1/e (a tolerance of 1e-12 below the branch
        point is forgiven and clamped).

    Returns
    -------
    float
        w >= -1 with w * exp(w) = z.
    """
    if z < BRANCH_POINT:
        if z < BRANCH_POINT - 1e-12:
            raise ValueError(f"lambert_w0 domain error: z={z!r} < -1/e")
        z = BRANCH_POINT
    if z == 0.0:
        return 0.0

    # Initial guess.
    if z < -0.25:
        # Series around the branch point in p = sqrt(2(e z + 1)).
        p = math.sqrt(2.0 * (E * z + 1.0))
        w = -1.0 + p - (p * p) / 3.0 + (11.0 / 72.0) * p ** 3
    elif z < E:
        # Pade-flavoured guess, fine anywhere near the origin.
        w = z / (1.0 + z * (1.0 + z / (2.0 + z)))
        if w <= -1.0:
            w = -0.99
    else:
        lz = math.log(z)
        w = lz - math.log(lz)

    tol = 1e-12 * max(1.0, abs(z))
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - z
        if abs(f) <= tol:
            return w
        wp1 = w + 1.0
        # Halley step.
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        w -= f / denom
        if w < -1.0:
            w = -1.0 + 1e-16
    if abs(w * math.exp(w) - z) <= 1e-9 * max(1.0, abs(z)):
        return w
    raise ArithmeticError(f"lambert_w0 failed to converge for z={z!r}")


def rate(power: float, gain: float) -> float:
    """Transmission rate ln(1 + power * gain), in nats per second."""
    if power < 0.0 or gain < 0.0:
        raise ValueError("rate: power and gain must be non-negative")
    return math.log1p(power * gain)


def rt_duration(packet_bits: float, rate_value: float) -> float:
    """Seconds needed to push one deadline packet through at `rate_value`."""
    if rate_value <= 0.0:
        raise ValueError("rt_duration: user is unschedulable at zero rate")
    return packet_bits / rate_value


@dataclass(frozen=True)
class PowerPolicyInput:
    """Arguments of the closed-form power policies.

    queue_weight  backlog driving the water-filling level (bits)
    power_price   virtual power-deficit queue value (the energy price)
    gain          channel power gain for this user and slot
    p_max         peak power limit
    slot_len      slot duration in seconds
    packet_bits   deadline packet size in bits
    """

    queue_weight: float
    power_price: float
    gain: float
    p_max: float
    slot_len: float
    packet_bits: float

    def __post_init__(self) -> None:
        for name in ("queue_weight", "power_price", "gain"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"PowerPolicyInput.{name} must be finite and >= 0")
        for name in ("p_max", "slot_len", "packet_bits"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0.0:
                raise ValueError(f"PowerPolicyInput.{name} must be finite and > 0")


def _wf_power(queue_weight: float, power_price: float, gain: float, p_max: float) -> float:
    """Scalar water-filling core shared with the slot loop."""
    if power_price == 0.0:
        # Zero energy price makes the level unbounded; peak power is the limit.
        return p_max
    p = queue_weight / power_price - 1.0 / gain
    if p <= 0.0:
        return 0.0
    return p if p < p_max else p_max


def waterfilling_power(inp: PowerPolicyInput) -> float:
    """Optimal power for a buffered (no-deadline) user.

    min((queue_weight/power_price - 1/gain)^+, p_max): the classic
    water-filling shape, non-decreasing in the gain. A zero power price
    is degenerate and returns p_max (the limit of the formula).
    """
    if inp.gain <= 0.0:
        raise ValueError("waterfilling_power: gain must be > 0")
    return _wf_power(inp.queue_weight, inp.power_price, inp.gain, inp.p_max)


def _psi_value(queue_weight: float, power_price: float, gain: float,
               p_max: float, slot_len: float) -> tuple[float, float]:
    """(psi, power) for one buffered user; scalar core of psi_nr_star."""
    if gain <= 0.0 or queue_weight <= 0.0:
        return 0.0, 0.0
    p = _wf_power(queue_weight, power_price, gain, p_max)
    if p == 0.0:
        return 0.0, 0.0
    return queue_weight * math.log1p(p * gain) - power_price * p / slot_len, p


def psi_nr_star(inp: PowerPolicyInput) -> float:
    """Per-second value of scheduling a buffered user at its optimal power.

    Evaluates queue_weight * rate(P*, gain) - power_price * P* / slot_len
    with P* from waterfilling_power. Zero gain or an empty queue yields 0
    (power 0 by convention).
    """
    psi, _ = _psi_value(inp.queue_weight, inp.power_price, inp.gain,
                        inp.p_max, inp.slot_len)
    return psi


def lambert_rt_power(phi_tilde: float, gain: float, p_max: float) -> float:
    """W0-based power for a deadline user given the price ratio `phi_tilde`.

    Returns min((1/gain) * [(a - 1)/W0((a - 1)/e) - 1], p_max) with
    a = phi_tilde * gain; the a -> 1 singularity is handled by its
    analytic limit (e - 1)/gain. Any unclipped output P satisfies the
    stationarity fixed point ln(1 + P*gain) = 1 + (a - 1)/(1 + P*gain).
    Decreasing in the gain: a better channel needs less power to push the
    same fixed-size packet.
    """
    if gain <= 0.0:
        raise ValueError("lambert_rt_power: gain must be > 0")
    a = phi_tilde * gain
    if a < -1e-9:
        raise ValueError("lambert_rt_power: phi_tilde * gain must be >= 0")
    if not math.isfinite(a):
        # Infinite price ratio (zero power price upstream): peak power.
        return p_max
    if abs(a - 1.0) <= 1e-12:
        p = (E - 1.0) / gain
    else:
        t = a - 1.0
        w = lambert_w0(t / E)
        if w == 0.0:
            p = (E - 1.0) / gain
        else:
            p = (t / w - 1.0) / gain
    if p <= 0.0:
        # Not worth scheduling; the caller excludes this user.
        return 0.0
    return p if p < p_max else p_max


def single_rt_power(packet_bits: float, slot_len: float, gain: float,
                    p_max: float) -> float:
    """Power for a deadline user that is the only scheduled user.

    The packet must fill the whole slot: min((e^{L/Ts} - 1)/gain, p_max).
    """
    if gain <= 0.0:
        raise ValueError("single_rt_power: gain must be > 0")
    p = math.expm1(packet_bits / slot_len) / gain
    return p if p < p_max else p_max


def rt_only_power(n_scheduled: int, packet_bits: float, slot_len: float) -> float:
    """Common power when n unit-gain deadline users split the whole slot.

    exp(n * L / Ts) - 1; the induced durations L / ln(1+P) then sum to
    exactly Ts.
    """
    if n_scheduled < 1:
        raise ValueError("rt_only_power: need at least one scheduled user")
    return math.expm1(n_scheduled * packet_bits / slot_len)


@dataclass
class PhiSolution:
    """Output of solve_phi: multiplier, per-user powers/durations, slack."""

    phi: float
    powers: dict
    durations: dict
    residual: float  # slot_len - sum of RT durations (time left for the buffered pick)


def _phi_tilde_from_power(p: float, gain: float) -> float:
    """Invert the stationarity fixed point: phi_tilde for an unclipped P."""
    x = 1.0 + p * gain
    return (1.0 + x * (math.log(x) - 1.0)) / gain


def solve_phi(gains: dict, power_price: float, psi_nr_star_val: float,
              slot_len: float, packet_bits, p_max: float) -> PhiSolution:
    """Fit a deadline-user set into the slot via the budget multiplier phi.

    If phi = 0 already leaves non-negative time for the buffered pick,
    complementary slackness fixes phi = 0. Otherwise phi is bisected on
    [0, phi_max] until the durations sum to the slot length within
    1e-9 relative; the duration sum is monotone decreasing in phi, so the
    bracket is valid. Equal-gain sets short-circuit to the closed form.

    Parameters
    ----------
    gains : dict
        user id -> channel gain (> 0) for the scheduled deadline users.
    power_price : float
        Current power-deficit queue value X(k).
    psi_nr_star_val : float
        Value density of the best buffered user (0 if none).
    packet_bits : float or dict
        Packet size, scalar or per-user.

    Raises
    ------
    InfeasibleSetError
        If the set does not fit even with every power at p_max.
    """
    if not gains:
        raise ValueError("solve_phi: empty deadline-user set")
    users = list(gains)
    gvec = [gains[u] for u in users]
    if min(gvec) <= 0.0:
        raise ValueError("solve_phi: all gains must be > 0")
    if isinstance(packet_bits, dict):
        bits = [packet_bits[u] for u in users]
    else:
        bits = [float(packet_bits)] * len(users)
    ts = slot_len
    x = power_price

    def solution(phi: float, powers: list) -> PhiSolution:
        durs = [b / math.log1p(p * g) for b, p, g in zip(bits, powers, gvec)]
        return PhiSolution(
            phi=phi,
            powers=dict(zip(users, powers)),
            durations=dict(zip(users, durs)),
            residual=ts - math.fsum(durs),
        )

    def powers_at(phi: float) -> list:
        pt = math.inf if x == 0.0 else (psi_nr_star_val + phi) * ts / x
        return [lambert_rt_power(pt, g, p_max) for g in gvec]

    def fit(powers: list) -> float:
        total = 0.0
        for b, p, g in zip(bits, powers, gvec):
            r = math.log1p(p * g)
            if r <= 0.0:
                return math.inf
            total += b / r
        return total

    # Ultimate feasibility: even peak power must fit.
    if fit([p_max] * len(users)) > ts * (1.0 + PHI_TOL):
        raise InfeasibleSetError(
            f"set of {len(users)} deadline users does not fit in the slot at p_max")

    p0 = powers_at(0.0)
    if fit(p0) <= ts:
        return solution(0.0, p0)

    # Equal gains force equal powers, so the budget equation closes.
    g0 = gvec[0]
    if all(g == g0 for g in gvec):
        lsum = math.fsum(bits)
        p_eq = math.expm1(lsum / ts) / g0
        if p_eq >= p_max:
            p_eq = p_max  # fits by the feasibility check above
            phi = 0.0
        else:
            phi = max(_phi_tilde_from_power(p_eq, g0) * x / ts - psi_nr_star_val, 0.0)
        return solution(phi, [p_eq] * len(users))

    lsum = math.fsum(bits)
    els = math.exp(lsum / ts)
    phi_hi = -psi_nr_star_val + els * lsum * x * p_max / (ts * (els - 1.0))
    phi_hi = max(phi_hi, x, 1.0)
    for _ in range(200):
        if fit(powers_at(phi_hi)) <= ts:
            break
        phi_hi *= 2.0
    else:
        raise InfeasibleSetError("could not bracket the budget multiplier")

    lo, hi = 0.0, phi_hi
    mid = hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = fit(powers_at(mid))
        if abs(f - ts) <= PHI_TOL * ts:
            return solution(mid, powers_at(mid))
        if f > ts:
            lo = mid
        else:
            hi = mid
    # Interval collapsed to rounding; the hi side is the feasible one.
    return solution(hi, powers_at(hi))
