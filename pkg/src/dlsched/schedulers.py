"""Per-slot decision makers.

Five schedulers share one decision contract: the prefix scanner for on-off
channels, the pruned subset search and the full exhaustive search for
continuous fading, the fixed-power coin-flip baseline, and the sorted
prefix heuristic for heterogeneous packet lengths. All of them receive an
eligibility-filtered view of the slot and return a SlotDecision; none of
them mutates shared state, so independent runs can evaluate them in
parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

from .kernels import (
    InfeasibleSetError,
    lambert_rt_power,
    rt_only_power,
    solve_phi,
    _psi_value,
)

__all__ = [
    "EligibleSlotView",
    "SlotDecision",
    "SCHEDULERS",
    "admissions_for",
    "candidate_prefixes",
    "heterogeneous_order",
    "schedule_exhaustive",
    "schedule_fixedp",
    "schedule_hetero",
    "schedule_lambert_strict",
    "schedule_onoff",
    "select_nrt",
    "surviving_sets",
]

EXHAUSTIVE_GUARD = 20  # refuse 2^m searches beyond this many eligible users


@dataclass
class EligibleSlotView:
    """What a scheduler may look at for one slot.

    Deadline (RT) users appear only if they have an arrival and a non-zero
    gain; those are eliminated from the slot up front. Buffered (NRT)
    users are all present (admission control needs them), but only the
    ones with positive gain are schedulable.
    """

    rt_users: list = field(default_factory=list)   # eligible RT ids
    rt_y: list = field(default_factory=list)
    rt_gain: list = field(default_factory=list)
    rt_bits: list = field(default_factory=list)
    nrt_users: list = field(default_factory=list)  # all NRT ids
    nrt_q: list = field(default_factory=list)
    nrt_gain: list = field(default_factory=list)
    nrt_arrival: list = field(default_factory=list)
    x_q: float = 0.0
    slot_len: float = 1.0
    p_max: float = 20.0
    b_max: float = 1e4


@dataclass
class SlotDecision:
    """Scheduler output for one slot."""

    rt_set: tuple = ()
    nrt_pick: int | None = None
    durations: dict = field(default_factory=dict)
    powers: dict = field(default_factory=dict)
    admissions: dict = field(default_factory=dict)
    phi: float = 0.0
    objective: float = 0.0
    sets_evaluated: int = 0
    fallthrough: bool = False


def admissions_for(view: EligibleSlotView) -> dict:
    """Admission vector: take each arrival while its queue is below b_max."""
    b = view.b_max
    return {
        u: (a if q < b else 0)
        for u, q, a in zip(view.nrt_users, view.nrt_q, view.nrt_arrival)
    }


def select_nrt(view: EligibleSlotView, rng) -> tuple:
    """Best buffered user by value density, ties broken uniformly at random.

    Returns (user or None, power, value density); (None, 0, 0) when no
    user has positive value.
    """
    best = 0.0
    best_users: list = []
    x, pmax, ts = view.x_q, view.p_max, view.slot_len
    for u, q, g in zip(view.nrt_users, view.nrt_q, view.nrt_gain):
        psi, p = _psi_value(q, x, g, pmax, ts)
        if psi > best:
            best = psi
            best_users = [(u, p)]
        elif psi == best and psi > 0.0:
            best_users.append((u, p))
    if not best_users:
        return None, 0.0, 0.0
    pick, power = best_users[rng.integers(len(best_users))] if len(best_users) > 1 \
        else best_users[0]
    return pick, power, best


def candidate_prefixes(user_ids, y_values) -> list:
    """Nested prefix sets of the deficit-descending order, including the
    empty set. Ties keep the smaller user id first (stable, documented)."""
    order = sorted(range(len(user_ids)), key=lambda i: (-y_values[i], user_ids[i]))
    prefixes = [()]
    for n in range(1, len(order) + 1):
        prefixes.append(tuple(user_ids[i] for i in order[:n]))
    return prefixes


def _better(obj, members, best_obj, best_members) -> bool:
    """Strictly larger objective wins; ties prefer fewer users, then lex order."""
    if obj > best_obj:
        return True
    if obj == best_obj and best_members is not None:
        return (len(members), members) < (len(best_members), best_members)
    return False


def schedule_onoff(view: EligibleSlotView, rng) -> SlotDecision:
    """Prefix scan for on-off channels.

    Sorts eligible deadline users by deficit and evaluates each nested
    prefix: the W0-based power while the buffered remainder stays
    non-negative, otherwise the slot-filling closed form. At most
    N_R + 1 sets are touched.
    """
    if any(g != 1.0 for g in view.rt_gain):
        raise ValueError("on-off scheduler requires unit gains")
    pick, pick_power, psi_star = select_nrt(view, rng)
    ts, x, pmax = view.slot_len, view.x_q, view.p_max

    order = sorted(range(len(view.rt_users)),
                   key=lambda i: (-view.rt_y[i], view.rt_users[i]))
    bits = view.rt_bits[0] if view.rt_bits else 1.0

    # One shared power for every prefix that leaves room for the pick.
    if x > 0.0:
        p_lam = lambert_rt_power(psi_star * ts / x, 1.0, pmax)
    else:
        p_lam = pmax
    mu_lam = bits / math.log1p(p_lam) if p_lam > 0.0 else math.inf

    best_obj = psi_star * ts  # empty prefix: whole slot to the pick
    best_n, best_power, best_mu, best_phi = 0, 0.0, 0.0, 0.0
    evaluated = 1
    cum_y = 0.0
    for n in range(1, len(order) + 1):
        cum_y += view.rt_y[order[n - 1]]
        evaluated += 1
        total_mu = n * mu_lam
        if total_mu <= ts:
            obj = cum_y - n * x * p_lam * mu_lam / ts + psi_star * (ts - total_mu)
            power, mu, phi = p_lam, mu_lam, 0.0
        else:
            p_n = rt_only_power(n, bits, ts)
            if p_n > pmax:
                break  # even peak power cannot fit this or any larger prefix
            obj = cum_y - x * p_n
            power, mu = p_n, ts / n
            phi = 0.0 if x == 0.0 else _onoff_phi(p_n, x, ts, psi_star)
        if obj > best_obj:
            best_obj, best_n, best_power, best_mu, best_phi = obj, n, power, mu, phi

    members = tuple(sorted(view.rt_users[i] for i in order[:best_n]))
    durations = {u: best_mu for u in members}
    powers = {u: best_power for u in members}
    leftover = ts - best_n * best_mu
    decision = SlotDecision(
        rt_set=members, nrt_pick=None, durations=durations, powers=powers,
        admissions=admissions_for(view), phi=best_phi, objective=best_obj,
        sets_evaluated=evaluated)
    if pick is not None and leftover > 1e-12:
        decision.nrt_pick = pick
        decision.durations[pick] = leftover
        decision.powers[pick] = pick_power
    return decision


def _onoff_phi(p: float, x: float, ts: float, psi_star: float) -> float:
    """Budget multiplier implied by the slot-filling power (diagnostic)."""
    xx = 1.0 + p
    return max((1.0 + xx * (math.log(xx) - 1.0)) * x / ts - psi_star, 0.0)


def _evaluate_rt_set(members, view: EligibleSlotView, psi_star: float):
    """Objective of one deadline-user set via the budget-multiplier solve.

    Returns (objective, powers, durations, phi, leftover); infeasible sets
    come back with -inf.
    """
    ts, x = view.slot_len, view.x_q
    if not members:
        return psi_star * ts, {}, {}, 0.0, ts
    idx = {u: i for i, u in enumerate(view.rt_users)}
    gains = {u: view.rt_gain[idx[u]] for u in members}
    bits = {u: view.rt_bits[idx[u]] for u in members}
    try:
        sol = solve_phi(gains, x, psi_star, ts, bits, view.p_max)
    except InfeasibleSetError:
        return -math.inf, {}, {}, 0.0, 0.0
    obj = 0.0
    for u in members:
        obj += view.rt_y[idx[u]] - x * sol.powers[u] * sol.durations[u] / ts
    leftover = max(sol.residual, 0.0)
    obj += psi_star * leftover
    return obj, sol.powers, sol.durations, sol.phi, leftover


def surviving_sets(y_values, gains):
    """Yield every subset not excluded by the dominance swap argument.

    A set is skipped when some excluded user weakly dominates an included
    one (deficit >= and gain >=, not both equal; exact ties resolved by
    index): swapping the pair can only raise the objective, so such sets
    never need evaluating. Users are walked in deficit-descending order;
    within an equal-deficit group only gain-descending prefixes survive,
    and across groups the largest excluded gain so far bars lower-gain
    inclusions. The empty set always survives.
    """
    m = len(y_values)
    order = sorted(range(m), key=lambda i: (-y_values[i], i))
    groups: list[list[int]] = []
    for i in order:
        if groups and y_values[groups[-1][0]] == y_values[i]:
            groups[-1].append(i)
        else:
            groups.append([i])
    # Within a group, includable members form a prefix of this order.
    for grp in groups:
        grp.sort(key=lambda i: (-gains[i], i))

    def rec(gi: int, gmax: float, chosen: tuple):
        if gi == len(groups):
            yield tuple(sorted(chosen))
            return
        grp = groups[gi]
        # Cross-group bar: an excluded user with strictly higher deficit
        # dominates any inclusion whose gain does not strictly exceed it.
        max_take = 0
        for i in grp:
            if gains[i] > gmax:  # eligible gains are > 0 = the initial bar
                max_take += 1
            else:
                break
        for take in range(max_take + 1):
            excl = grp[take:]
            new_gmax = max(gmax, gains[excl[0]]) if excl else gmax
            yield from rec(gi + 1, new_gmax, chosen + tuple(grp[:take]))

    yield from rec(0, 0.0, ())


def _search_decision(view: EligibleSlotView, rng, index_sets,
                     preselected=None) -> SlotDecision:
    """Shared subset-search driver for the continuous-fading schedulers."""
    if preselected is None:
        pick, pick_power, psi_star = select_nrt(view, rng)
    else:
        pick, pick_power, psi_star = preselected
    best_obj = -math.inf
    best = None
    evaluated = 0
    for idxs in index_sets:
        members = tuple(sorted(view.rt_users[i] for i in idxs))
        obj, powers, durations, phi, leftover = _evaluate_rt_set(
            members, view, psi_star)
        evaluated += 1
        if best is None or _better(obj, members, best_obj, best[0]):
            best_obj = obj
            best = (members, powers, durations, phi, leftover)
    members, powers, durations, phi, leftover = best
    decision = SlotDecision(
        rt_set=members, nrt_pick=None, durations=dict(durations),
        powers=dict(powers), admissions=admissions_for(view), phi=phi,
        objective=best_obj, sets_evaluated=evaluated)
    if pick is not None and leftover > 1e-12:
        decision.nrt_pick = pick
        decision.durations[pick] = leftover
        decision.powers[pick] = pick_power
    return decision


def _phi0_cost(psi_star: float, x: float, ts: float, gain: float,
               bits: float, p_max: float):
    """(cost, power, duration) of one deadline user at a slack slot.

    Minimizes (x*P/ts + psi_star) * bits / ln(1+P*gain) over P in
    (0, p_max]: the W0 stationary point, or the peak-power endpoint. With
    psi_star = 0 the infimum sits at P -> 0 and is returned with zero
    power and infinite duration (attained only via the budget solve).
    """
    pt = math.inf if x == 0.0 else psi_star * ts / x
    p = lambert_rt_power(pt, gain, p_max)
    if p <= 0.0:
        return x * bits / (gain * ts), 0.0, math.inf
    mu = bits / math.log1p(p * gain)
    return (x * p / ts + psi_star) * mu, p, mu


def schedule_lambert_strict(view: EligibleSlotView, rng) -> SlotDecision:
    """Subset search over continuous gains with sound pruning.

    Search-space reductions, each of which provably never discards every
    optimal set (swap/drop arguments mirror the on-off candidate logic):

    1. zero-deficit users are dropped (scheduling them cannot help);
    2. users whose best-case standalone value Y - min_P cost(P) is not
       positive are dropped (removing them never lowers the objective);
    3. if the remaining greedy set fits the slot at phi = 0 it is exactly
       optimal (per-user costs decouple), so it is evaluated alone;
    4. otherwise its subsets are enumerated, skipping any set where an
       excluded user weakly dominates an included one in (deficit, gain).

    sets_evaluated counts the solved sets including the empty baseline.
    """
    m = len(view.rt_users)
    keep = []
    mu0_total = 0.0
    pick, pick_power, psi_star = select_nrt(view, rng)
    ts, x = view.slot_len, view.x_q
    for i in range(m):
        y = view.rt_y[i]
        if y <= 0.0:
            continue
        cost, _, mu = _phi0_cost(psi_star, x, ts, view.rt_gain[i],
                                 view.rt_bits[i], view.p_max)
        if y > cost:
            keep.append(i)
            mu0_total += mu
    decision = None
    if keep and mu0_total <= ts:
        # Greedy set is optimal: compare it against the empty baseline only.
        sets = [(), tuple(keep)]
    elif keep:
        ys = [view.rt_y[i] for i in keep]
        gs = [view.rt_gain[i] for i in keep]
        sets = (tuple(keep[i] for i in s) for s in surviving_sets(ys, gs))
    else:
        sets = [()]
    return _search_decision(view, rng, sets,
                            preselected=(pick, pick_power, psi_star))


def schedule_exhaustive(view: EligibleSlotView, rng) -> SlotDecision:
    """Full 2^m subset scan; the correctness oracle for the others."""
    m = len(view.rt_users)
    if m > EXHAUSTIVE_GUARD:
        raise ValueError(f"exhaustive search refused for {m} > "
                         f"{EXHAUSTIVE_GUARD} eligible deadline users")
    all_sets = (idxs for n in range(m + 1)
                for idxs in combinations(range(m), n))
    return _search_decision(view, rng, all_sets)


def heterogeneous_order(user_ids, y_values, gains, bits) -> list:
    """Deadline users sorted by decreasing deficit * gain / packet length.

    Equal scores keep the smaller user id first.
    """
    scored = sorted(
        range(len(user_ids)),
        key=lambda i: (-(y_values[i] * gains[i] / bits[i]), user_ids[i]))
    return [user_ids[i] for i in scored]


def schedule_hetero(view: EligibleSlotView, rng) -> SlotDecision:
    """Linear-complexity prefix heuristic for per-user packet lengths."""
    order = heterogeneous_order(view.rt_users, view.rt_y, view.rt_gain,
                                view.rt_bits)
    pos = {u: i for i, u in enumerate(view.rt_users)}
    prefixes = [tuple(pos[u] for u in order[:n]) for n in range(len(order) + 1)]
    return _search_decision(view, rng, prefixes)


def schedule_fixedp(view: EligibleSlotView, rng, rt_bias: float) -> SlotDecision:
    """Peak-power baseline with a biased coin between the user classes.

    Transmits only while the power-deficit queue is empty, which throttles
    the long-run average power to the budget. The coin picks the deadline
    side with probability `rt_bias`; deadline users are packed by deficit
    at p_max until the slot ends, otherwise the whole slot goes to the
    longest buffered queue at p_max. An empty branch falls through to the
    other one.
    """
    decision = SlotDecision(admissions=admissions_for(view), sets_evaluated=1)
    ts, pmax = view.slot_len, view.p_max
    if view.x_q > 0.0:
        return decision  # over budget: stay idle this slot

    want_rt = rng.random() < rt_bias

    def rt_branch() -> bool:
        order = sorted(range(len(view.rt_users)),
                       key=lambda i: (-view.rt_y[i], view.rt_users[i]))
        t = 0.0
        for i in order:
            mu = view.rt_bits[i] / math.log1p(pmax * view.rt_gain[i])
            if t + mu > ts + 1e-12:
                break
            u = view.rt_users[i]
            decision.durations[u] = mu
            decision.powers[u] = pmax
            t += mu
        if not decision.durations:
            return False
        decision.rt_set = tuple(sorted(decision.durations))
        return True

    def nrt_branch() -> bool:
        best_q = 0.0
        ties: list = []
        for u, q, g in zip(view.nrt_users, view.nrt_q, view.nrt_gain):
            if g <= 0.0 or q <= 0.0:
                continue
            if q > best_q:
                best_q, ties = q, [u]
            elif q == best_q:
                ties.append(u)
        if not ties:
            return False
        pick = ties[rng.integers(len(ties))] if len(ties) > 1 else ties[0]
        decision.nrt_pick = pick
        decision.durations[pick] = ts
        decision.powers[pick] = pmax
        return True

    first, second = (rt_branch, nrt_branch) if want_rt else (nrt_branch, rt_branch)
    if not first():
        decision.fallthrough = True
        second()
    decision.objective = _decision_objective(view, decision)
    return decision


def _decision_objective(view: EligibleSlotView, decision: SlotDecision) -> float:
    """Value of an arbitrary decision under the per-slot objective."""
    ts, x = view.slot_len, view.x_q
    obj = 0.0
    idx = {u: i for i, u in enumerate(view.rt_users)}
    for u in decision.rt_set:
        obj += view.rt_y[idx[u]] - x * decision.powers[u] * decision.durations[u] / ts
    if decision.nrt_pick is not None:
        u = decision.nrt_pick
        i = view.nrt_users.index(u)
        p, mu = decision.powers[u], decision.durations[u]
        psi = view.nrt_q[i] * math.log1p(p * view.nrt_gain[i]) - x * p / ts
        obj += psi * mu
    return obj


SCHEDULERS = {
    "onoff": schedule_onoff,
    "lambert_strict": schedule_lambert_strict,
    "exhaustive": schedule_exhaustive,
    "hetero_heuristic": schedule_hetero,
    # "fixedp" needs the coin bias; the engine wraps it.
}
