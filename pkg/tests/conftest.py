import math

import numpy as np

from dlsched.schedulers import EligibleSlotView


def random_onoff_view(rng, n_rt_max=10, n_nrt_max=10) -> EligibleSlotView:
    """Random slot state with unit gains, mixing regimes (empty NRT, X=0...)."""
    n_rt = int(rng.integers(0, n_rt_max + 1))
    n_nrt = int(rng.integers(0, n_nrt_max + 1))
    x = 0.0 if rng.random() < 0.1 else float(rng.uniform(0.2, 40.0))
    return EligibleSlotView(
        rt_users=list(range(n_rt)),
        rt_y=[float(v) for v in rng.uniform(0.0, 30.0, n_rt)],
        rt_gain=[1.0] * n_rt,
        rt_bits=[1.0] * n_rt,
        nrt_users=list(range(100, 100 + n_nrt)),
        nrt_q=[float(v) for v in rng.uniform(0.0, 200.0, n_nrt)],
        nrt_gain=[1.0] * n_nrt,
        nrt_arrival=[int(v) for v in rng.integers(0, 2, n_nrt)],
        x_q=x, slot_len=1.0, p_max=20.0, b_max=100.0)


def random_continuous_view(rng, n_rt, n_nrt_max=6) -> EligibleSlotView:
    """Random slot state with positive continuous gains."""
    n_nrt = int(rng.integers(1, n_nrt_max + 1))
    x = 0.0 if rng.random() < 0.05 else float(rng.uniform(0.2, 40.0))
    return EligibleSlotView(
        rt_users=list(range(n_rt)),
        rt_y=[float(v) for v in rng.uniform(0.0, 30.0, n_rt)],
        rt_gain=[max(float(v), 0.05) for v in rng.exponential(1.0, n_rt)],
        rt_bits=[1.0] * n_rt,
        nrt_users=list(range(100, 100 + n_nrt)),
        nrt_q=[float(v) for v in rng.uniform(0.0, 200.0, n_nrt)],
        nrt_gain=[max(float(v), 0.05) for v in rng.exponential(1.0, n_nrt)],
        nrt_arrival=[int(v) for v in rng.integers(0, 2, n_nrt)],
        x_q=x, slot_len=1.0, p_max=20.0, b_max=100.0)


def grid_psi_star(view, n_grid=20001) -> float:
    """Best buffered-user value by dense grid search (independent oracle)."""
    grid = np.linspace(0.0, view.p_max, n_grid)
    best = 0.0
    for q, g in zip(view.nrt_q, view.nrt_gain):
        if g <= 0.0 or q <= 0.0:
            continue
        vals = q * np.log1p(grid * g) - view.x_q * grid / view.slot_len
        best = max(best, float(vals.max()))
    return best


def grid_objective_oracle(view, n_grid=1501) -> float:
    """Brute-force the per-slot problem on power grids.

    Subsets of size <= 2 get full per-user grids; larger equal-gain
    subsets use a shared power level (symmetry). Returns the best
    objective found; exact optimizers must be >= this minus grid error.
    """
    from itertools import combinations

    psi = grid_psi_star(view)
    ts, x = view.slot_len, view.x_q
    grid = np.linspace(1e-6, view.p_max, n_grid)
    best = psi * ts  # empty set
    m = len(view.rt_users)
    for size in range(1, m + 1):
        for idxs in combinations(range(m), size):
            ys = sum(view.rt_y[i] for i in idxs)
            gains = [view.rt_gain[i] for i in idxs]
            bits = [view.rt_bits[i] for i in idxs]
            if size == 1:
                mus = bits[0] / np.log1p(grid * gains[0])
                ok = mus <= ts
                if not ok.any():
                    continue
                obj = (ys - x * grid[ok] * mus[ok] / ts
                       + psi * (ts - mus[ok]))
                best = max(best, float(obj.max()))
            elif size == 2:
                mu0 = bits[0] / np.log1p(grid * gains[0])
                mu1 = bits[1] / np.log1p(grid * gains[1])
                tot = mu0[:, None] + mu1[None, :]
                ok = tot <= ts
                if not ok.any():
                    continue
                cost = (x * grid * mu0)[:, None] + (x * grid * mu1)[None, :]
                obj = ys - cost / ts + psi * (ts - tot)
                best = max(best, float(obj[ok].max()))
            else:
                if len(set(gains)) != 1 or len(set(bits)) != 1:
                    continue
                mus = size * bits[0] / np.log1p(grid * gains[0])
                ok = mus <= ts
                if not ok.any():
                    continue
                obj = (ys - size * x * grid[ok] * (mus[ok] / size) / ts
                       + psi * (ts - mus[ok]))
                best = max(best, float(obj.max()))
    return best


def check_decision_sane(decision, view, budget_tol=1e-9):
    """Budget, deadline, clipping, and admission invariants of a decision."""
    ts = view.slot_len
    total = sum(decision.durations.values())
    assert total <= ts + budget_tol
    for u, p in decision.powers.items():
        assert -1e-12 <= p <= view.p_max + 1e-12
    for u, mu in decision.durations.items():
        assert -1e-12 <= mu <= ts + 1e-9
    for u in decision.rt_set:
        i = view.rt_users.index(u)
        sent = decision.durations[u] * math.log1p(
            decision.powers[u] * view.rt_gain[i])
        assert abs(sent - view.rt_bits[i]) <= 1e-9 * view.rt_bits[i]
    if decision.nrt_pick is not None:
        assert total >= ts - 1e-9  # full slot used when the pick is present
    for u, a in zip(view.nrt_users, view.nrt_arrival):
        assert decision.admissions.get(u, 0) <= a
