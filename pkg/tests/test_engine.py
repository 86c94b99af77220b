import math

import numpy as np
import pytest

from dlsched.engine import (
    ConfigError,
    SystemConfig,
    gap_constant,
    per_slot_objective,
    run,
)
from dlsched.schedulers import SlotDecision

from conftest import random_onoff_view


def small_cfg(**kw):
    base = dict(n_rt=3, n_nrt=3, lambda_rt=0.3, lambda_nrt=0.3, q=0.3,
                horizon=3000, seed=5, scheduler="onoff", sample_every=500)
    base.update(kw)
    return SystemConfig(**base)


class TestValidation:
    def test_q_out_of_range_names_field(self):
        with pytest.raises(ConfigError, match="q"):
            run(small_cfg(q=1.5))

    def test_bad_scheduler(self):
        with pytest.raises(ConfigError, match="scheduler"):
            run(small_cfg(scheduler="magic"))

    def test_onoff_needs_onoff_channel(self):
        with pytest.raises(ConfigError, match="on_off"):
            run(small_cfg(channel="rayleigh"))

    def test_pavg_above_pmax_warns(self):
        rep = run(small_cfg(p_avg=30.0, p_max=20.0, horizon=200))
        assert any("p_avg" in w for w in rep.warnings)

    def test_bad_rate(self):
        with pytest.raises(ConfigError, match="lambda_rt"):
            run(small_cfg(lambda_rt=-0.1))


class TestRunBasics:
    def test_deterministic(self):
        a = run(small_cfg())
        b = run(small_cfg())
        assert a.to_dict() == b.to_dict()

    def test_no_rt_arrivals_pure_nrt(self):
        # Without deadline arrivals every busy slot goes to one buffered user
        # at the water-filling power.
        cfg = small_cfg(lambda_rt=0.0, lambda_nrt=1.0, horizon=2000,
                        heavy_traffic=True)
        rep = run(cfg)
        assert all(v == 1.0 for v in rep.summary["delivery_ratio"].values())
        assert rep.sum_throughput > 0.0
        assert max(rep.summary["stability"]["y_over_k"].values()) == 0.0

    def test_power_budget_never_binds(self):
        # p_avg >= p_max keeps the power-deficit queue at zero.
        rep = run(small_cfg(p_avg=20.0, p_max=20.0, lambda_nrt=1.0,
                            horizon=2000))
        assert rep.summary["stability"]["x_over_k"] == 0.0
        assert rep.summary["degenerate_x_slots"] == rep.summary["slots"]

    def test_invariant_counters_zero(self):
        for sched in ("onoff", "fixedp"):
            rep = run(small_cfg(scheduler=sched, lambda_nrt=1.0))
            assert rep.summary["budget_violations"] == 0
            assert rep.summary["deadline_violations"] == 0

    def test_debug_objective_consistency(self):
        rep = run(small_cfg(debug_checks=True, horizon=1500))
        assert rep.summary["slots"] == 1500

    def test_continuous_schedulers_run(self):
        for sched in ("lambert_strict", "exhaustive", "hetero_heuristic"):
            cfg = small_cfg(scheduler=sched, channel="rayleigh", horizon=800)
            rep = run(cfg)
            assert rep.summary["budget_violations"] == 0
            assert rep.summary["deadline_violations"] == 0

    def test_admit_all_mode(self):
        cfg = small_cfg(admit_all=True, lambda_nrt=1.0, b_max=5.0,
                        horizon=2000)
        rep = run(cfg)
        # With admission forced on, every arrival is admitted.
        for u, v in rep.summary["admitted_avg"].items():
            assert v == pytest.approx(1.0, abs=0.05)

    def test_bounded_buffer_without_admit_all(self):
        cfg = small_cfg(lambda_nrt=1.0, b_max=5.0, horizon=2000,
                        sample_every=1)
        rep = run(cfg)
        for traj in rep.queue_samples.values():
            assert max(traj) <= 5.0 + cfg.packet_bits

    def test_common_random_numbers_across_schedulers(self):
        # Scheduler randomness lives on separate streams, so runs differing
        # only in the scheduler face identical arrival processes.
        a = run(small_cfg(scheduler="onoff", lambda_nrt=1.0))
        b = run(small_cfg(scheduler="fixedp", lambda_nrt=1.0))
        assert a.summary["rt_arrivals"] == b.summary["rt_arrivals"]

    def test_heterogeneous_packets_run(self):
        cfg = small_cfg(scheduler="hetero_heuristic", channel="rayleigh",
                        packet_model="heterogeneous",
                        packet_choices=[0.5, 1.0, 2.0], horizon=1500)
        rep = run(cfg)
        assert rep.summary["budget_violations"] == 0
        assert rep.summary["deadline_violations"] == 0

    def test_homogeneous_packets_onoff(self):
        cfg = small_cfg(packet_model="homogeneous",
                        packet_choices=[1.0, 2.0], horizon=1500)
        rep = run(cfg)
        assert rep.summary["deadline_violations"] == 0


class TestHeavyTraffic:
    def test_throughput_counts_service(self):
        cfg = small_cfg(heavy_traffic=True, lambda_nrt=1.0, horizon=2000)
        rep = run(cfg)
        assert rep.sum_throughput > 0.5
        # No real admissions happen in this mode.
        assert all(v == 0.0 for v in rep.summary["admitted_avg"].values())


class TestGapConstant:
    def test_empty_system(self):
        cfg = SystemConfig(n_rt=0, n_nrt=0, lambda_rt=[], lambda_nrt=[], q=[])
        assert gap_constant(cfg) == pytest.approx((400.0 + 100.0) / 2.0)

    def test_reference_parameters(self):
        cfg = SystemConfig(n_rt=10, n_nrt=10, q=0.3, p_max=20.0, p_avg=10.0,
                           packet_bits=1.0, slot_len=1.0)
        expected = (10 * 1.09 + 400 + 100 + 10 * (1 + math.log(21) ** 2)) / 2
        assert gap_constant(cfg) == pytest.approx(expected, rel=1e-12)
        assert gap_constant(cfg) == pytest.approx(306.7955843690069, rel=1e-10)

    def test_doubling_bmax_halves_bound(self):
        a = run(small_cfg(b_max=100.0, horizon=10)).gap_bound
        b = run(small_cfg(b_max=200.0, horizon=10)).gap_bound
        assert a == pytest.approx(2.0 * b)

    def test_continuous_uses_gamma_max(self):
        on = gap_constant(SystemConfig(channel="on_off"))
        ray = gap_constant(SystemConfig(channel="rayleigh", gamma_max=50.0,
                                        scheduler="lambert_strict"))
        assert ray > on


class TestPerSlotObjective:
    def test_idle_slot(self):
        view = random_onoff_view(np.random.default_rng(0))
        assert per_slot_objective(SlotDecision(), view) == 0.0

    def test_pure_nrt_slot(self):
        from dlsched.schedulers import EligibleSlotView

        view = EligibleSlotView(nrt_users=[100], nrt_q=[15.0], nrt_gain=[1.0],
                                nrt_arrival=[1], x_q=1.0)
        decision = SlotDecision(nrt_pick=100, durations={100: 1.0},
                                powers={100: 14.0})
        assert per_slot_objective(decision, view) == pytest.approx(
            26.62075301653315, rel=1e-12)

    def test_rt_only_slot(self):
        from dlsched.schedulers import EligibleSlotView

        view = EligibleSlotView(rt_users=[0, 1], rt_y=[8.0, 7.0],
                                rt_gain=[1.0, 1.0], rt_bits=[1.0, 1.0], x_q=1.0)
        p = math.exp(2.0) - 1.0
        decision = SlotDecision(rt_set=(0, 1), durations={0: 0.5, 1: 0.5},
                                powers={0: p, 1: p})
        assert per_slot_objective(decision, view) == pytest.approx(
            15.0 - p, rel=1e-12)
