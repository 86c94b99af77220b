"""Joint scheduling and power allocation for a single-channel downlink
serving deadline-constrained and queue-stable users.

Library layout:
    kernels     closed-form power policies, Lambert W0, budget multiplier
    queues      data/virtual queue updates, admission, metrics
    traffic     seeded arrival and fading generators
    schedulers  per-slot decision makers and the exhaustive oracle
    engine      slot-loop simulator and run reports
    region      achievable-rate-region probe and stability stress test
    config      config-file loading
    reports     CSV and figure emission
    cli         command-line front end
"""

from .engine import ConfigError, RunReport, SystemConfig, gap_constant, run
from .kernels import (
    InfeasibleSetError,
    PhiSolution,
    PowerPolicyInput,
    lambert_rt_power,
    lambert_w0,
    psi_nr_star,
    rate,
    rt_duration,
    rt_only_power,
    single_rt_power,
    solve_phi,
    waterfilling_power,
)
from .region import RegionQuery, in_lambert_region, stress_stability
from .schedulers import SCHEDULERS, EligibleSlotView, SlotDecision

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EligibleSlotView",
    "InfeasibleSetError",
    "PhiSolution",
    "PowerPolicyInput",
    "RegionQuery",
    "RunReport",
    "SCHEDULERS",
    "SlotDecision",
    "SystemConfig",
    "gap_constant",
    "in_lambert_region",
    "lambert_rt_power",
    "lambert_w0",
    "psi_nr_star",
    "rate",
    "rt_duration",
    "rt_only_power",
    "run",
    "single_rt_power",
    "solve_phi",
    "stress_stability",
    "waterfilling_power",
]
