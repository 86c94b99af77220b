"""Seeded arrival and channel-gain generators.

Randomness is counter-based (Philox) and split into one stream per user
and purpose, keyed by (purpose, user index) under the run seed. Adding
users therefore never perturbs the draws of existing users, which is what
makes common-random-number sweeps across user counts meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChannelModel",
    "TrafficModel",
    "UserStreams",
    "draw_arrivals",
    "draw_gains",
    "scalar_stream",
]

# Purpose indices for the (purpose, user) spawn keys.
_ARRIVALS = 0
_GAINS = 1
_PACKETS = 2
_SCHED_TIES = 3
_COIN = 4


@dataclass
class ChannelModel:
    """Per-slot i.i.d. fading model shared by all users.

    kind      "on_off": Bernoulli(p_on) gains in {0, 1}
              "rayleigh": exponential power gain, mean `mean_gain`,
                          truncated at `gamma_max`
              "discrete": finite state set `states` with probabilities `probs`
    """

    kind: str = "on_off"
    p_on: float = 1.0
    mean_gain: float = 1.0
    gamma_max: float = 50.0
    states: list = field(default_factory=list)
    probs: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.kind not in ("on_off", "rayleigh", "discrete"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind == "on_off" and not 0.0 <= self.p_on <= 1.0:
            raise ValueError("p_on must be in [0, 1]")
        if self.kind == "rayleigh":
            if self.mean_gain <= 0.0 or self.gamma_max <= 0.0:
                raise ValueError("rayleigh needs mean_gain > 0 and finite gamma_max > 0")
        if self.kind == "discrete":
            if not self.states or len(self.states) != len(self.probs):
                raise ValueError("discrete model needs matching states and probs")
            if abs(sum(self.probs) - 1.0) > 1e-9:
                raise ValueError("discrete probabilities must sum to 1")
            if any(s < 0.0 or s > self.gamma_max for s in self.states):
                raise ValueError("discrete states must lie in [0, gamma_max]")


@dataclass
class TrafficModel:
    """Bernoulli packet arrivals plus the packet-length model.

    rates          per-user arrival probabilities, each in [0, 1]
    packet_bits    nominal packet size L
    packet_model   "fixed" | "homogeneous" (one random length shared by all
                   users each slot) | "heterogeneous" (independent per user)
    length_choices lengths drawn uniformly for the random models
    """

    rates: list
    packet_bits: float = 1.0
    packet_model: str = "fixed"
    length_choices: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if any(r < 0.0 or r > 1.0 for r in self.rates):
            raise ValueError("arrival rates must be Bernoulli probabilities in [0, 1]")
        if self.packet_bits <= 0.0:
            raise ValueError("packet_bits must be > 0")
        if self.packet_model not in ("fixed", "homogeneous", "heterogeneous"):
            raise ValueError(f"unknown packet model {self.packet_model!r}")
        if self.packet_model != "fixed" and not self.length_choices:
            raise ValueError("random packet models need length_choices")
        if any(c <= 0.0 for c in self.length_choices):
            raise ValueError("length_choices must be positive")


def _gen(seed: int, purpose: int, user: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(purpose, user))
    return np.random.Generator(np.random.Philox(seq))


def scalar_stream(seed: int, purpose: str) -> np.random.Generator:
    """Single shared stream (scheduler tie-breaks, baseline coin flips)."""
    idx = {"ties": _SCHED_TIES, "coin": _COIN}[purpose]
    return _gen(seed, idx, 0)


class UserStreams:
    """Per-user generators for arrivals, gains, and packet lengths.

    `user_offset` shifts the stream keys so that disjoint user groups
    (e.g. deadline vs buffered users) never share streams even when the
    group sizes change between runs.
    """

    def __init__(self, seed: int, n_users: int, user_offset: int = 0):
        self.n_users = n_users
        users = [user_offset + u for u in range(n_users)]
        self.arrraw = [_gen(seed, _ARRIVALS, u) for u in users]
        self.gainraw = [_gen(seed, _GAINS, u) for u in users]
        self.pktraw = [_gen(seed, _PACKETS, u) for u in users]

    def arrival_block(self, rates, n_slots: int) -> np.ndarray:
        """(n_slots, n_users) 0/1 arrivals, independent across users."""
        cols = [
            (g.random(n_slots) < lam).astype(np.uint8)
            for g, lam in zip(self.arrraw, rates)
        ]
        return np.column_stack(cols) if cols else np.zeros((n_slots, 0), np.uint8)

    def gain_block(self, model: ChannelModel, n_slots: int) -> np.ndarray:
        """(n_slots, n_users) gains drawn i.i.d. per the channel model."""
        cols = []
        for g in self.gainraw:
            if model.kind == "on_off":
                cols.append((g.random(n_slots) < model.p_on).astype(np.float64))
            elif model.kind == "rayleigh":
                draws = g.exponential(model.mean_gain, n_slots)
                cols.append(np.minimum(draws, model.gamma_max))
            else:
                states = np.asarray(model.states, dtype=np.float64)
                cols.append(states[g.choice(len(states), size=n_slots,
                                            p=model.probs)])
        return np.column_stack(cols) if cols else np.zeros((n_slots, 0))

    def packet_block(self, traffic: TrafficModel, n_slots: int) -> np.ndarray:
        """(n_slots, n_users) packet lengths per the packet model."""
        n = self.n_users
        if traffic.packet_model == "fixed":
            return np.full((n_slots, n), traffic.packet_bits)
        choices = np.asarray(traffic.length_choices, dtype=np.float64)
        if traffic.packet_model == "homogeneous":
            # All users share user 0's draw each slot.
            shared = choices[self.pktraw[0].integers(0, len(choices), n_slots)]
            return np.tile(shared[:, None], (1, n))
        cols = [choices[g.integers(0, len(choices), n_slots)] for g in self.pktraw]
        return np.column_stack(cols)


def draw_arrivals(streams: UserStreams, traffic: TrafficModel) -> np.ndarray:
    """One slot of Bernoulli arrivals, one entry per user."""
    return streams.arrival_block(traffic.rates, 1)[0]


def draw_gains(streams: UserStreams, model: ChannelModel) -> np.ndarray:
    """One slot of channel gains, one entry per user."""
    return streams.gain_block(model, 1)[0]
