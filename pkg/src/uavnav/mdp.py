"""Episodic decision process: 8-direction moves, outage-weighted rewards.

States are UAV positions at a fixed flight altitude. A step moves the UAV
by one slot's travel distance along the chosen unit direction; leaving the
airspace or reaching the destination ends the episode with a special
reward, every other transition costs one movement penalty plus a weighted
outage-duration penalty measured at the arrival position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import radio
from .world import World

TERMINAL_NONE = "none"
TERMINAL_DESTINATION = "destination"
TERMINAL_BOUNDARY = "boundary"
TERMINAL_STEP_CAP = "step_cap"

ACTION_NAMES = (
    "right",
    "forward",
    "left",
    "backward",
    "right-forward",
    "left-forward",
    "right-backward",
    "left-backward",
)

_S2 = math.sqrt(2.0) / 2.0
_ACTION_VECTORS = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [_S2, _S2, 0.0],
        [-_S2, _S2, 0.0],
        [_S2, -_S2, 0.0],
        [-_S2, -_S2, 0.0],
    ]
)
_ACTION_VECTORS.setflags(write=False)


@dataclass(frozen=True)
class MdpConfig:
    """Mobility, reward shaping and termination settings."""

    v_u: float              # m/s
    dt: float               # slot duration, s
    tau: float              # outage weight
    r_destination: float
    r_boundary: float
    destination: np.ndarray
    arrival_radius: float   # meters
    step_cap: int

    def __post_init__(self):
        if self.v_u * self.dt <= 0:
            raise ValueError("step length must be positive")
        if self.arrival_radius < self.v_u * self.dt / 2:
            raise ValueError("arrival radius must cover at least half a step")

    @property
    def step_length(self) -> float:
        return self.v_u * self.dt


@dataclass(frozen=True)
class StepOutcome:
    """Result of one transition.

    `top` is the measured outage fraction folded into the reward; the
    same measurement feeds the episode's outage-duration bookkeeping, so
    the undiscounted return reconstructs the episode objective exactly.
    It is zero on terminal transitions, where the special reward replaces
    the shaped one and nothing is measured.
    """

    next_state: np.ndarray
    reward: float
    terminal: str
    top: float = 0.0


def action_vectors() -> np.ndarray:
    """The 8 unit flying directions, indexed per ACTION_NAMES."""
    return _ACTION_VECTORS


def step(
    state: np.ndarray,
    action: int,
    world: World,
    cfg: MdpConfig,
    rng: np.random.Generator,
) -> StepOutcome:
    """Deterministic move plus stochastic outage measurement at the new position."""
    nxt = state + cfg.step_length * _ACTION_VECTORS[action]
    if not world.airspace.contains(nxt):
        return StepOutcome(nxt, cfg.r_boundary, TERMINAL_BOUNDARY)
    if np.linalg.norm(nxt - cfg.destination) <= cfg.arrival_radius:
        return StepOutcome(nxt, cfg.r_destination, TERMINAL_DESTINATION)
    states = radio.link_states(nxt, world.sectors, world.buildings, los_pitch=world.los_pitch)
    assoc = radio.associate_sector(states)
    top = radio.top_estimate(states, assoc, world.radio, world.fading, rng)
    reward = -1.0 - cfg.tau * cfg.dt * top
    return StepOutcome(nxt, reward, TERMINAL_NONE, top=top)


def sample_initial_state(
    rng: np.random.Generator, cfg: MdpConfig, world: World
) -> np.ndarray:
    """Uniform start over the horizontal extent at flight altitude.

    Points within the arrival radius of the destination are rejected.
    """
    lo, up = world.airspace.lo, world.airspace.up
    z = float(cfg.destination[2])
    while True:
        x = rng.uniform(lo[0], up[0])
        y = rng.uniform(lo[1], up[1])
        pos = np.array([x, y, z])
        if np.linalg.norm(pos - cfg.destination) > cfg.arrival_radius:
            return pos


def episode_objective(steps: int, eod_hat: float, tau: float) -> float:
    """Weighted sum of time cost (slots) and estimated outage duration."""
    return steps + tau * eod_hat
