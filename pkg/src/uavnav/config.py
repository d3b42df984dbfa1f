"""Run configuration: flat key=value files, profiles, deterministic seeding.

Every simulation and learning parameter is a named key with the published
setup as its default. A config file only lists overrides; echoing a
resolved config writes every key so the echo reloads to an identical
RunConfig. A single master seed fans out to named RNG streams (buildings,
fading, starts, exploration, init, ...) through a labeled hash so the
stochastic subsystems can be varied independently.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    """Unknown key, malformed value or out-of-range setting."""


@dataclass
class RunConfig:
    # Identity and seeding
    profile: str = "paper"
    seed: int = 1          # learning-side master seed
    env_seed: int = 1      # environment-side master seed (buildings, eval starts)
    variant: str = "qier"  # qier | er | per

    # Airspace and geometry (meters)
    airspace_x: float = 1000.0
    airspace_y: float = 1000.0
    airspace_z: float = 100.0
    flight_altitude: float = 100.0
    bs_height: float = 25.0
    bs_positions: tuple = ((250.0, 250.0), (750.0, 250.0), (250.0, 750.0), (750.0, 750.0))
    base_azimuth: float = 30.0
    los_pitch: float = 5.0

    # ULA
    ula_elements: int = 8
    ula_spacing: float = 0.075
    carrier_ghz: float = 2.0
    theta_etilt: float = 100.0
    theta_3db: float = 65.0
    phi_3db: float = 65.0

    # Building field
    alpha_hat: float = 0.3
    beta_hat: float = 118.0
    gamma_hat: float = 25.0
    h_max: float = 70.0

    # Radio
    tx_power_dbm: float = 20.0
    noise_dbm: float = -90.0
    gamma_th_db: float = 0.0
    num_measurements: int = 1000
    m_los: float = 3.0
    m_nlos: float = 1.0

    # Decision process
    uav_speed: float = 30.0
    slot_seconds: float = 0.5
    tau: float = 50.0
    r_destination: float = 400.0
    r_boundary: float = -10000.0
    destination_x: float = 800.0
    destination_y: float = 800.0
    arrival_radius: float = 15.0
    step_cap: int = 400

    # Learning
    buffer_capacity: int = 20000
    minibatch: int = 128
    n_ms: int = 30
    gamma: float = 1.0
    epsilon_init: float = 0.5
    epsilon_decay: float = 0.998
    epsilon_floor: float = 0.01
    target_sync_episodes: int = 5
    episodes: int = 2000
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden_sizes: tuple = (512, 256, 128)
    net_dtype: str = "float32"

    # Proportional-PER baseline
    per_alpha: float = 1.0
    per_beta0: float = 0.4
    per_xi: float = 0.01

    # Evaluation and outputs
    n_eval_starts: int = 20
    eval_starts: tuple = ()
    ma_window: int = 200
    topmap_resolution: float = 50.0

    def validate(self) -> "RunConfig":
        if self.variant not in ("qier", "er", "per"):
            raise ConfigError(f"variant must be qier, er or per, got {self.variant!r}")
        if self.profile not in ("paper", "desk"):
            raise ConfigError(f"profile must be paper or desk, got {self.profile!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.epsilon_init <= 1.0:
            raise ConfigError(f"epsilon_init must lie in [0, 1], got {self.epsilon_init}")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigError("epsilon_decay must lie in (0, 1]")
        if not 0.0 < self.alpha_hat < 1.0:
            raise ConfigError("alpha_hat must lie in (0, 1)")
        if not 0.0 < self.per_beta0 <= 1.0:
            raise ConfigError("per_beta0 must lie in (0, 1]")
        if self.per_alpha < 0.0 or self.per_xi <= 0.0:
            raise ConfigError("per_alpha must be >= 0 and per_xi > 0")
        if self.net_dtype not in ("float32", "float64"):
            raise ConfigError("net_dtype must be float32 or float64")
        positive = (
            "airspace_x airspace_y airspace_z flight_altitude bs_height "
            "ula_spacing carrier_ghz theta_3db phi_3db beta_hat gamma_hat h_max "
            "num_measurements uav_speed slot_seconds arrival_radius step_cap "
            "buffer_capacity minibatch n_ms target_sync_episodes episodes "
            "learning_rate n_eval_starts ma_window topmap_resolution los_pitch"
        ).split()
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.m_los < 0.5 or self.m_nlos < 0.5:
            raise ConfigError("Nakagami shape factors must be >= 0.5")
        if self.arrival_radius < self.uav_speed * self.slot_seconds / 2:
            raise ConfigError("arrival_radius must cover at least half a step length")
        if not self.bs_positions:
            raise ConfigError("need at least one BS position")
        return self


DESK_OVERRIDES = dict(
    profile="desk",
    airspace_x=600.0,
    airspace_y=600.0,
    destination_x=480.0,
    destination_y=480.0,
    bs_positions=((150.0, 300.0), (450.0, 300.0)),
    num_measurements=200,
    buffer_capacity=4000,
    minibatch=64,
    episodes=600,
    n_ms=20,
    epsilon_decay=0.997,
    topmap_resolution=30.0,
)


def default_config(profile: str = "paper") -> RunConfig:
    if profile == "paper":
        return RunConfig().validate()
    if profile == "desk":
        return RunConfig(**DESK_OVERRIDES).validate()
    raise ConfigError(f"unknown profile {profile!r}")


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_pairs(text: str) -> tuple:
    """Parse 'x,y; x,y; ...' into a tuple of float pairs."""
    pairs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"expected 'x,y' pair, got {chunk!r}")
        pairs.append((float(parts[0]), float(parts[1])))
    return tuple(pairs)


def _parse_ints(text: str) -> tuple:
    return tuple(int(p.strip()) for p in text.split(",") if p.strip())


def _parse_value(name: str, raw: str):
    if name not in _FIELDS:
        raise ConfigError(f"unknown config key {name!r}")
    default = getattr(RunConfig(), name)
    try:
        if name in ("bs_positions", "eval_starts"):
            return _parse_pairs(raw)
        if name == "hidden_sizes":
            return _parse_ints(raw)
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad value for {name!r}: {raw!r}") from exc


def _format_value(name: str, value) -> str:
    if name in ("bs_positions", "eval_starts"):
        return "; ".join(f"{float(x)!r},{float(y)!r}" for x, y in value)
    if name == "hidden_sizes":
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_config(path, profile: str | None = None) -> RunConfig:
    """Load a flat key=value file on top of profile defaults.

    An empty file resolves to the full default setup. The file may itself
    set `profile`, in which case that profile's defaults are applied
    before the remaining overrides.
    """
    overrides = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = (part.strip() for part in line.split("=", 1))
            overrides[key] = _parse_value(key, raw)
    base_profile = profile or overrides.get("profile", "paper")
    cfg = dataclasses.replace(default_config(base_profile), **overrides)
    cfg.profile = base_profile
    return cfg.validate()


def echo_config(cfg: RunConfig, path) -> None:
    """Write every key of a resolved config; reloads to an identical RunConfig."""
    with open(path, "w") as f:
        for name in _FIELDS:
            f.write(f"{name} = {_format_value(name, getattr(cfg, name))}\n")


def config_fingerprint(cfg: RunConfig) -> str:
    lines = [f"{name}={_format_value(name, getattr(cfg, name))}" for name in _FIELDS]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def derive_seed(master: int, label: str, index: int | None = None) -> int:
    """Deterministic child seed for a named stochastic subsystem."""
    text = f"{master}|{label}" if index is None else f"{master}|{label}|{index}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def stream(master: int, label: str, index: int | None = None) -> np.random.Generator:
    """Named RNG stream derived from the master seed."""
    return np.random.default_rng(derive_seed(master, label, index))
