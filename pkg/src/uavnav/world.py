"""Assembles the simulation environment from a run configuration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import config as cfgmod
from .antenna import UlaConfig
from .config import RunConfig
from .envgeo import Airspace, BuildingMap, SectorConfig, generate_buildings, sector_layout, vec3
from .radio import FadingModel, RadioParams


@dataclass
class World:
    """Immutable environment shared by the MDP, trainer and map tools."""

    airspace: Airspace
    buildings: BuildingMap
    sectors: list[SectorConfig]
    radio: RadioParams
    fading: FadingModel
    los_pitch: float


def build_world(cfg: RunConfig) -> World:
    airspace = Airspace(
        lo=vec3(0.0, 0.0, 0.0),
        up=vec3(cfg.airspace_x, cfg.airspace_y, cfg.airspace_z),
    )
    from .envgeo import ItuParams

    itu = ItuParams(
        alpha_hat=cfg.alpha_hat,
        beta_hat=cfg.beta_hat,
        gamma_hat=cfg.gamma_hat,
        h_max=cfg.h_max,
    )
    buildings = generate_buildings(
        itu, airspace, seed=cfgmod.derive_seed(cfg.env_seed, "buildings")
    )
    ula = UlaConfig(
        m_elements=cfg.ula_elements,
        d_v=cfg.ula_spacing,
        carrier_hz=cfg.carrier_ghz * 1e9,
        theta_etilt=cfg.theta_etilt,
        theta_3db=cfg.theta_3db,
        phi_3db=cfg.phi_3db,
    )
    bs_positions = [vec3(x, y, cfg.bs_height) for x, y in cfg.bs_positions]
    sectors = sector_layout(bs_positions, cfg.base_azimuth, ula)
    radio = RadioParams(
        tx_power_dbm=cfg.tx_power_dbm,
        noise_dbm=cfg.noise_dbm,
        gamma_th_db=cfg.gamma_th_db,
        num_measurements=cfg.num_measurements,
    )
    fading = FadingModel(m_los=cfg.m_los, m_nlos=cfg.m_nlos)
    return World(
        airspace=airspace,
        buildings=buildings,
        sectors=sectors,
        radio=radio,
        fading=fading,
        los_pitch=cfg.los_pitch,
    )


def eval_start_positions(cfg: RunConfig, world: World) -> list[np.ndarray]:
    """Held-out evaluation starts: explicit from config, else env-seed derived."""
    from .mdp import MdpConfig, sample_initial_state

    if cfg.eval_starts:
        return [vec3(x, y, cfg.flight_altitude) for x, y in cfg.eval_starts]
    mcfg = mdp_config(cfg)
    rng = cfgmod.stream(cfg.env_seed, "eval_starts")
    return [sample_initial_state(rng, mcfg, world) for _ in range(cfg.n_eval_starts)]


def mdp_config(cfg: RunConfig):
    from .mdp import MdpConfig

    return MdpConfig(
        v_u=cfg.uav_speed,
        dt=cfg.slot_seconds,
        tau=cfg.tau,
        r_destination=cfg.r_destination,
        r_boundary=cfg.r_boundary,
        destination=vec3(cfg.destination_x, cfg.destination_y, cfg.flight_altitude),
        arrival_radius=cfg.arrival_radius,
        step_cap=cfg.step_cap,
    )
