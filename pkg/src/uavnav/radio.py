"""Ground-to-air radio: pathloss, fading, SINR, outage statistics, TOP maps.

Pathloss follows the urban-macro dB model with the LoS/NLoS branch picked
by a geometric blockage test against the building field. Small-scale
fading is block Nakagami-m: power gains are Gamma(m, 1/m) with unit mean,
redrawn independently per measurement and per sector. All SINR arithmetic
happens in the linear domain; the transmission outage probability (TOP)
at a position is the fraction of L fading draws whose SINR falls below
the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import antenna, envgeo
from .antenna import gain_db as _gain_db
from .envgeo import Airspace, BuildingMap, SectorConfig


@dataclass(frozen=True)
class FadingModel:
    """Nakagami shape factors for the LoS and NLoS branches."""

    m_los: float
    m_nlos: float

    def __post_init__(self):
        if self.m_los < 0.5 or self.m_nlos < 0.5:
            raise ValueError("Nakagami shape factors must be >= 0.5")


@dataclass(frozen=True)
class RadioParams:
    """Per-sector transmit power, noise floor, outage threshold, sample count."""

    tx_power_dbm: float
    noise_dbm: float
    gamma_th_db: float
    num_measurements: int

    def __post_init__(self):
        if self.num_measurements < 1:
            raise ValueError("need at least one signal measurement")

    @property
    def noise_mw(self) -> float:
        return 10.0 ** (self.noise_dbm / 10.0)

    @property
    def gamma_th_linear(self) -> float:
        return 10.0 ** (self.gamma_th_db / 10.0)


@dataclass(frozen=True)
class LinkState:
    """Static link quantities between one sector and a UAV position."""

    sector_id: int
    gain_db: float
    pathloss_db: float
    los: bool
    distance: float


@dataclass
class TopMap:
    """Gridded TOP preview at a fixed altitude."""

    resolution: float
    altitude: float
    values: np.ndarray  # shape (ny, nx), row 0 at the low-y edge
    seed: int
    num_measurements: int


def pathloss_db(d: float, z_u: float, f_c_ghz: float, los: bool) -> float:
    """Urban-macro ground-to-air pathloss in dB; f_c in GHz, d and z_u in meters."""
    if d <= 0:
        raise ValueError("distance must be positive")
    if los:
        return 28.0 + 22.0 * math.log10(d) + 20.0 * math.log10(f_c_ghz)
    if z_u <= 0:
        raise ValueError("NLoS branch requires positive UAV altitude")
    return (
        -17.5
        + (46.0 - 7.0 * math.log10(z_u)) * math.log10(d)
        + 20.0 * math.log10(40.0 * math.pi * f_c_ghz / 3.0)
    )


def link_states(
    uav: np.ndarray,
    sectors: list[SectorConfig],
    bmap: BuildingMap,
    los_pitch: float = 5.0,
) -> list[LinkState]:
    """Per-sector gain, pathloss and LoS flag at a UAV position, sorted by id."""
    states = []
    for sector in sorted(sectors, key=lambda s: s.id):
        d = float(np.linalg.norm(uav - sector.bs_position))
        los = not envgeo.los_blocked(uav, sector.bs_position, bmap, pitch=los_pitch)
        angles = antenna.angles_from_positions(sector, uav)
        f_c_ghz = sector.ula.carrier_hz / 1e9
        states.append(
            LinkState(
                sector_id=sector.id,
                gain_db=_gain_db(angles, sector.ula),
                pathloss_db=pathloss_db(d, float(uav[2]), f_c_ghz, los),
                los=los,
                distance=d,
            )
        )
    return states


def associate_sector(states: list[LinkState]) -> int:
    """Pair with the least-pathloss sector; ties break to the smallest id."""
    if not states:
        raise ValueError("no link states to associate")
    best = min(states, key=lambda s: (s.pathloss_db, s.sector_id))
    return best.sector_id


def draw_power_gain(m: float, rng: np.random.Generator, size=None):
    """Unit-mean Nakagami-m power gain(s): Gamma(shape=m, scale=1/m)."""
    if m < 0.5:
        raise ValueError("Nakagami shape factor must be >= 0.5")
    return rng.gamma(shape=m, scale=1.0 / m, size=size)


def _mean_rx_powers_mw(states: list[LinkState], params: RadioParams) -> np.ndarray:
    """Fading-free mean received power per sector, in mW."""
    g = np.array([s.gain_db for s in states])
    pl = np.array([s.pathloss_db for s in states])
    return np.power(10.0, (params.tx_power_dbm + g - pl) / 10.0)


def sinr(
    states: list[LinkState],
    assoc: int,
    gains: np.ndarray,
    params: RadioParams,
) -> float:
    """Instantaneous SINR (linear) for one fading realization.

    `gains` holds the power gains |h|^2 aligned with `states`; every
    non-associated sector interferes (universal frequency reuse).
    """
    ids = [s.sector_id for s in states]
    if assoc not in ids:
        raise ValueError(f"associated sector {assoc} not present in link states")
    a = ids.index(assoc)
    rx = _mean_rx_powers_mw(states, params) * np.asarray(gains, dtype=float)
    signal = rx[a]
    interference = rx.sum() - signal
    return float(signal / (interference + params.noise_mw))


def top_estimate(
    states: list[LinkState],
    assoc: int,
    params: RadioParams,
    fading: FadingModel,
    rng: np.random.Generator,
) -> float:
    """Monte-Carlo TOP: fraction of L draws with SINR below the threshold.

    Each of the L measurements redraws every sector's power gain
    independently, with the Nakagami shape chosen by that sector's
    LoS/NLoS condition.
    """
    ids = [s.sector_id for s in states]
    a = ids.index(assoc)
    mean_rx = _mean_rx_powers_mw(states, params)
    m = np.array([fading.m_los if s.los else fading.m_nlos for s in states])
    gains = rng.gamma(shape=m, scale=1.0 / m, size=(params.num_measurements, len(states)))
    rx = gains * mean_rx
    signal = rx[:, a]
    interference = rx.sum(axis=1) - signal
    ratio = signal / (interference + params.noise_mw)
    return float(np.mean(ratio < params.gamma_th_linear))


def eod(top_per_step, dt: float) -> float:
    """Ergodic outage duration: dt times the sum of per-step TOP values."""
    tops = np.asarray(top_per_step, dtype=float)
    if tops.size and (tops.min() < 0.0 or tops.max() > 1.0):
        raise ValueError("TOP values must lie in [0, 1]")
    return float(dt * tops.sum())


def build_top_map(
    bmap: BuildingMap,
    sectors: list[SectorConfig],
    params: RadioParams,
    fading: FadingModel,
    airspace: Airspace,
    resolution: float,
    altitude: float,
    seed: int,
    los_pitch: float = 5.0,
) -> TopMap:
    """TOP on a regular grid of cell centers at one altitude.

    Each cell owns an independent RNG stream derived from (seed, cell
    index), so the map is reproducible and cells could be evaluated in
    parallel.
    """
    ext = airspace.extent
    nx = ext[0] / resolution
    ny = ext[1] / resolution
    if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
        raise ValueError("resolution must divide the airspace extent")
    nx, ny = int(round(nx)), int(round(ny))

    values = np.zeros((ny, nx))
    for j in range(ny):
        for i in range(nx):
            center = np.array(
                [
                    airspace.lo[0] + (i + 0.5) * resolution,
                    airspace.lo[1] + (j + 0.5) * resolution,
                    altitude,
                ]
            )
            states = link_states(center, sectors, bmap, los_pitch=los_pitch)
            assoc = associate_sector(states)
            cell_rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(j * nx + i,))
            )
            values[j, i] = top_estimate(states, assoc, params, fading, cell_rng)
    return TopMap(
        resolution=resolution,
        altitude=altitude,
        values=values,
        seed=seed,
        num_measurements=params.num_measurements,
    )


def save_top_map(tmap: TopMap, csv_path, meta_path=None, pgm_path=None) -> None:
    """Export the TOP matrix as CSV with a sidecar metadata file and a PGM raster.

    CSV rows run from the low-y edge upward; the PGM flips rows so north
    is at the top of the image, with 255 = TOP 1.
    """
    np.savetxt(csv_path, tmap.values, delimiter=",", fmt="%.6f")
    if meta_path is not None:
        with open(meta_path, "w") as f:
            f.write("format=uavnav-topmap v1\n")
            f.write(f"resolution_m={tmap.resolution!r}\n")
            f.write(f"altitude_m={tmap.altitude!r}\n")
            f.write(f"seed={tmap.seed}\n")
            f.write(f"num_measurements={tmap.num_measurements}\n")
            f.write("orientation=row 0 at y_min; columns increase with x\n")
    if pgm_path is not None:
        img = np.round(255.0 * tmap.values[::-1, :]).astype(np.uint8)
        with open(pgm_path, "wb") as f:
            f.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
            f.write(img.tobytes())
