"""Urban geometry: statistical building field, airspace, BS sectors, LoS tests.

Positions are plain numpy arrays of shape (3,) in meters. The building
field is one realization of the ITU statistical urban model, parameterized
by built-area ratio, building density per km^2 and the Rayleigh mean of
building heights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .antenna import UlaConfig


def vec3(x: float, y: float, z: float) -> np.ndarray:
    """3-D position in meters."""
    return np.array([float(x), float(y), float(z)])


@dataclass(frozen=True)
class Airspace:
    """Axis-aligned flight volume [lo, up], bounds inclusive."""

    lo: np.ndarray
    up: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.lo).all() and np.isfinite(self.up).all()):
            raise ValueError("airspace bounds must be finite")
        if not (self.lo <= self.up).all():
            raise ValueError("airspace lower bound exceeds upper bound")

    def contains(self, p: np.ndarray) -> bool:
        return bool((p >= self.lo).all() and (p <= self.up).all())

    @property
    def extent(self) -> np.ndarray:
        return self.up - self.lo

    @property
    def land_area_km2(self) -> float:
        ext = self.extent
        return float(ext[0] * ext[1]) / 1e6


@dataclass(frozen=True)
class Building:
    """Axis-aligned rectangular building footprint with flat roof."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    height: float

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError("building height must be positive")
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError("degenerate building footprint")


@dataclass
class BuildingMap:
    """Obstacle field used for LoS blockage queries.

    Read-only after construction; `boxes` caches the footprints as an
    (N, 5) array of x_min, y_min, x_max, y_max, height for vectorized
    containment tests.
    """

    buildings: list[Building]
    seed: int
    boxes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.buildings:
            self.boxes = np.array(
                [[b.x_min, b.y_min, b.x_max, b.y_max, b.height] for b in self.buildings]
            )
        else:
            self.boxes = np.zeros((0, 5))


@dataclass(frozen=True)
class ItuParams:
    """ITU urban model parameters.

    alpha_hat: ratio of land covered by buildings, in (0, 1).
    beta_hat:  buildings per km^2.
    gamma_hat: mean of the Rayleigh height distribution, meters.
    h_max:     clipping height for sampled buildings, meters.
    """

    alpha_hat: float
    beta_hat: float
    gamma_hat: float
    h_max: float

    def __post_init__(self):
        if not 0 < self.alpha_hat < 1:
            raise ValueError("alpha_hat must lie in (0, 1)")
        if self.beta_hat <= 0 or self.gamma_hat <= 0 or self.h_max <= 0:
            raise ValueError("beta_hat, gamma_hat and h_max must be positive")


@dataclass(frozen=True)
class SectorConfig:
    """One BS sector: antenna site, boresight azimuth and the shared ULA."""

    id: int
    bs_position: np.ndarray
    boresight_azimuth: float
    ula: "UlaConfig"


def sample_heights(params: ItuParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Raw (unclipped) Rayleigh building heights with mean gamma_hat."""
    scale = params.gamma_hat * math.sqrt(2.0 / math.pi)
    return rng.rayleigh(scale=scale, size=n)


def generate_buildings(params: ItuParams, airspace: Airspace, seed: int) -> BuildingMap:
    """Draw one realization of the statistical building field.

    Places round(beta_hat * area_km2) square buildings on a jittered grid.
    Side lengths are uniform in [0.5, 1.5] times sqrt(alpha_hat/beta_hat)
    so the built-area ratio approaches alpha_hat; heights are Rayleigh
    with mean gamma_hat, clipped to h_max. Deterministic for a fixed seed.
    """
    area_km2 = airspace.land_area_km2
    count = int(round(params.beta_hat * area_km2))
    mean_side_m = math.sqrt(params.alpha_hat / params.beta_hat) * 1000.0
    # E[side^2] = (13/12) * mean_side^2 for the uniform side draw below.
    expected_ratio = count * (13.0 / 12.0) * mean_side_m**2 / (area_km2 * 1e6)
    if expected_ratio > 1.0:
        raise ValueError(
            f"parameters imply expected footprint ratio {expected_ratio:.3f} > 1"
        )

    rng = np.random.default_rng(seed)
    lo, up = airspace.lo, airspace.up
    ext = airspace.extent

    grid = max(1, math.ceil(math.sqrt(count)))
    cell = ext[:2] / grid
    order = rng.permutation(grid * grid)[:count]
    sides = rng.uniform(0.5 * mean_side_m, 1.5 * mean_side_m, size=count)
    heights = np.minimum(sample_heights(params, count, rng), params.h_max)
    jitter = rng.uniform(-0.25, 0.25, size=(count, 2)) * cell

    buildings = []
    for idx, side, h, jit in zip(order, sides, heights, jitter):
        cx = lo[0] + (idx % grid + 0.5) * cell[0] + jit[0]
        cy = lo[1] + (idx // grid + 0.5) * cell[1] + jit[1]
        half = side / 2.0
        # Clamp the footprint into the land extent.
        cx = min(max(cx, lo[0] + half), up[0] - half)
        cy = min(max(cy, lo[1] + half), up[1] - half)
        buildings.append(Building(cx - half, cy - half, cx + half, cy + half, float(h)))
    return BuildingMap(buildings=buildings, seed=seed)


def los_blocked(
    p1: np.ndarray, p2: np.ndarray, bmap: BuildingMap, pitch: float = 5.0
) -> bool:
    """True iff the p1-p2 segment passes strictly inside some building.

    The segment is sampled at a pitch of at most `pitch` meters and each
    sample is tested for strict interior containment, so points exactly on
    a face do not count as blocked. Endpoints are ordered canonically
    before sampling, which makes the test exactly symmetric in (p1, p2).
    """
    if bmap.boxes.shape[0] == 0:
        return False
    if tuple(p2) < tuple(p1):
        p1, p2 = p2, p1
    dist = float(np.linalg.norm(p2 - p1))
    n = max(2, math.ceil(dist / pitch) + 1)
    t = np.linspace(0.0, 1.0, n)
    pts = p1[None, :] + t[:, None] * (p2 - p1)[None, :]

    bx = bmap.boxes
    x, y, z = pts[:, 0:1], pts[:, 1:2], pts[:, 2:3]
    inside = (
        (x > bx[:, 0])
        & (x < bx[:, 2])
        & (y > bx[:, 1])
        & (y < bx[:, 3])
        & (z > 0.0)
        & (z < bx[:, 4])
    )
    return bool(inside.any())


def sector_layout(
    bs_positions: list[np.ndarray], base_azimuth: float, ula: "UlaConfig"
) -> list[SectorConfig]:
    """Three sectors per BS, ids 1..3B, boresights 120 degrees apart."""
    sectors = []
    for b, pos in enumerate(bs_positions):
        for s in range(3):
            sectors.append(
                SectorConfig(
                    id=3 * b + s + 1,
                    bs_position=np.asarray(pos, dtype=float),
                    boresight_azimuth=(base_azimuth + 120.0 * s) % 360.0,
                    ula=ula,
                )
            )
    return sectors


BUILDING_MAP_FORMAT = "uavnav-buildingmap v1"


def save_building_map(bmap: BuildingMap, path) -> None:
    """Versioned plain-text export, one building per row."""
    with open(path, "w") as f:
        f.write(f"# {BUILDING_MAP_FORMAT} seed={bmap.seed}\n")
        f.write("# x_min,y_min,x_max,y_max,height\n")
        for b in bmap.buildings:
            row = (b.x_min, b.y_min, b.x_max, b.y_max, b.height)
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def load_building_map(path) -> BuildingMap:
    with open(path) as f:
        header = f.readline().strip()
        if not header.startswith(f"# {BUILDING_MAP_FORMAT}"):
            raise ValueError(f"unrecognized building map header: {header!r}")
        seed = int(header.split("seed=")[1])
        buildings = []
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(v) for v in line.split(",")]
            buildings.append(Building(*vals))
    return BuildingMap(buildings=buildings, seed=seed)
