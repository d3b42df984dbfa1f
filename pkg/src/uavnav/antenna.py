"""3GPP-style sectorized ULA: element patterns, steering weights, 3D gain.

Angles are degrees at the interface and radians internally. The local
sector frame has z pointing up and the boresight at azimuth zero, so the
vertical angle theta is measured from the ULA axis (+z) and phi is the
horizontal offset from boresight, wrapped to (-180, 180].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .envgeo import SectorConfig

SPEED_OF_LIGHT = 3.0e8  # m/s


@dataclass(frozen=True)
class UlaConfig:
    """Vertical uniform linear array of M directional elements.

    Element m sits at (0, 0, (m-1)*d_v) in the sector frame; the main lobe
    is electrically steered to theta_etilt by fixed per-element phase
    shifts.
    """

    m_elements: int
    d_v: float          # element spacing, meters
    carrier_hz: float
    theta_etilt: float  # degrees, 90 = perpendicular to the array
    theta_3db: float    # vertical half-power beamwidth, degrees
    phi_3db: float      # horizontal half-power beamwidth, degrees

    def __post_init__(self):
        if self.m_elements < 1:
            raise ValueError("need at least one array element")
        if self.d_v <= 0 or self.carrier_hz <= 0:
            raise ValueError("d_v and carrier_hz must be positive")
        if not 0.0 <= self.theta_etilt <= 180.0:
            raise ValueError("theta_etilt must lie in [0, 180] degrees")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class AnglePair:
    """Direction in the sector frame: theta from +z in [0, 180], phi in (-180, 180]."""

    theta: float
    phi: float


def vertical_pattern_db(theta: float, cfg: UlaConfig) -> float:
    """Vertical element pattern, -min{12 ((theta-90)/theta_3db)^2, 30} dB."""
    return -min(12.0 * ((theta - 90.0) / cfg.theta_3db) ** 2, 30.0)


def horizontal_pattern_db(phi: float, cfg: UlaConfig) -> float:
    """Horizontal element pattern, -min{12 (phi/phi_3db)^2, 30} dB."""
    return -min(12.0 * (phi / cfg.phi_3db) ** 2, 30.0)


def element_pattern_db(a: AnglePair, cfg: UlaConfig) -> float:
    """3D element pattern: vertical plus horizontal cuts, floored at -30 dB."""
    av = vertical_pattern_db(a.theta, cfg)
    ah = horizontal_pattern_db(a.phi, cfg)
    return -min(-(av + ah), 30.0)


def steering_weights(cfg: UlaConfig) -> np.ndarray:
    """Complex element coefficients realizing the electrical downtilt.

    w_m = (1/M) exp[-j (2 pi / lambda) (m-1) d_v cos(theta_etilt)]
    """
    m = np.arange(cfg.m_elements)
    phase = -2.0 * math.pi / cfg.wavelength * m * cfg.d_v * math.cos(
        math.radians(cfg.theta_etilt)
    )
    return np.exp(1j * phase) / cfg.m_elements


def array_factor(a: AnglePair, cfg: UlaConfig) -> complex:
    """Conjugated-weight inner product with the steering vector.

    The steering vector entry for element m is exp(-j k . (0,0,z_m)) with
    wave vector k of magnitude 2 pi / lambda in direction (theta, phi);
    only the z component survives for a vertical array. At
    theta == theta_etilt the M terms add coherently to exactly 1.
    """
    m = np.arange(cfg.m_elements)
    z = m * cfg.d_v
    sv = np.exp(-1j * 2.0 * math.pi / cfg.wavelength * z * math.cos(math.radians(a.theta)))
    return complex(np.conj(steering_weights(cfg)) @ sv)


def gain_db(a: AnglePair, cfg: UlaConfig) -> float:
    """3D antenna gain: element pattern plus 20 log10 |AF|.

    Returns -inf in exact array-factor nulls.
    """
    af_mag = abs(array_factor(a, cfg))
    if af_mag == 0.0:
        return float("-inf")
    return element_pattern_db(a, cfg) + 20.0 * math.log10(af_mag)


def angles_from_positions(sector: "SectorConfig", uav: np.ndarray) -> AnglePair:
    """Direction of the UAV in the sector's local frame.

    theta is the angle from the vertical array axis to the sector->UAV
    vector; phi is that vector's azimuth minus the boresight azimuth,
    wrapped to (-180, 180].
    """
    d = np.asarray(uav, dtype=float) - sector.bs_position
    dist = float(np.linalg.norm(d))
    if dist == 0.0:
        raise ValueError("UAV coincides with the sector antenna")
    theta = math.degrees(math.acos(max(-1.0, min(1.0, d[2] / dist))))
    azimuth = math.degrees(math.atan2(d[1], d[0]))
    phi = (azimuth - sector.boresight_azimuth) % 360.0
    if phi > 180.0:
        phi -= 360.0
    return AnglePair(theta=theta, phi=phi)
