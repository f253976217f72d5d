"""
radio.py: antenna patterns, path loss, shadowing and SINR for the two-tier network.

All power arithmetic is done in linear mW; dB/dBm only appear at interfaces.
Pattern gains are <= 0 dB; the 15 dBi macro element gain is added separately
when composing link budgets so that pattern differences stay element-gain free.
"""
from dataclasses import dataclass

import numpy as np

# Pattern attenuation floors (dB)
V_FLOOR_DB = 20.0
H_FLOOR_DB = 25.0
TOTAL_FLOOR_DB = 25.0


@dataclass(frozen=True)
class AntennaConfig:
    """One macrocell antenna setting: tilt and the two half-power beamwidths (deg)."""
    tilt_deg: float
    v_beamwidth_deg: float
    h_beamwidth_deg: float

    def as_tuple(self):
        return (self.tilt_deg, self.v_beamwidth_deg, self.h_beamwidth_deg)


@dataclass(frozen=True)
class RadioParams:
    macro_tx_power_dbm: float = 46.0
    pico_tx_power_dbm: float = 24.0
    macro_max_gain_dbi: float = 15.0
    macro_shadow_sigma_db: float = 10.0
    pico_shadow_sigma_db: float = 6.0
    noise_power_dbm: float = -104.0
    gamma_min_db: float = 2.0

    def __post_init__(self):
        if self.macro_shadow_sigma_db < 0 or self.pico_shadow_sigma_db < 0:
            raise ValueError("shadow sigmas must be >= 0")

    @property
    def noise_mw(self):
        return 10.0 ** (self.noise_power_dbm / 10.0)


@dataclass(frozen=True)
class LinkSample:
    """Decomposed per-link powers (linear mW) and the resulting SINR (dB)."""
    serving_mw: float
    i_macro_mw: float
    i_small_mw: float
    sinr_db: float


def horizontal_gain(phi_deg, phi_3db_deg):
    """Horizontal pattern attenuation -min(12*(phi/phi_3dB)^2, 25) dB.

    Accepts scalars or numpy arrays for phi_deg.
    """
    if phi_3db_deg <= 0:
        raise ValueError("invalid beamwidth")
    return -np.minimum(12.0 * (np.asarray(phi_deg, dtype=float) / phi_3db_deg) ** 2,
                       H_FLOOR_DB)


def vertical_gain(theta_deg, tilt_deg, theta_3db_deg):
    """Vertical pattern attenuation -min(12*((theta-tilt)/theta_3dB)^2, 20) dB."""
    if theta_3db_deg <= 0:
        raise ValueError("invalid beamwidth")
    off = np.asarray(theta_deg, dtype=float) - tilt_deg
    return -np.minimum(12.0 * (off / theta_3db_deg) ** 2, V_FLOOR_DB)


def antenna_gain(phi_deg, theta_deg, cfg):
    """Combined pattern gain -min(-(Ah+Av), 25) dB; always in [-25, 0]."""
    ah = horizontal_gain(phi_deg, cfg.h_beamwidth_deg)
    av = vertical_gain(theta_deg, cfg.tilt_deg, cfg.v_beamwidth_deg)
    return -np.minimum(-(ah + av), TOTAL_FLOOR_DB)


def path_loss(tier, distance):
    """Distance-based path loss in dB.

    tier "macro" takes the distance in km; tier "pico" takes it in meters.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("degenerate link")
    if tier == "macro":
        return 128.1 + 37.6 * np.log10(d)
    if tier == "pico":
        return 38.0 + 30.0 * np.log10(d)
    raise ValueError(f"unknown tier: {tier}")


def mw_from_dbm(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def dbm_from_mw(mw):
    return 10.0 * np.log10(mw)


def macro_rx_dbm(radio, cfg, phi_deg, theta_deg, distance_km, shadow_db=0.0):
    """Received power from one macro sector: tx + element gain + pattern - PL - shadow."""
    return (radio.macro_tx_power_dbm + radio.macro_max_gain_dbi
            + antenna_gain(phi_deg, theta_deg, cfg)
            - path_loss("macro", distance_km) - shadow_db)


def pico_rx_dbm(radio, distance_m, shadow_db=0.0):
    """Received power from a pico (omni, 0 dBi)."""
    return radio.pico_tx_power_dbm - path_loss("pico", distance_m) - shadow_db


def sinr(serving_mw, macro_interf_mw, small_interf_mw, radio):
    """Compose a LinkSample from already-decomposed linear powers."""
    i_macro = float(np.sum(macro_interf_mw))
    i_small = float(np.sum(small_interf_mw))
    s = float(serving_mw)
    gamma = 10.0 * np.log10(s / (i_macro + i_small + radio.noise_mw))
    return LinkSample(s, i_macro, i_small, float(gamma))
