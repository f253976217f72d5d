"""
geometry.py: two-tier deployment sampling, per-link geometry and cell association.

Positions live on a square area in km. Every eNB expands into three 120-degree
sectors with boresights at 60/180/300 degrees (math convention, CCW from +x).
All randomness flows from an explicit seed; functions are pure.
"""
import json
from dataclasses import dataclass

import numpy as np

from .radio import AntennaConfig, macro_rx_dbm, pico_rx_dbm

SECTOR_BORESIGHTS = (60.0, 180.0, 300.0)


@dataclass(frozen=True)
class DeploymentConfig:
    area_side_km: float = 5.0
    lambda_macro: float = 0.25      # eNB sites per km^2
    lambda_pico: float = 2.0
    n_ues: int = 400
    macro_height_m: float = 32.0
    ue_height_m: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.area_side_km <= 0:
            raise ValueError("area_side_km must be positive")
        if self.lambda_macro <= 0 or self.lambda_pico < 0:
            raise ValueError("densities must be positive")
        if self.n_ues < 1:
            raise ValueError("n_ues must be >= 1")


@dataclass(frozen=True)
class Sector:
    site: int                  # eNB index
    boresight_deg: float
    x_km: float
    y_km: float


@dataclass
class Deployment:
    cfg: DeploymentConfig
    sites: np.ndarray          # (n_sites, 2) eNB positions
    sectors: list              # list[Sector], 3 per site
    picos: np.ndarray          # (n_picos, 2)
    ues: np.ndarray            # (n_ues, 2)

    @property
    def n_cells(self):
        """Sectors first, picos after; global cell ids follow this order."""
        return len(self.sectors) + len(self.picos)

    def to_json_dict(self):
        return {
            "version": 1,
            "kind": "deployment",
            "config": {
                "area_side_km": self.cfg.area_side_km,
                "lambda_macro": self.cfg.lambda_macro,
                "lambda_pico": self.cfg.lambda_pico,
                "n_ues": self.cfg.n_ues,
                "macro_height_m": self.cfg.macro_height_m,
                "ue_height_m": self.cfg.ue_height_m,
                "seed": self.cfg.seed,
            },
            "sites": self.sites.tolist(),
            "sectors": [[s.site, s.boresight_deg] for s in self.sectors],
            "picos": self.picos.tolist(),
            "ues": self.ues.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc):
        if doc.get("kind") != "deployment" or doc.get("version") != 1:
            raise ValueError("not a version-1 deployment document")
        cfg = DeploymentConfig(**doc["config"])
        sites = np.asarray(doc["sites"], dtype=float).reshape(-1, 2)
        sectors = [Sector(int(si), float(b), sites[int(si)][0], sites[int(si)][1])
                   for si, b in doc["sectors"]]
        picos = np.asarray(doc["picos"], dtype=float).reshape(-1, 2)
        ues = np.asarray(doc["ues"], dtype=float).reshape(-1, 2)
        return cls(cfg, sites, sectors, picos, ues)

    def dumps(self):
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))


def _expand_sectors(sites):
    return [Sector(i, b, float(p[0]), float(p[1]))
            for i, p in enumerate(sites) for b in SECTOR_BORESIGHTS]


def sample_deployment(cfg):
    """Draw a PPP deployment: Poisson site/pico counts, uniform positions.

    Raises ValueError("empty deployment") when zero eNB sites are drawn;
    callers may retry with seed+1.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    area = cfg.area_side_km ** 2
    n_sites = rng.poisson(cfg.lambda_macro * area)
    if n_sites == 0:
        raise ValueError("empty deployment")
    n_picos = rng.poisson(cfg.lambda_pico * area)
    sites = rng.uniform(0.0, cfg.area_side_km, size=(n_sites, 2))
    picos = rng.uniform(0.0, cfg.area_side_km, size=(n_picos, 2))
    ues = rng.uniform(0.0, cfg.area_side_km, size=(cfg.n_ues, 2))
    return Deployment(cfg, sites, _expand_sectors(sites), picos, ues)


def fixed_deployment(cfg, site_xy, ue_xy, pico_xy=()):
    """Deterministic layout used by the desk preset."""
    sites = np.asarray(site_xy, dtype=float).reshape(-1, 2)
    ues = np.asarray(ue_xy, dtype=float).reshape(-1, 2)
    picos = np.asarray(pico_xy, dtype=float).reshape(-1, 2) if len(pico_xy) else np.zeros((0, 2))
    return Deployment(cfg, sites, _expand_sectors(sites), picos, ues)


def wrap_angle_deg(angle):
    """Wrap to (-180, 180]."""
    w = angle - 360.0 * np.floor(angle / 360.0)
    return np.where(w > 180.0, w - 360.0, w)


@dataclass(frozen=True)
class UeGeometry:
    distance_2d_km: float
    azimuth_offset_deg: float   # signed offset from the sector boresight
    elevation_deg: float        # downward angle at the BS toward the UE


def ue_geometry(sector, ue_xy, macro_height_m, ue_height_m):
    dx = ue_xy[0] - sector.x_km
    dy = ue_xy[1] - sector.y_km
    d2d = float(np.hypot(dx, dy))
    if d2d <= 0.0:
        raise ValueError("degenerate link")
    az = np.degrees(np.arctan2(dy, dx))
    phi = float(wrap_angle_deg(az - sector.boresight_deg))
    theta = float(np.degrees(np.arctan2((macro_height_m - ue_height_m) / 1000.0, d2d)))
    return UeGeometry(d2d, phi, theta)


@dataclass
class AssociationMap:
    serving: list               # per-UE global cell id
    by_sector: dict             # sector id -> list of attached UE ids

    def to_json_dict(self):
        return {"serving": list(self.serving),
                "by_sector": {str(k): v for k, v in sorted(self.by_sector.items())}}


def received_power_matrix(dep, radio, configs, shadow_db=None):
    """(n_cells, n_ues) received power in dBm under the given sector configs.

    configs: per-sector AntennaConfig list; shadow_db: optional (n_cells, n_ues)
    realization in dB (zeros when omitted).
    """
    n_sec = len(dep.sectors)
    n_ue = len(dep.ues)
    rx = np.empty((dep.n_cells, n_ue))
    hs, hu = dep.cfg.macro_height_m, dep.cfg.ue_height_m
    for si, sec in enumerate(dep.sectors):
        dx = dep.ues[:, 0] - sec.x_km
        dy = dep.ues[:, 1] - sec.y_km
        d = np.hypot(dx, dy)
        if np.any(d <= 0):
            raise ValueError("degenerate link")
        phi = wrap_angle_deg(np.degrees(np.arctan2(dy, dx)) - sec.boresight_deg)
        theta = np.degrees(np.arctan2((hs - hu) / 1000.0, d))
        rx[si] = macro_rx_dbm(radio, configs[si], phi, theta, d)
    for pi, pos in enumerate(dep.picos):
        d_m = np.hypot(dep.ues[:, 0] - pos[0], dep.ues[:, 1] - pos[1]) * 1000.0
        if np.any(d_m <= 0):
            raise ValueError("degenerate link")
        rx[n_sec + pi] = pico_rx_dbm(radio, d_m)
    if shadow_db is not None:
        rx = rx - np.asarray(shadow_db, dtype=float)
    return rx


def associate(dep, radio, configs=None, shadow_db=None):
    """Attach each UE to its max-received-power cell (ties to the lowest id)."""
    if configs is None:
        configs = [AntennaConfig(15.0, 10.0, 70.0)] * len(dep.sectors)
    rx = received_power_matrix(dep, radio, configs, shadow_db)
    serving = [int(np.argmax(rx[:, u])) for u in range(rx.shape[1])]
    by_sector = {si: [] for si in range(len(dep.sectors))}
    for u, cell in enumerate(serving):
        if cell < len(dep.sectors):
            by_sector[cell].append(u)
    return AssociationMap(serving, by_sector)
