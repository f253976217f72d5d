"""
config.py: experiment configuration.

A flat dotted-key text format (`section.key = value`, '#' comments) layered on
top of one of two presets: "paper" (PPP deployment, 7-level quantizer, the full
180-action grid) and "desk" (a fixed miniature layout on which the exhaustive
oracles are tractable). Unknown keys are rejected.
"""
import hashlib
from dataclasses import dataclass

import numpy as np

from .env import PicoModel
from .geometry import DeploymentConfig, fixed_deployment, sample_deployment
from .locnet import SectorGeometry
from .mdp import ActionSpace, RewardConfig, StateQuantizer
from .meanfield import MeanFieldTrainerConfig
from .online import OnlineHyper
from .radio import RadioParams


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(v) for v in str(text).split(","))


def _opt_int(text):
    return None if str(text).lower() in ("none", "") else int(text)


# key -> (parser, paper default, desk default); None desk default means "same"
SCHEMA = {
    "seed": (int, 0, None),
    "deployment.area_side_km": (float, 5.0, 2.0),
    "deployment.lambda_macro": (float, 0.25, 0.5),
    "deployment.lambda_pico": (float, 2.0, 2.0),
    "deployment.n_ues": (int, 400, 4),
    "deployment.macro_height_m": (float, 32.0, None),
    "deployment.ue_height_m": (float, 1.5, None),
    "radio.macro_tx_power_dbm": (float, 46.0, None),
    "radio.pico_tx_power_dbm": (float, 24.0, None),
    "radio.macro_max_gain_dbi": (float, 15.0, None),
    "radio.macro_shadow_sigma_db": (float, 10.0, 0.0),
    "radio.pico_shadow_sigma_db": (float, 6.0, None),
    "radio.noise_power_dbm": (float, -104.0, None),
    "radio.gamma_min_db": (float, 2.0, None),
    "quantizer.min_db": (float, 0.0, None),
    "quantizer.max_db": (float, 12.0, None),
    "quantizer.step_db": (float, 2.0, 4.0),
    "actions.tilts": (_floats, (0.0, 3.0, 6.0, 9.0, 12.0, 15.0), (3.0, 15.0)),
    "actions.v_beamwidths": (_floats, (4.4, 6.8, 9.4, 10.0, 13.5), (6.8, 10.0)),
    "actions.h_beamwidths": (_floats, (45.0, 55.0, 65.0, 70.0, 75.0, 85.0),
                             (45.0, 65.0, 70.0)),
    "reward.penalty": (float, -100.0, None),
    "reward.discount": (float, 0.9, None),
    "meanfield.learning_rate": (float, 1.0, None),
    "meanfield.t_eps": (int, 10, None),
    "meanfield.sweeps": (int, 8, 14),
    "meanfield.episode_steps": (int, 240, 96),
    "meanfield.tol_deg": (float, 0.5, None),
    "meanfield.n_neighbors": (_opt_int, 6, None),
    "meanfield.beta_samples": (int, 4, None),
    "online.mu": (float, 0.8, None),
    "online.alpha": (float, 0.9, None),
    "online.t_eps": (int, 10, None),
    "online.trials": (int, 200, None),
    "dnn.learning_rate": (float, 1e-2, None),
    "dnn.epochs": (int, 4000, 2500),
    "dnn.n_train": (int, 128, None),
    "dnn.n_test": (int, 64, None),
    "dnn.obs_noise_db": (float, 0.25, None),
    "dnn.jitter_sigma_db": (float, 0.2, None),
    "dnn.static_shadow_db": (float, 10.0, None),
    "dnn.activity_range_db": (float, 12.0, None),
    "dnn.input_cluster": (int, 0, None),
    "cluster.inner_radius_km": (float, 1.0, 0.2),
    "cluster.outer_radius_km": (float, 1.5, 0.8),
    "cluster.radial_res_km": (float, 0.1, 0.15),
    "cluster.angular_res_deg": (float, 30.0, None),
    "eval.horizon": (int, 50, None),
    "eval.oracle_max_actions": (int, 64, None),
    "eval.eta_samples": (int, 200, None),
    "sim.max_typical_ues": (int, 5, None),
    "sim.v_streams": (int, 1, None),
    "sim.pico_density_mult": (float, 1.0, None),
    "sim.pico_sigma_mult": (float, 1.0, None),
}

PRESETS = ("paper", "desk")

# desk layout: (site index, radius km, azimuth deg) per UE around two fixed eNBs
DESK_SITES = ((0.5, 0.5), (1.5, 1.5))
DESK_UES_POLAR = ((0, 0.35, 50.0), (0, 0.40, 80.0), (1, 0.40, 200.0), (1, 0.30, 160.0))


@dataclass
class ExperimentConfig:
    preset: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def with_overrides(self, **dotted):
        vals = dict(self.values)
        for key, val in dotted.items():
            key = key.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key: {key}")
            vals[key] = val
        return ExperimentConfig(self.preset, vals)

    # -- canonical form ----------------------------------------------------

    def lines(self):
        out = [f"preset = {self.preset}"]
        for key in sorted(self.values):
            val = self.values[key]
            if isinstance(val, tuple):
                val = ",".join(repr(v) for v in val)
            out.append(f"{key} = {val}")
        return out

    def config_hash(self):
        digest = hashlib.sha256("\n".join(self.lines()).encode()).hexdigest()
        return digest[:12]

    # -- domain objects -------------------------------------------------------

    @property
    def seed(self):
        return self.values["seed"]

    def deployment_config(self):
        return DeploymentConfig(
            area_side_km=self["deployment.area_side_km"],
            lambda_macro=self["deployment.lambda_macro"],
            lambda_pico=self["deployment.lambda_pico"],
            n_ues=self["deployment.n_ues"],
            macro_height_m=self["deployment.macro_height_m"],
            ue_height_m=self["deployment.ue_height_m"],
            seed=self.seed)

    def make_deployment(self):
        dcfg = self.deployment_config()
        if self.preset == "desk":
            sites = np.asarray(DESK_SITES)
            ues = []
            for si, r, az in DESK_UES_POLAR:
                ues.append(sites[si] + r * np.array([np.cos(np.radians(az)),
                                                     np.sin(np.radians(az))]))
            return fixed_deployment(dcfg, sites, np.asarray(ues))
        return sample_deployment(dcfg)

    def radio(self):
        return RadioParams(
            macro_tx_power_dbm=self["radio.macro_tx_power_dbm"],
            pico_tx_power_dbm=self["radio.pico_tx_power_dbm"],
            macro_max_gain_dbi=self["radio.macro_max_gain_dbi"],
            macro_shadow_sigma_db=self["radio.macro_shadow_sigma_db"],
            pico_shadow_sigma_db=self["radio.pico_shadow_sigma_db"],
            noise_power_dbm=self["radio.noise_power_dbm"],
            gamma_min_db=self["radio.gamma_min_db"])

    def quantizer(self):
        return StateQuantizer(self["quantizer.min_db"], self["quantizer.max_db"],
                              self["quantizer.step_db"])

    def action_space(self):
        return ActionSpace(self["actions.tilts"], self["actions.v_beamwidths"],
                           self["actions.h_beamwidths"])

    def reward(self):
        return RewardConfig(penalty=self["reward.penalty"],
                            discount=self["reward.discount"],
                            gamma_min_db=self["radio.gamma_min_db"],
                            n_periods=self["eval.horizon"])

    def pico_model(self):
        density = self["deployment.lambda_pico"] * self["sim.pico_density_mult"]
        sigma = self["radio.pico_shadow_sigma_db"] * self["sim.pico_sigma_mult"]
        return PicoModel(density, sigma)

    def meanfield_config(self):
        return MeanFieldTrainerConfig(
            learning_rate=self["meanfield.learning_rate"],
            discount=self["reward.discount"],
            t_eps=self["meanfield.t_eps"],
            sweeps=self["meanfield.sweeps"],
            episode_steps=self["meanfield.episode_steps"],
            tol_deg=self["meanfield.tol_deg"],
            n_neighbors=self["meanfield.n_neighbors"],
            seed=self.seed)

    def online_hyper(self, seed=None):
        return OnlineHyper(mu=self["online.mu"], alpha=self["online.alpha"],
                           t_eps=self["online.t_eps"], trials=self["online.trials"],
                           seed=self.seed if seed is None else seed)

    def sector_geometry(self, boresight_deg):
        return SectorGeometry(
            boresight_deg=boresight_deg,
            span_deg=120.0,
            inner_radius_km=self["cluster.inner_radius_km"],
            outer_radius_km=self["cluster.outer_radius_km"],
            bs_height_m=self["deployment.macro_height_m"],
            ue_height_m=self["deployment.ue_height_m"])


def preset_config(preset="desk", seed=None):
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset: {preset}")
    values = {}
    for key, (parse, paper_default, desk_default) in SCHEMA.items():
        val = paper_default if (preset == "paper" or desk_default is None) else desk_default
        values[key] = val
    cfg = ExperimentConfig(preset, values)
    if seed is not None:
        cfg.values["seed"] = int(seed)
    return cfg


def parse_config_text(text, preset="desk", seed=None):
    """Layer `key = value` lines over the preset defaults; unknown keys fail."""
    cfg = preset_config(preset, seed)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key == "preset":
            continue  # preset is chosen by the caller; echoing it is allowed
        if key == "seed" and seed is not None:
            continue  # explicit --seed wins over the file
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown config key: {key}")
        parse = SCHEMA[key][0]
        try:
            cfg.values[key] = parse(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val}") from exc
    return cfg


def load_config(path=None, preset="desk", seed=None):
    if path is None:
        return preset_config(preset, seed)
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), preset, seed)
