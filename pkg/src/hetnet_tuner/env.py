"""
env.py: the simulated HetNet world the learners act in.

SectorWorld precomputes static link geometry for a deployment and answers
"what SINR/state/reward does sector k see under these antenna configs" queries.
The macro shadow realization is drawn once per world from the seed and stays
frozen; the small-cell tier is the per-period stochastic part (PicoModel).
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import radio as rf
from .geometry import associate, wrap_angle_deg
from .mdp import encode_state, immediate_reward, quantize_sinr

INITIAL_CONFIG = rf.AntennaConfig(15.0, 10.0, 70.0)


@dataclass
class PicoField:
    """One small-cell snapshot: positions (km) plus per-(pico, UE) shadowing."""
    positions: np.ndarray      # (n, 2)
    shadow_db: np.ndarray      # (n, n_ues)


@dataclass(frozen=True)
class PicoModel:
    density_per_km2: float = 2.0
    shadow_sigma_db: float = 6.0

    def sample(self, rng, area_side_km, n_ues):
        n = rng.poisson(self.density_per_km2 * area_side_km ** 2)
        pos = rng.uniform(0.0, area_side_km, size=(n, 2))
        shadow = rng.normal(0.0, self.shadow_sigma_db, size=(n, n_ues))
        return PicoField(pos, shadow)

    def scaled(self, density_mult, sigma_mult=1.0):
        return PicoModel(self.density_per_km2 * density_mult,
                         self.shadow_sigma_db * sigma_mult)


class SectorWorld:
    """Static geometry plus frozen macro shadowing for one deployment.

    Sectors with at least one attached typical UE are the learning agents.
    All methods are pure given their arguments; per-period randomness comes
    from rng/pico fields supplied by the caller.
    """

    def __init__(self, dep, radio, quantizer, reward_cfg, action_space,
                 seed=0, max_typical_ues=5, target_sector=None,
                 pico_model=None, initial_config=INITIAL_CONFIG, v_streams=1):
        self.dep = dep
        self.radio = radio
        self.quantizer = quantizer
        self.reward_cfg = reward_cfg
        self.action_space = action_space
        self.seed = seed
        self.pico_model = pico_model
        self.initial_config = initial_config
        self.initial_action = action_space.index_of(initial_config)
        if v_streams < 1:
            raise ValueError("v_streams must be >= 1")
        self.v_streams = v_streams  # spatial streams per UE; single-antenna UEs

        n_sec, n_ue = len(dep.sectors), len(dep.ues)
        hs, hu = dep.cfg.macro_height_m, dep.cfg.ue_height_m
        self.dist_km = np.empty((n_sec, n_ue))
        self.phi_deg = np.empty((n_sec, n_ue))
        self.theta_deg = np.empty((n_sec, n_ue))
        for si, sec in enumerate(dep.sectors):
            dx = dep.ues[:, 0] - sec.x_km
            dy = dep.ues[:, 1] - sec.y_km
            d = np.hypot(dx, dy)
            if np.any(d <= 0):
                raise ValueError("degenerate link")
            self.dist_km[si] = d
            self.phi_deg[si] = wrap_angle_deg(np.degrees(np.arctan2(dy, dx)) - sec.boresight_deg)
            self.theta_deg[si] = np.degrees(np.arctan2((hs - hu) / 1000.0, d))
        self.path_loss_db = rf.path_loss("macro", self.dist_km)

        # frozen macro shadow realization, one gaussian per (sector, UE) pair
        shadow_rng = np.random.default_rng(np.random.SeedSequence((seed, 101)))
        self.macro_shadow_db = shadow_rng.normal(
            0.0, radio.macro_shadow_sigma_db, size=(n_sec, n_ue))

        # association under the initial configs and the frozen shadow
        init_cfgs = [initial_config] * n_sec
        self.assoc = associate(dep, radio, init_cfgs,
                               np.vstack([self.macro_shadow_db,
                                          np.zeros((len(dep.picos), n_ue))]))
        self.typical_ues = {}
        for si in range(n_sec):
            attached = self.assoc.by_sector.get(si, [])
            if attached:
                self.typical_ues[si] = attached[:max_typical_ues]
        self.agents = sorted(self.typical_ues)
        if target_sector is not None and target_sector not in self.agents:
            raise ValueError("target sector has no typical UEs")
        self.target_sector = target_sector if target_sector is not None else (
            self.agents[0] if self.agents else None)

    # -- configuration plumbing -------------------------------------------

    def full_configs(self, overrides=None):
        cfgs = {si: self.initial_config for si in range(len(self.dep.sectors))}
        if overrides:
            cfgs.update(overrides)
        return cfgs

    def neighbor_agents(self, agent, n_neighbors=None):
        """Other agent sectors, nearest site first."""
        sec = self.dep.sectors[agent]
        others = [a for a in self.agents if a != agent]
        others.sort(key=lambda a: (np.hypot(self.dep.sectors[a].x_km - sec.x_km,
                                            self.dep.sectors[a].y_km - sec.y_km), a))
        return others if n_neighbors is None else others[:n_neighbors]

    # -- physics ------------------------------------------------------------

    def macro_rx_mw(self, ue_ids, configs):
        """(n_sectors, len(ue_ids)) linear received powers at the given UEs."""
        ue_ids = np.asarray(ue_ids)
        out = np.empty((len(self.dep.sectors), len(ue_ids)))
        for si in range(len(self.dep.sectors)):
            cfg = configs[si]
            gain = rf.antenna_gain(self.phi_deg[si, ue_ids], self.theta_deg[si, ue_ids], cfg)
            dbm = (self.radio.macro_tx_power_dbm + self.radio.macro_max_gain_dbi + gain
                   - self.path_loss_db[si, ue_ids] - self.macro_shadow_db[si, ue_ids])
            out[si] = rf.mw_from_dbm(dbm)
        return out

    def small_cell_interference_mw(self, ue_ids, pico_field):
        """Summed pico-tier interference (mW) at each UE of ue_ids."""
        if pico_field is None or len(pico_field.positions) == 0:
            return np.zeros(len(ue_ids))
        ues = self.dep.ues[np.asarray(ue_ids)]
        d_m = np.hypot(ues[:, 0][None, :] - pico_field.positions[:, 0][:, None],
                       ues[:, 1][None, :] - pico_field.positions[:, 1][:, None]) * 1000.0
        d_m = np.maximum(d_m, 1.0)  # clamp inside 1 m to keep the log finite
        dbm = (self.radio.pico_tx_power_dbm - rf.path_loss("pico", d_m)
               - pico_field.shadow_db[:, np.asarray(ue_ids)])
        return rf.mw_from_dbm(dbm).sum(axis=0)

    def link_samples(self, agent, configs, pico_field=None):
        """Per-typical-UE LinkSample for one agent sector."""
        ue_ids = self.typical_ues[agent]
        rx = self.macro_rx_mw(ue_ids, configs)
        serving = rx[agent]
        i_macro = rx.sum(axis=0) - serving
        i_small = self.small_cell_interference_mw(ue_ids, pico_field)
        noise = self.radio.noise_mw
        gammas = 10.0 * np.log10(serving / (i_macro + i_small + noise))
        return [rf.LinkSample(float(s), float(im), float(ism), float(g))
                for s, im, ism, g in zip(serving, i_macro, i_small, gammas)]

    def macro_interference_mw(self, agent, configs):
        ue_ids = self.typical_ues[agent]
        rx = self.macro_rx_mw(ue_ids, configs)
        return rx.sum(axis=0) - rx[agent]

    # -- MDP interface --------------------------------------------------------

    def gammas_db(self, agent, configs, pico_field=None):
        """Per-stream SINRs; with V > 1 each UE contributes V identical streams."""
        per_ue = np.array([ls.sinr_db
                           for ls in self.link_samples(agent, configs, pico_field)])
        return per_ue if self.v_streams == 1 else np.repeat(per_ue, self.v_streams)

    def state_of(self, gammas):
        levels = [quantize_sinr(g, self.quantizer) for g in gammas]
        return encode_state(levels, self.quantizer)

    def reward_of(self, gammas):
        q = self.quantizer
        gq = [q.level_value(quantize_sinr(g, q)) for g in gammas]
        acks = [g >= self.radio.gamma_min_db for g in gammas]
        return immediate_reward(gq, acks, self.reward_cfg)

    def observe(self, agent, configs, pico_field=None):
        """One period: apply configs, measure, return (state, reward, gammas)."""
        gammas = self.gammas_db(agent, configs, pico_field)
        return self.state_of(gammas), self.reward_of(gammas), gammas

    def n_streams(self, agent):
        return len(self.typical_ues[agent]) * self.v_streams

    def n_states(self, agent):
        return self.quantizer.n_levels ** self.n_streams(agent)

    def sample_pico_field(self, rng):
        if self.pico_model is None:
            return None
        return self.pico_model.sample(rng, self.dep.cfg.area_side_km, len(self.dep.ues))


class OnlineEnv:
    """The single-agent online phase: the target acts, neighbors follow their
    equilibrium policies, and the pico tier is redrawn every period."""

    def __init__(self, world, neighbor_plan, seed=0):
        self.world = world
        self.target = world.target_sector
        self.neighbor_plan = neighbor_plan
        self.rng = np.random.default_rng(np.random.SeedSequence((seed, 211)))

    def _configs(self, target_cfg):
        cfgs = self.world.full_configs(self.neighbor_plan(target_cfg))
        cfgs[self.target] = target_cfg
        return cfgs

    def observe_initial(self):
        cfg0 = self.world.initial_config
        field = self.world.sample_pico_field(self.rng)
        s, r, g = self.world.observe(self.target, self._configs(cfg0), field)
        return s, g

    def step(self, action_index):
        cfg = self.world.action_space.config_at(action_index)
        field = self.world.sample_pico_field(self.rng)
        return self.world.observe(self.target, self._configs(cfg), field)
