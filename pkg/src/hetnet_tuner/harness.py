"""
harness.py: experiment orchestration.

Each pipeline stage reads the artifacts of earlier stages from the output
directory, writes its own versioned JSON artifact, and appends metric rows to
CSV. Every stage is deterministic given (seed, config); wall-clock runtime is
the one reported quantity outside that contract.
"""
import csv
import json
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .env import OnlineEnv, SectorWorld
from .geometry import Deployment
from .locnet import (ClusterGrid, ClusterNet, TrainHyper, TrainingSet, assign_ue,
                     build_clusters, fingerprint_baseline, forward,
                     localization_accuracy, train_net)
from .meanfield import (BetaTable, MeanFieldPolicy, estimate_beta, meanfield_train,
                        relative_variance)
from .mdp import quantize_sinr
from .online import (FeatureContext, LinearQ, extract_policy, greedy_action,
                     policy_compactness, run_online_training, run_tabular_training)
from .radio import mw_from_dbm


class HarnessError(RuntimeError):
    pass


STAGE_FILES = {
    "deploy": ("deployment.json",),
    "offline": ("meanfield.json", "beta.json"),
    "dnn": ("locnet.json",),
    "online": ("online.json",),
}


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
                          encoding="utf-8")


def _read_json(path, stage):
    p = Path(path)
    if not p.exists():
        raise HarnessError(f"missing stage: {stage}")
    return json.loads(p.read_text(encoding="utf-8"))


def build_world(cfg, dep):
    world = SectorWorld(dep, cfg.radio(), cfg.quantizer(), cfg.reward(),
                        cfg.action_space(), seed=cfg.seed,
                        max_typical_ues=cfg["sim.max_typical_ues"],
                        pico_model=cfg.pico_model(),
                        v_streams=cfg["sim.v_streams"])
    if not world.agents:
        raise HarnessError("deployment has no macrocell with attached UEs")
    world.target_sector = _pick_target(world)
    return world


def _pick_target(world):
    """The evaluation sector: boresight-60 sector nearest the bottom-left
    corner, falling back to the first agent."""
    best = None
    for a in world.agents:
        sec = world.dep.sectors[a]
        if abs(sec.boresight_deg - 60.0) > 1e-9:
            continue
        d = np.hypot(sec.x_km, sec.y_km)
        if best is None or d < best[0]:
            best = (d, a)
    return best[1] if best else world.agents[0]


# -- stages ------------------------------------------------------------------------


def cmd_deploy(cfg, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dep = cfg.make_deployment()
    world = build_world(cfg, dep)
    doc = dep.to_json_dict()
    doc.update({
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "association": world.assoc.to_json_dict(),
        "typical_ues": {str(k): v for k, v in sorted(world.typical_ues.items())},
        "target_sector": world.target_sector,
    })
    _write_json(out / "deployment.json", doc)
    return out / "deployment.json"


def load_world(cfg, out_dir):
    doc = _read_json(Path(out_dir) / "deployment.json", "deploy")
    dep = Deployment.from_json_dict(doc)
    return build_world(cfg, dep)


def cmd_train_offline(cfg, out_dir):
    out = Path(out_dir)
    world = load_world(cfg, out)
    policy = meanfield_train(world, cfg.meanfield_config())
    beta = estimate_beta(policy, world, cfg["meanfield.beta_samples"])
    pol_doc = policy.to_json_dict()
    pol_doc.update({"config_hash": cfg.config_hash(), "seed": cfg.seed})
    _write_json(out / "meanfield.json", pol_doc)
    beta_doc = beta.to_json_dict()
    beta_doc.update({"config_hash": cfg.config_hash(), "seed": cfg.seed})
    _write_json(out / "beta.json", beta_doc)
    return policy, beta


def load_offline(cfg, out_dir):
    pol_doc = _read_json(Path(out_dir) / "meanfield.json", "offline")
    beta_doc = _read_json(Path(out_dir) / "beta.json", "offline")
    policy = MeanFieldPolicy.from_json_dict(pol_doc, cfg.action_space())
    return policy, BetaTable.from_json_dict(beta_doc)


def target_grid(cfg, world):
    boresight = world.dep.sectors[world.target_sector].boresight_deg
    return build_clusters(cfg.sector_geometry(boresight),
                          cfg["cluster.radial_res_km"], cfg["cluster.angular_res_deg"])


def cmd_train_dnn(cfg, out_dir):
    out = Path(out_dir)
    world = load_world(cfg, out)
    grid = target_grid(cfg, world)
    result = localization_experiment(
        world, grid,
        n_train=cfg["dnn.n_train"], n_test=cfg["dnn.n_test"],
        hyper=TrainHyper(cfg["dnn.learning_rate"], cfg["dnn.epochs"], seed=cfg.seed),
        obs_noise_db=cfg["dnn.obs_noise_db"],
        jitter_sigma_db=cfg["dnn.jitter_sigma_db"],
        input_index=cfg["dnn.input_cluster"], seed=cfg.seed,
        static_shadow_db=cfg["dnn.static_shadow_db"],
        activity_range_db=cfg["dnn.activity_range_db"])
    # the fingerprint frame the online observation will be read in: the static
    # campaign shadow and the full-load cluster values
    current = measure_cluster_values(world, grid, world.full_configs(),
                                     result["static_shadow"], 0.0)
    doc = result["net"].to_json_dict()
    doc.update({
        "config_hash": cfg.config_hash(), "seed": cfg.seed,
        "grid": grid.to_json_dict(),
        "input_cluster": cfg["dnn.input_cluster"],
        "static_shadow": result["static_shadow"].tolist(),
        "current_values": current.tolist(),
        "train_mse": result["losses"]["train_mse"],
        "test_mse": result["losses"]["test_mse"],
        "dnn_accuracy": result["dnn_accuracy"],
        "fingerprint_accuracy": result["fp_accuracy"],
    })
    _write_json(out / "locnet.json", doc)
    result["dataset"].to_csv(out / "locnet_train.csv")
    return result


def load_dnn(cfg, out_dir):
    doc = _read_json(Path(out_dir) / "locnet.json", "dnn")
    return (ClusterNet.from_json_dict(doc), ClusterGrid.from_json_dict(doc["grid"]),
            doc)


def cmd_train_online(cfg, out_dir, seed=None):
    out = Path(out_dir)
    world = load_world(cfg, out)
    policy, beta = load_offline(cfg, out)
    net, grid, dnn_doc = load_dnn(cfg, out)
    seed = cfg.seed if seed is None else seed
    ctx = build_feature_context(cfg, world, policy, beta, net, grid, dnn_doc, seed)
    env = OnlineEnv(world, lambda tc: policy.plan(world.target_sector, tc), seed)
    linq, info = run_online_training(env, ctx, cfg.online_hyper(seed))
    doc = {
        "version": 1, "kind": "online_policy",
        "config_hash": cfg.config_hash(), "seed": seed,
        "weights": linq.weights.tolist(),
        "mu": linq.learning_rate, "alpha": linq.discount,
        "trials": cfg["online.trials"],
        "gamma_q0_db": ctx.gamma_q0_db.tolist(),
        "cluster_assignments": [int(assign_ue(g, ctx._cluster_values))
                                for g in ctx._avg_sinrs],
        "cluster_angles": [list(a) for a in ctx.cluster_angles],
        "final_state": info["final_state"],
    }
    pol_map = extract_policy(linq, ctx, world.n_states(world.target_sector))
    doc["policy_map"] = [int(a) for a in pol_map]
    _write_json(out / "online.json", doc)
    with open(out / "policy_map.csv", "w", newline="", encoding="utf-8") as fh:
        wtr = csv.writer(fh)
        wtr.writerow(["state_index", "action_index"])
        for s, a in enumerate(pol_map):
            wtr.writerow([s, int(a)])
    return linq, ctx, pol_map


def load_online(cfg, out_dir, beta, world):
    doc = _read_json(Path(out_dir) / "online.json", "online")
    linq = LinearQ(np.asarray(doc["weights"], dtype=float), doc["mu"], doc["alpha"])
    ctx = FeatureContext(
        gamma_q0_db=np.asarray(doc["gamma_q0_db"], dtype=float),
        initial_config=world.initial_config,
        beta=beta,
        cluster_angles=[tuple(a) for a in doc["cluster_angles"]],
        action_space=world.action_space,
        noise_mw=world.radio.noise_mw)
    return linq, ctx, doc


def build_feature_context(cfg, world, policy, beta, net, grid, dnn_doc, seed):
    """Locate the typical UEs through the cluster net and anchor the features
    at the quantized SINRs observed under the initial configuration."""
    target = world.target_sector

    # one online cluster observation, read in the campaign frame, then the net
    # reconstructs every cluster value
    current = np.asarray(dnn_doc["current_values"], dtype=float)
    static = np.asarray(dnn_doc["static_shadow"], dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 607)))
    observed = current[dnn_doc["input_cluster"]] + rng.normal(0.0, cfg["dnn.obs_noise_db"])
    predicted = forward(net, observed)

    # each typical UE reports its long-term average SINR in the same frame;
    # the UE inherits the static shadow of its geometric cluster
    ue_ids = world.typical_ues[target]
    cluster_geo = [grid.membership(world.dist_km[target, u],
                                   world.phi_deg[target, u]) for u in ue_ids]
    shadow_cols = np.column_stack(
        [static[:, k] if k is not None else np.zeros(len(world.dep.sectors))
         for k in cluster_geo])
    avg_sinrs = point_sinrs(world, world.dep.ues[ue_ids], world.full_configs(),
                            shadow_cols, 0.0)
    assignments = [assign_ue(g, predicted) for g in avg_sinrs]
    angles = [grid.center_angles(k) for k in assignments
              for _ in range(world.v_streams)]

    # the feature anchor: quantized SINRs at the online start, neighbors
    # already answering through their equilibrium policies
    configs = world.full_configs(policy.plan(target, world.initial_config))
    configs[target] = world.initial_config
    field0 = world.sample_pico_field(
        np.random.default_rng(np.random.SeedSequence((seed, 608))))
    gamma0 = world.gammas_db(target, configs, field0)
    q = world.quantizer
    gamma_q0 = np.array([q.level_value(quantize_sinr(g, q)) for g in gamma0])

    ctx = FeatureContext(gamma_q0, world.initial_config, beta, angles,
                         world.action_space, world.radio.noise_mw)
    ctx._cluster_values = predicted          # kept for the artifact record
    ctx._avg_sinrs = avg_sinrs
    return ctx


# -- evaluation -------------------------------------------------------------------


@dataclass
class MetricsReport:
    seed: int
    config_hash: str
    preset: str
    eta: float
    proposed_action: int
    sinr_gain_db: float
    oracle_gain_db: float
    normalized_perf: float
    compact_band_width: int
    compact_band_lo: int
    loc_accuracy: float
    runtime_s: float

    def row(self):
        return [getattr(self, f.name) for f in fields(self)]

    @classmethod
    def header(cls):
        return [f.name for f in fields(cls)]


def append_metrics(path, report):
    p = Path(path)
    new = not p.exists()
    with open(p, "a", newline="", encoding="utf-8") as fh:
        wtr = csv.writer(fh)
        if new:
            wtr.writerow(MetricsReport.header())
        wtr.writerow(report.row())


def pico_sequence(world, n_periods, seed):
    rng = np.random.default_rng(np.random.SeedSequence((seed, 601)))
    return [world.sample_pico_field(rng) for _ in range(n_periods)]


def run_fixed_action(world, plan, target_cfg, fields_seq):
    """Per-period unquantized SINRs (horizon, n_streams) under one fixed config."""
    target = world.target_sector
    configs = world.full_configs(plan(target_cfg))
    configs[target] = target_cfg
    return np.array([world.gammas_db(target, configs, f) for f in fields_seq])


def weighted_sum_rate(gammas, weights):
    """Mean over periods of sum_u lambda_u * log2(1 + rho_u)."""
    rho = 10.0 ** (np.asarray(gammas, dtype=float) / 10.0)
    return float(np.mean(np.log2(1.0 + rho) @ np.asarray(weights, dtype=float)))


def oracle_best_action(world, plan, fields_seq, weights, max_actions=64):
    """Genie search over the whole action grid under common pico realizations."""
    space = world.action_space
    if len(space) > max_actions:
        raise HarnessError(
            f"action space of {len(space)} exceeds the oracle budget "
            f"{max_actions}; use the desk preset or raise eval.oracle_max_actions")
    rates = np.array([weighted_sum_rate(
        run_fixed_action(world, plan, space.config_at(a), fields_seq), weights)
        for a in range(len(space))])
    best = int(np.argmax(rates))
    return best, float(rates[best]), rates


def proposed_action_of(linq, ctx, state_index, initial_action):
    """Greedy action from the trained weights; an untrained (all-zero) learner
    keeps the antennas at the initial configuration."""
    if not np.any(ctx is not None and np.abs(linq.weights) > 0):
        return initial_action
    return greedy_action(linq, ctx, state_index)


def cmd_evaluate(cfg, out_dir, seed=None, with_oracle=True):
    t0 = time.monotonic()
    out = Path(out_dir)
    world = load_world(cfg, out)
    policy, beta = load_offline(cfg, out)
    _, _, dnn_doc = load_dnn(cfg, out)
    linq, ctx, online_doc = load_online(cfg, out, beta, world)
    seed = cfg.seed if seed is None else seed
    target = world.target_sector

    def plan(tcfg):
        return policy.plan(target, tcfg)

    horizon = cfg["eval.horizon"]
    fields_seq = pico_sequence(world, horizon, seed)
    weights = world.reward_cfg.stream_weights(world.n_streams(target))

    gam_init = run_fixed_action(world, plan, world.initial_config, fields_seq)
    state0 = world.state_of(gam_init[0])
    r_init = weighted_sum_rate(gam_init, weights)

    a_prop = proposed_action_of(linq, ctx, state0.index, world.initial_action)
    gam_prop = run_fixed_action(world, plan, world.action_space.config_at(a_prop),
                                fields_seq)
    r_prop = weighted_sum_rate(gam_prop, weights)
    sinr_gain = float(np.mean(gam_prop.mean(axis=0) - gam_init.mean(axis=0)))

    oracle_gain = float("nan")
    normalized = float("nan")
    if with_oracle and len(world.action_space) <= cfg["eval.oracle_max_actions"]:
        a_star, r_star, _ = oracle_best_action(world, plan, fields_seq, weights,
                                               cfg["eval.oracle_max_actions"])
        gam_star = run_fixed_action(world, plan, world.action_space.config_at(a_star),
                                    fields_seq)
        oracle_gain = float(np.mean(gam_star.mean(axis=0) - gam_init.mean(axis=0)))
        denom = r_star - r_init
        normalized = float((r_prop - r_init) / denom) if abs(denom) > 1e-12 else 1.0

    eta = relative_variance(world, beta, cfg["eval.eta_samples"], seed)
    pol_map = extract_policy(linq, ctx, world.n_states(target))
    _, band_w, band_lo = policy_compactness(pol_map, len(world.action_space))

    report = MetricsReport(
        seed=seed, config_hash=cfg.config_hash(), preset=cfg.preset, eta=eta,
        proposed_action=a_prop, sinr_gain_db=sinr_gain, oracle_gain_db=oracle_gain,
        normalized_perf=normalized, compact_band_width=band_w,
        compact_band_lo=band_lo, loc_accuracy=dnn_doc["dnn_accuracy"],
        runtime_s=round(time.monotonic() - t0, 3))
    append_metrics(out / "metrics.csv", report)
    return report


def cmd_oracle(cfg, out_dir, seed=None):
    out = Path(out_dir)
    world = load_world(cfg, out)
    policy, _ = load_offline(cfg, out)
    seed = cfg.seed if seed is None else seed
    target = world.target_sector
    fields_seq = pico_sequence(world, cfg["eval.horizon"], seed)
    weights = world.reward_cfg.stream_weights(world.n_streams(target))
    best, rate, rates = oracle_best_action(
        world, lambda tc: policy.plan(target, tc), fields_seq, weights,
        cfg["eval.oracle_max_actions"])
    doc = {"version": 1, "kind": "oracle", "config_hash": cfg.config_hash(),
           "seed": seed, "best_action": best, "best_sum_rate": rate,
           "sum_rates": rates.tolist()}
    _write_json(out / "oracle.json", doc)
    return best, rate


def run_pipeline(cfg, out_dir, with_oracle=True):
    cmd_deploy(cfg, out_dir)
    cmd_train_offline(cfg, out_dir)
    cmd_train_dnn(cfg, out_dir)
    cmd_train_online(cfg, out_dir)
    return cmd_evaluate(cfg, out_dir, with_oracle=with_oracle)


# -- eta sweep ----------------------------------------------------------------------


def measure_eta(cfg, out_dir, density_mult, samples=None, seed=None):
    cfg_point = cfg.with_overrides(sim__pico_density_mult=density_mult)
    world = load_world(cfg_point, out_dir)
    _, beta = load_offline(cfg_point, out_dir)
    return relative_variance(world, beta, samples or cfg["eval.eta_samples"],
                             cfg.seed if seed is None else seed)


CALIBRATION_SAMPLES = 4000


def calibrate_density_mult(cfg, out_dir, eta_target, max_mult=64.0):
    """Pico-density multiplier realizing a target eta.

    The shot-noise variance of a Poisson field is linear in its density
    (Campbell), so one linear correction suffices; the variance estimate is
    heavy-tailed and needs a large sample count.
    """
    if eta_target <= 0:
        return 0.0, 0.0, False
    eta_ref = measure_eta(cfg, out_dir, 1.0, samples=CALIBRATION_SAMPLES)
    if eta_ref <= 0:
        return max_mult, 0.0, True
    mult = min(max(eta_target / eta_ref, 1e-3), max_mult)
    measured = measure_eta(cfg, out_dir, mult, samples=CALIBRATION_SAMPLES)
    unreachable = bool(abs(measured - eta_target) > 0.5 * eta_target)
    return mult, measured, unreachable


def cmd_sweep_eta(cfg, out_dir, eta_targets, n_seeds=20):
    """Fig.-4-style curve: per target eta, retrain online and evaluate over
    seeds against the oracle; emits sweep.csv."""
    out = Path(out_dir)
    rows = []
    for eta_target in eta_targets:
        mult, measured, unreachable = calibrate_density_mult(cfg, out, eta_target)
        cfg_point = cfg.with_overrides(sim__pico_density_mult=mult)
        normals, gains = [], []
        for k in range(n_seeds):
            seed = cfg.seed + 1000 + k
            cmd_train_online(cfg_point, out, seed=seed)
            rep = cmd_evaluate(cfg_point, out, seed=seed)
            normals.append(rep.normalized_perf)
            gains.append(rep.sinr_gain_db)
        rows.append({
            "eta_target": eta_target, "density_mult": mult, "eta_measured": measured,
            "normalized_mean": float(np.mean(normals)),
            "normalized_std": float(np.std(normals)),
            "sinr_gain_mean_db": float(np.mean(gains)),
            "n_seeds": n_seeds, "flag": "unreachable" if unreachable else "ok"})
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        wtr = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        wtr.writeheader()
        wtr.writerows(rows)
    return rows


# -- baselines -------------------------------------------------------------------


class StochasticWorldView:
    """World proxy whose observations draw a fresh pico field every period;
    this is the environment the online mean-field baseline trains in."""

    def __init__(self, world, seed):
        self._world = world
        self._rng = np.random.default_rng(np.random.SeedSequence((seed, 223)))

    def __getattr__(self, name):
        return getattr(self._world, name)

    def observe(self, agent, configs, pico_field=None):
        if pico_field is None:
            pico_field = self._world.sample_pico_field(self._rng)
        return self._world.observe(agent, configs, pico_field)


class GenieWorldView(StochasticWorldView):
    """The optimum-tier environment: the online mean-field baseline gets the
    true (unquantized) SINRs instead of the CQI-quantized reports, matching
    its role as the genie-aided optimum."""

    def observe(self, agent, configs, pico_field=None):
        from .mdp import immediate_reward

        s, _, g = super().observe(agent, configs, pico_field)
        radio = self._world.radio
        acks = [x >= radio.gamma_min_db for x in g]
        r = immediate_reward(g, acks, self._world.reward_cfg)
        return s, r, g


def cmd_compare_baselines(cfg, out_dir, n_seeds=20):
    """SINR gains of {proposed two-step, online mean-field, classical
    single-agent tabular} under common evaluation realizations per seed."""
    from dataclasses import replace

    out = Path(out_dir)
    world = load_world(cfg, out)
    policy, beta = load_offline(cfg, out)
    net, grid, dnn_doc = load_dnn(cfg, out)
    target = world.target_sector
    horizon = cfg["eval.horizon"]
    weights = world.reward_cfg.stream_weights(world.n_streams(target))

    def plan(tcfg):
        return policy.plan(target, tcfg)

    rows = []
    for k in range(n_seeds):
        seed = cfg.seed + 2000 + k
        fields_seq = pico_sequence(world, horizon, seed)
        gam_init = run_fixed_action(world, plan, world.initial_config, fields_seq)
        state0 = world.state_of(gam_init[0])
        base = gam_init.mean(axis=0)

        def gain_of(action_idx):
            gam = run_fixed_action(
                world, plan, world.action_space.config_at(action_idx), fields_seq)
            return float(np.mean(gam.mean(axis=0) - base))

        ctx = build_feature_context(cfg, world, policy, beta, net, grid,
                                    dnn_doc, seed)
        env = OnlineEnv(world, plan, seed)
        linq, _ = run_online_training(env, ctx, cfg.online_hyper(seed))
        a_prop = proposed_action_of(linq, ctx, state0.index, world.initial_action)

        env_tab = OnlineEnv(world, plan, seed + 50000)
        qtab, _ = run_tabular_training(env_tab, cfg.online_hyper(seed),
                                       len(world.action_space))
        a_single = qtab.greedy(state0.index)

        stochastic = world.pico_model is not None and world.pico_model.density_per_km2 > 0
        mf_cfg = replace(cfg.meanfield_config(), seed=seed,
                         episode_steps=cfg["meanfield.episode_steps"] * 4,
                         learning_rate=0.5 if stochastic else
                         cfg["meanfield.learning_rate"],
                         calibrate=False)
        mf_policy = meanfield_train(GenieWorldView(world, seed), mf_cfg)
        a_mf = mf_policy.eq_action[target]

        for method, action in (("meanfield_online", a_mf), ("proposed", a_prop),
                               ("single_agent", a_single)):
            rows.append({"seed": seed, "method": method, "action": action,
                         "sinr_gain_db": gain_of(action)})
    path = out / "baselines.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wtr = csv.DictWriter(fh, fieldnames=["seed", "method", "action", "sinr_gain_db"])
        wtr.writeheader()
        wtr.writerows(rows)
    return rows


# -- cluster-localization experiment ------------------------------------------------


def _point_geometry(world, pts):
    """Per-sector (distance km, boresight offset deg, elevation deg) to points."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    n_sec = len(world.dep.sectors)
    hs = world.dep.cfg.macro_height_m
    hu = world.dep.cfg.ue_height_m
    d = np.empty((n_sec, len(pts)))
    phi = np.empty_like(d)
    theta = np.empty_like(d)
    for si, sec in enumerate(world.dep.sectors):
        dx = pts[:, 0] - sec.x_km
        dy = pts[:, 1] - sec.y_km
        d[si] = np.hypot(dx, dy)
        az = np.degrees(np.arctan2(dy, dx))
        off = az - sec.boresight_deg
        phi[si] = off - 360.0 * np.floor(off / 360.0)
        phi[si] = np.where(phi[si] > 180.0, phi[si] - 360.0, phi[si])
        theta[si] = np.degrees(np.arctan2((hs - hu) / 1000.0, d[si]))
    return d, phi, theta


def point_sinrs(world, pts, configs, shadow_db=None, activity_db=0.0):
    """Macro-only SINR at arbitrary positions, serving the target sector.

    shadow_db: optional (n_sectors, n_points) large-scale realization.
    activity_db: load offset (<= 0) applied to every interfering sector.
    """
    from .radio import antenna_gain, path_loss

    d, phi, theta = _point_geometry(world, pts)
    r = world.radio
    rx = np.empty_like(d)
    for si in range(d.shape[0]):
        cfg = configs[si]
        dbm = (r.macro_tx_power_dbm + r.macro_max_gain_dbi
               + antenna_gain(phi[si], theta[si], cfg) - path_loss("macro", d[si]))
        if si != world.target_sector:
            dbm = dbm + activity_db
        rx[si] = mw_from_dbm(dbm if shadow_db is None else dbm - shadow_db[si])
    serving = rx[world.target_sector]
    interf = rx.sum(axis=0) - serving
    return 10.0 * np.log10(serving / (interf + r.noise_mw))


def cluster_centers_xy(world, grid):
    sec = world.dep.sectors[world.target_sector]
    pts = []
    for k in range(len(grid)):
        rad, az = grid.center(k)
        ang = np.radians(sec.boresight_deg + az)
        pts.append([sec.x_km + rad * np.cos(ang), sec.y_km + rad * np.sin(ang)])
    return np.asarray(pts)


def measure_cluster_values(world, grid, configs, shadow_db=None, activity_db=0.0):
    return point_sinrs(world, cluster_centers_xy(world, grid), configs, shadow_db,
                       activity_db)


def campaign_shadow(world, grid, sigma_db, seed):
    """The static cluster-level shadow field of the measurement campaign: one
    draw per (sector, cluster), frozen geography for the whole experiment."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 617)))
    return rng.normal(0.0, sigma_db, size=(len(world.dep.sectors), len(grid)))


def _sample_environment(world, grid, rng, static_shadow, jitter_sigma_db,
                        activity_range_db, obs_noise_db):
    """One campaign realization.

    The neighboring tier runs at a random common load level, per-(sector,
    cluster) jitter models measurement spread, and each cluster's value is the
    average reported SINR of the UEs drawn inside it this realization.
    Returns (cluster values, per-UE reported SINRs, their true clusters).
    """
    configs = world.full_configs()
    activity = float(rng.uniform(-activity_range_db, 0.0))
    shadow = static_shadow + rng.normal(0.0, jitter_sigma_db, static_shadow.shape)
    pts, truth = _place_ues(world, grid, rng)
    sinrs = point_sinrs(world, pts, configs, shadow[:, truth], activity)
    reported = sinrs + rng.normal(0.0, obs_noise_db, len(sinrs))
    values = np.zeros(len(grid))
    counts = np.zeros(len(grid))
    for g, t in zip(reported, truth):
        values[t] += g
        counts[t] += 1
    values = values / np.maximum(counts, 1)
    return values, reported, truth


def _place_ues(world, grid, rng):
    """One UE per cluster, uniform in area within its bin; returns (xy, truth)."""
    sec = world.dep.sectors[world.target_sector]
    pts, truth = [], []
    for k in range(len(grid)):
        ri, ai = divmod(k, grid.n_angular)
        r_lo = grid.geom.inner_radius_km + ri * grid.radial_res_km
        r_hi = r_lo + grid.radial_res_km
        rad = float(np.sqrt(rng.uniform(r_lo ** 2, r_hi ** 2)))
        az = (-grid.geom.span_deg / 2.0 + ai * grid.angular_res_deg
              + rng.uniform(0.0, grid.angular_res_deg))
        ang = np.radians(sec.boresight_deg + az)
        pts.append([sec.x_km + rad * np.cos(ang), sec.y_km + rad * np.sin(ang)])
        truth.append(k)
    return np.asarray(pts), truth


def localization_experiment(world, grid, n_train, n_test, hyper, obs_noise_db,
                            jitter_sigma_db, input_index, seed,
                            static_shadow_db=10.0, activity_range_db=12.0):
    """Generate the offline cluster-vector dataset, train the net, and score
    DNN versus plain-fingerprint UE assignment on held-out realizations.

    Success means a test UE's reported average SINR lies closest to the
    predicted value of the cluster it is actually in.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 613)))
    static = campaign_shadow(world, grid, static_shadow_db, seed)
    train_labels, test_runs = [], []
    for i in range(n_train + n_test):
        values, reported, truth = _sample_environment(
            world, grid, rng, static, jitter_sigma_db, activity_range_db,
            obs_noise_db)
        if i < n_train:
            train_labels.append(values)
        else:
            test_runs.append((values, reported, truth))
    train_labels = np.asarray(train_labels)
    test_labels = np.asarray([v for v, _, _ in test_runs])
    data = TrainingSet(
        input_index=input_index,
        train_inputs=train_labels[:, input_index]
        + rng.normal(0.0, obs_noise_db, n_train),
        train_labels=train_labels,
        test_inputs=test_labels[:, input_index]
        + rng.normal(0.0, obs_noise_db, n_test),
        test_labels=test_labels)
    net, losses = train_net(data, hyper)
    fingerprint = fingerprint_baseline(train_labels)

    dnn_hits, fp_hits, total = 0, 0, 0
    for (values, reported, truth), obs in zip(test_runs, data.test_inputs):
        predicted = forward(net, float(obs))
        for g, t in zip(reported, truth):
            dnn_hits += int(assign_ue(g, predicted) == t)
            fp_hits += int(assign_ue(g, fingerprint) == t)
            total += 1
    return {"net": net, "losses": losses, "dataset": data, "static_shadow": static,
            "dnn_accuracy": dnn_hits / total, "fp_accuracy": fp_hits / total}
