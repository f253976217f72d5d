"""
meanfield.py: offline multi-agent mean-field Q-learning.

Each agent sector learns a tabular Q over (state, own action, discretized mean
neighbor action) against a frozen snapshot of its neighbors, the equilibrium
mean actions are recomputed between sweeps, and the result feeds the beta(s, a)
interference table consumed by the online features.
"""
from dataclasses import dataclass, field

import numpy as np

from .mdp import ActionSpace
from .online import EpsilonSchedule, eps_greedy_select
from .radio import AntennaConfig

NO_NEIGHBOR_CELL = -1


def mean_action(configs):
    """Componentwise arithmetic mean of antenna configs; may land off-grid."""
    if len(configs) == 0:
        raise ValueError("mean action of an empty neighbor set")
    arr = np.array([c.as_tuple() for c in configs], dtype=float)
    t, v, h = arr.mean(axis=0)
    return AntennaConfig(float(t), float(v), float(h))


@dataclass(frozen=True)
class MeanFieldTrainerConfig:
    # the offline environment is deterministic, so a unit learning rate makes
    # the TD sweep exact asynchronous value iteration; lower it for noisy
    # (online) environments
    learning_rate: float = 1.0
    discount: float = 0.9
    t_eps: int = 10
    sweeps: int = 12
    episode_steps: int = 48
    tol_deg: float = 0.5
    n_neighbors: int = None        # None = every other agent
    switch_prob: float = 0.5       # inertia against simultaneous-response cycles
    seed: int = 0
    calibrate: bool = True

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("iteration budget must be >= 1")
        if self.tol_deg <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class MeanFieldPolicy:
    action_space: ActionSpace
    agents: list
    neighbors: dict                 # agent -> neighbor agent ids
    q: dict                         # agent -> {(state, cell): np.ndarray(|A|)}
    eq_action: dict                 # agent -> equilibrium action index
    eq_state: dict                  # agent -> last observed state index
    abar: dict                      # agent -> continuous mean neighbor action tuple
    converged: bool = False

    def cell_of(self, cfg):
        return self.action_space.index_of(self.action_space.nearest(cfg))

    def greedy(self, agent, state, cell):
        """Greedy action at a (state, mean-action cell); untrained rows fall
        back to the agent's equilibrium action."""
        row = self.q[agent].get((state, cell))
        if row is None:
            return self.eq_action[agent]
        return int(np.argmax(row))

    def respond(self, agent, abar_cfg):
        """The agent's policy response to a given neighbor mean action."""
        if not self.neighbors[agent]:
            return self.eq_action[agent]
        return self.greedy(agent, self.eq_state[agent], self.cell_of(abar_cfg))

    def equilibrium_configs(self):
        return {k: self.action_space.config_at(self.eq_action[k]) for k in self.agents}

    def plan(self, target, target_cfg):
        """Per-sector configs when the target deviates to target_cfg and every
        other agent answers through its equilibrium policy."""
        eq = self.equilibrium_configs()
        out = {}
        for j in self.agents:
            if j == target:
                continue
            neigh = self.neighbors[j]
            if neigh:
                cfgs = [target_cfg if n == target else eq[n] for n in neigh]
                out[j] = self.action_space.config_at(self.respond(j, mean_action(cfgs)))
            else:
                out[j] = eq[j]
        return out

    def to_json_dict(self):
        return {
            "version": 1,
            "kind": "meanfield_policy",
            "agents": list(self.agents),
            "neighbors": {str(k): v for k, v in sorted(self.neighbors.items())},
            "eq_action": {str(k): int(v) for k, v in sorted(self.eq_action.items())},
            "eq_state": {str(k): int(v) for k, v in sorted(self.eq_state.items())},
            "abar": {str(k): list(v) for k, v in sorted(self.abar.items())},
            "q": {str(k): {f"{s},{c}": rows.tolist() for (s, c), rows in sorted(tab.items())}
                  for k, tab in sorted(self.q.items())},
            "converged": self.converged,
        }

    @classmethod
    def from_json_dict(cls, doc, action_space):
        if doc.get("kind") != "meanfield_policy" or doc.get("version") != 1:
            raise ValueError("not a version-1 mean-field policy document")
        q = {}
        for k, tab in doc["q"].items():
            rows = {}
            for key, vals in tab.items():
                s, c = key.split(",")
                rows[(int(s), int(c))] = np.asarray(vals, dtype=float)
            q[int(k)] = rows
        return cls(
            action_space=action_space,
            agents=[int(a) for a in doc["agents"]],
            neighbors={int(k): list(v) for k, v in doc["neighbors"].items()},
            q=q,
            eq_action={int(k): int(v) for k, v in doc["eq_action"].items()},
            eq_state={int(k): int(v) for k, v in doc["eq_state"].items()},
            abar={int(k): tuple(v) for k, v in doc["abar"].items()},
            converged=bool(doc["converged"]),
        )


def _episode(world, policy, agent, cell, configs, steps, lr, discount, sched, rng):
    """One TD episode for a single agent against frozen neighbors.

    Behavior is epsilon-greedy (schedule restarted per episode); the update
    bootstraps on the greedy next action so the values settle even under the
    constant learning rate.
    """
    tab = policy.q[agent]
    n_actions = len(policy.action_space)

    def row(state):
        key = (state, cell)
        if key not in tab:
            tab[key] = np.zeros(n_actions)
        return tab[key]

    s, _, _ = world.observe(agent, configs)
    a = eps_greedy_select(row(s.index), sched.value(0), rng)
    for t in range(steps):
        configs[agent] = policy.action_space.config_at(a)
        s2, r, _ = world.observe(agent, configs)
        cur = row(s.index)
        target = r + discount * row(s2.index)[int(np.argmax(row(s2.index)))]
        cur[a] = cur[a] + lr * (target - cur[a])
        a = eps_greedy_select(row(s2.index), sched.value(t + 1), rng)
        s = s2
    return s.index


def meanfield_train(world, cfg):
    """Alternate per-agent TD sweeps against frozen neighbor mean actions with
    equilibrium recomputation until the means move less than the tolerance."""
    space = world.action_space
    agents = list(world.agents)
    neighbors = {k: world.neighbor_agents(k, cfg.n_neighbors) for k in agents}
    policy = MeanFieldPolicy(
        action_space=space, agents=agents, neighbors=neighbors,
        q={k: {} for k in agents},
        eq_action={k: world.initial_action for k in agents},
        eq_state={k: 0 for k in agents},
        abar={k: world.initial_config.as_tuple() for k in agents},
    )
    prev_abar = None
    for sweep in range(cfg.sweeps):
        snapshot = world.full_configs(policy.equilibrium_configs())
        abar = {}
        for k in agents:
            if neighbors[k]:
                abar[k] = mean_action([snapshot[j] for j in neighbors[k]]).as_tuple()
            else:
                abar[k] = snapshot[k].as_tuple()
        new_actions = {}
        pending = False
        inertia_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 402, sweep)))
        for k in agents:
            cell = (policy.cell_of(AntennaConfig(*abar[k]))
                    if neighbors[k] else NO_NEIGHBOR_CELL)
            rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 401, sweep, k)))
            configs = dict(snapshot)
            last_state = _episode(
                world, policy, k, cell, configs, cfg.episode_steps,
                cfg.learning_rate, cfg.discount, EpsilonSchedule(cfg.t_eps), rng)
            policy.eq_state[k] = last_state
            cand = policy.greedy(k, last_state, cell)
            # random inertia keeps simultaneous best responses from 2-cycling
            if cand != policy.eq_action[k] and inertia_rng.random() > cfg.switch_prob:
                pending = True
                cand = policy.eq_action[k]
            new_actions[k] = cand
        policy.eq_action = new_actions
        policy.abar = abar
        if prev_abar is not None and not pending:
            delta = max(abs(a - b) for k in agents
                        for a, b in zip(abar[k], prev_abar[k]))
            if delta < cfg.tol_deg:
                policy.converged = True
                break
        prev_abar = abar
    _settle_equilibrium(world, policy)
    if cfg.calibrate and world.target_sector in agents:
        _calibrate_responses(world, policy, cfg)
    return policy


def _settle_equilibrium(world, policy, rounds=8):
    """Align (state, mean action, action) into a fixed point of the trained
    greedy responses so that exact reward ties resolve consistently."""
    for _ in range(rounds):
        changed = False
        for k in policy.agents:
            eq_cfgs = world.full_configs(policy.equilibrium_configs())
            if policy.neighbors[k]:
                abar_k = mean_action([eq_cfgs[j] for j in policy.neighbors[k]])
                cell = policy.cell_of(abar_k)
                policy.abar[k] = abar_k.as_tuple()
            else:
                cell = NO_NEIGHBOR_CELL
                policy.abar[k] = eq_cfgs[k].as_tuple()
            s, _, _ = world.observe(k, eq_cfgs)
            policy.eq_state[k] = s.index
            a = policy.greedy(k, s.index, cell)
            if a != policy.eq_action[k]:
                policy.eq_action[k] = a
                changed = True
        if not changed:
            return


def _calibrate_responses(world, policy, cfg):
    """Make sure every neighbor has a trained Q row for each mean-action cell a
    single target deviation can produce, so beta(s, a) never reads defaults."""
    target = world.target_sector
    eq = policy.equilibrium_configs()
    for ai in range(len(policy.action_space)):
        a_cfg = policy.action_space.config_at(ai)
        for j in policy.agents:
            if j == target or target not in policy.neighbors[j]:
                continue
            cfgs = [a_cfg if n == target else eq[n] for n in policy.neighbors[j]]
            cell = policy.cell_of(mean_action(cfgs))
            if (policy.eq_state[j], cell) in policy.q[j]:
                continue
            rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 403, ai, j)))
            configs = world.full_configs(eq)
            configs[target] = a_cfg
            last_state = _episode(
                world, policy, j, cell, configs, cfg.episode_steps,
                cfg.learning_rate, cfg.discount, EpsilonSchedule(cfg.t_eps), rng)
            if (policy.eq_state[j], cell) not in policy.q[j]:
                policy.q[j][(policy.eq_state[j], cell)] = \
                    policy.q[j][(last_state, cell)]


@dataclass
class BetaTable:
    """Expected macro-tier interference (linear mW) at each typical UE of the
    target cell, indexed by the target's action; replicated across states."""
    ue_ids: list
    values: np.ndarray             # (n_ues, n_actions)
    beta0: np.ndarray              # (n_ues,), entry at the initial action
    initial_action: int
    state_independent: bool = True

    def value(self, ue_slot, state_index, action_index):
        return float(self.values[ue_slot, action_index])

    def to_json_dict(self):
        return {
            "version": 1,
            "kind": "beta_table",
            "ue_ids": list(self.ue_ids),
            "values_mw": self.values.tolist(),
            "beta0_mw": self.beta0.tolist(),
            "initial_action": int(self.initial_action),
        }

    @classmethod
    def from_json_dict(cls, doc):
        if doc.get("kind") != "beta_table" or doc.get("version") != 1:
            raise ValueError("not a version-1 beta table document")
        return cls(ue_ids=list(doc["ue_ids"]),
                   values=np.asarray(doc["values_mw"], dtype=float),
                   beta0=np.asarray(doc["beta0_mw"], dtype=float),
                   initial_action=int(doc["initial_action"]))


def estimate_beta(policy, world, samples_per_cell=8):
    """Monte Carlo beta(s, a): neighbors answer the target's action through
    their equilibrium policies; macro-tier interference is averaged per UE."""
    if samples_per_cell <= 0:
        raise ValueError("samples_per_cell must be >= 1")
    target = world.target_sector
    ue_ids = list(world.typical_ues[target])
    space = world.action_space
    values = np.zeros((len(ue_ids), len(space)))
    for ai in range(len(space)):
        cfg = space.config_at(ai)
        configs = world.full_configs(policy.plan(target, cfg))
        configs[target] = cfg
        acc = np.zeros(len(ue_ids))
        for _ in range(samples_per_cell):
            acc += world.macro_interference_mw(target, configs)
        values[:, ai] = acc / samples_per_cell
    v = getattr(world, "v_streams", 1)
    if v > 1:           # one table row per stream, streams of a UE coincide
        values = np.repeat(values, v, axis=0)
        ue_ids = [u for u in ue_ids for _ in range(v)]
    init = world.initial_action
    return BetaTable(ue_ids, values, values[:, init].copy(), init)


def relative_variance(world, beta, samples=200, seed=0):
    """eta: variance of the small-cell interference over placement/shadowing
    draws, normalized by the mean of the beta table."""
    denom = float(np.mean(beta.values))
    if denom <= 0.0:
        raise ValueError("undefined eta")
    if world.pico_model is None or world.pico_model.density_per_km2 == 0.0:
        return 0.0
    rng = np.random.default_rng(np.random.SeedSequence((seed, 419)))
    ue_ids = world.typical_ues[world.target_sector]
    draws = np.empty((samples, len(ue_ids)))
    for i in range(samples):
        field = world.sample_pico_field(rng)
        draws[i] = world.small_cell_interference_mw(ue_ids, field)
    if samples < 2:
        return 0.0
    return float(np.mean(np.var(draws, axis=0, ddof=1)) / denom)


def check_equilibrium_stability(policy, world, trials=100, seed=0):
    """Empirical content of the equilibrium-preservation claim: re-run greedy
    selection under random small-cell draws and report how far the mean
    neighbor action drifts from the offline equilibrium (degrees)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 421)))
    eq_cfgs = world.full_configs(policy.equilibrium_configs())
    picks = {k: [] for k in policy.agents}
    for _ in range(trials):
        field = world.sample_pico_field(rng)
        for k in policy.agents:
            s, _, _ = world.observe(k, eq_cfgs, field)
            cell = (policy.cell_of(AntennaConfig(*policy.abar[k]))
                    if policy.neighbors[k] else NO_NEIGHBOR_CELL)
            a = policy.greedy(k, s.index, cell) if (s.index, cell) in policy.q[k] \
                else policy.eq_action[k]
            picks[k].append(policy.action_space.config_at(a).as_tuple())
    max_dev = 0.0
    for k in policy.agents:
        if not policy.neighbors[k]:
            continue
        mean_neigh = np.mean([np.mean([picks[j][t] for j in policy.neighbors[k]], axis=0)
                              for t in range(trials)], axis=0)
        dev = np.max(np.abs(mean_neigh - np.asarray(policy.abar[k])))
        max_dev = max(max_dev, float(dev))
    return max_dev
