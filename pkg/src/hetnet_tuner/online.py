"""
online.py: online single-agent Q-learning with linear function approximation,
plus the plain tabular learner used as the classical baseline.

The feature of a (state, action) pair predicts the post-action per-stream SINR
in dB: initial quantized SINR, plus the pattern-gain delta at the UE's cluster
angles, minus the dB-scale change of the offline-learned macro interference.
"""
from dataclasses import dataclass, field

import numpy as np

from .radio import antenna_gain


@dataclass
class LinearQ:
    weights: np.ndarray
    learning_rate: float = 0.8
    discount: float = 0.9


@dataclass(frozen=True)
class EpsilonSchedule:
    t_eps: int = 10

    def value(self, n):
        """epsilon = 1/k with k = 1 + floor(n / T_eps); the first period runs at 1."""
        if n < 0:
            raise ValueError("n must be >= 0")
        return 1.0 / (1 + n // self.t_eps)


def epsilon_value(n, sched):
    return sched.value(n)


def eps_greedy_select(q_values, epsilon, rng):
    """Greedy with prob 1-eps, uniform over all actions with prob eps.

    Overall the greedy action is taken with 1 - eps + eps/|A| and every other
    action with eps/|A|; greedy ties break to the lowest index.
    """
    q = np.asarray(q_values, dtype=float)
    if q.size == 0:
        raise ValueError("empty action set")
    if rng.random() < epsilon:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


@dataclass
class FeatureContext:
    gamma_q0_db: np.ndarray        # initial quantized SINR per stream (dB values)
    initial_config: object         # AntennaConfig applied at n = 0
    beta: object                   # BetaTable
    cluster_angles: list           # per stream (phi_deg, theta_deg), None if unlocated
    action_space: object
    noise_mw: float


def features(state_index, action_index, ctx):
    """x_u = gamma_q0_u + dA_u(a) - dBeta_u(s, a), one entry per stream."""
    cfg = ctx.action_space.config_at(action_index)
    x = np.empty(len(ctx.gamma_q0_db))
    for u, g0 in enumerate(ctx.gamma_q0_db):
        ang = ctx.cluster_angles[u]
        if ang is None:
            raise ValueError("unlocated UE")
        phi, theta = ang
        da = (antenna_gain(phi, theta, cfg)
              - antenna_gain(phi, theta, ctx.initial_config))
        b = ctx.beta.value(u, state_index, action_index)
        b0 = ctx.beta.beta0[u]
        dbeta = 10.0 * np.log10((b + ctx.noise_mw) / (b0 + ctx.noise_mw))
        x[u] = g0 + da - dbeta
    return x


def q_hat(x, w):
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise ValueError("feature/weight length mismatch")
    return float(np.dot(x, w))


SUM_GUARD = 1e-9


def update_w(w, r, x, x_next, mu, alpha, normalize=True):
    """One TD step w += mu*(r + alpha*q(s',a') - x.w)*x followed by the
    sum-to-one normalization w /= sum(w).

    The division is skipped only when |sum(w)| is inside the guard, where it
    would blow up; a negative sum divides through and flips the weights back
    positive, which is what keeps penalty-driven sign excursions transient.
    """
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    target = r + alpha * float(np.dot(x_next, w))
    if not np.isfinite(target):
        raise ValueError("diverged")
    delta = target - float(np.dot(x, w))
    w_new = w + (mu * delta) * x
    if normalize:
        total = float(np.sum(w_new))
        if abs(total) > SUM_GUARD:
            w_new = w_new / total
    return w_new


@dataclass(frozen=True)
class OnlineHyper:
    mu: float = 0.8
    alpha: float = 0.9
    t_eps: int = 10
    trials: int = 200
    seed: int = 0


def action_values(state_index, ctx, w):
    return np.array([q_hat(features(state_index, a, ctx), w)
                     for a in range(len(ctx.action_space))])


def run_online_training(env, ctx, hyper):
    """Feature-based SARSA over the online environment (the paper's training
    loop: epsilon-greedy action selection, TD update of w, normalization)."""
    n_streams = len(ctx.gamma_q0_db)
    w = np.zeros(n_streams)
    sched = EpsilonSchedule(hyper.t_eps)
    rng = np.random.default_rng(np.random.SeedSequence((hyper.seed, 307)))
    s, _ = env.observe_initial()
    a = eps_greedy_select(action_values(s.index, ctx, w), sched.value(0), rng)
    rewards = []
    for n in range(hyper.trials):
        s2, r, _ = env.step(a)
        x = features(s.index, a, ctx)
        a2 = eps_greedy_select(action_values(s2.index, ctx, w), sched.value(n + 1), rng)
        x2 = features(s2.index, a2, ctx)
        w = update_w(w, r, x, x2, hyper.mu, hyper.alpha)
        rewards.append(r)
        s, a = s2, a2
    return LinearQ(w, hyper.mu, hyper.alpha), {"rewards": rewards, "final_state": s.index}


def greedy_action(linq, ctx, state_index):
    return int(np.argmax(action_values(state_index, ctx, linq.weights)))


def extract_policy(linq, ctx, n_states):
    """Greedy action per state over the whole state space.

    With the action-factorized beta table the features do not depend on the
    state, so the per-state action values coincide and one argmax serves all
    states; fall back to the per-state loop otherwise.
    """
    if getattr(ctx.beta, "state_independent", False):
        a = greedy_action(linq, ctx, 0)
        return np.full(n_states, a, dtype=int)
    return np.array([greedy_action(linq, ctx, s) for s in range(n_states)])


# -- tabular baseline ----------------------------------------------------------


@dataclass
class TabularQ:
    """Sparse state-action value table; unseen pairs read as 0."""
    n_actions: int
    mu: float = 0.8
    alpha: float = 0.9
    table: dict = field(default_factory=dict)

    def get(self, s, a):
        return self.table.get((s, a), 0.0)

    def row(self, s):
        return np.array([self.get(s, a) for a in range(self.n_actions)])

    def greedy(self, s):
        return int(np.argmax(self.row(s)))


def tabular_q_update(q, s, a, r, s_next, a_next, mu, alpha):
    """Q(s,a) += mu * (r + alpha*Q(s',a') - Q(s,a)); returns the table."""
    if a < 0 or a >= q.n_actions or a_next < 0 or a_next >= q.n_actions:
        raise ValueError("action index out of range")
    target = r + alpha * q.get(s_next, a_next)
    cur = q.get(s, a)
    q.table[(s, a)] = cur + mu * (target - cur)
    return q


def run_tabular_training(env, hyper, n_actions):
    """The classical single-agent learner: same schedule and budget, no features."""
    q = TabularQ(n_actions, hyper.mu, hyper.alpha)
    sched = EpsilonSchedule(hyper.t_eps)
    rng = np.random.default_rng(np.random.SeedSequence((hyper.seed, 311)))
    s, _ = env.observe_initial()
    a = eps_greedy_select(q.row(s.index), sched.value(0), rng)
    for n in range(hyper.trials):
        s2, r, _ = env.step(a)
        a2 = eps_greedy_select(q.row(s2.index), sched.value(n + 1), rng)
        tabular_q_update(q, s.index, a, r, s2.index, a2, hyper.mu, hyper.alpha)
        s, a = s2, a2
    return q, {"final_state": s.index}


def policy_compactness(policy_actions, n_actions, coverage=0.8):
    """Action histogram plus the narrowest contiguous index band holding the
    requested share of states."""
    actions = np.asarray(policy_actions, dtype=int)
    hist = np.bincount(actions, minlength=n_actions)
    need = coverage * len(actions) - 1e-9
    csum = np.concatenate([[0], np.cumsum(hist)])
    best_width, best_lo = n_actions, 0
    for lo in range(n_actions):
        for hi in range(lo, n_actions):
            if csum[hi + 1] - csum[lo] >= need:
                if hi - lo + 1 < best_width:
                    best_width, best_lo = hi - lo + 1, lo
                break
    return hist, best_width, best_lo
