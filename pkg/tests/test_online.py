import numpy as np
import pytest

from hetnet_tuner.env import OnlineEnv, SectorWorld
from hetnet_tuner.geometry import DeploymentConfig, fixed_deployment
from hetnet_tuner.mdp import ActionSpace, RewardConfig, StateQuantizer
from hetnet_tuner.meanfield import BetaTable
from hetnet_tuner.online import (EpsilonSchedule, FeatureContext, LinearQ, TabularQ,
                                 action_values, eps_greedy_select, epsilon_value,
                                 extract_policy, features, greedy_action,
                                 policy_compactness, q_hat, run_online_training,
                                 tabular_q_update, update_w)
from hetnet_tuner.radio import AntennaConfig, RadioParams, antenna_gain


class TestEpsilonSchedule:
    def test_first_period_is_one(self):
        s = EpsilonSchedule(10)
        for n in range(10):
            assert epsilon_value(n, s) == 1.0

    def test_first_increment(self):
        assert epsilon_value(10, EpsilonSchedule(10)) == 0.5

    def test_n55_by_stepping_the_counter(self):
        # independent oracle: apply "k -> k+1 when n mod T == 0" tick by tick
        t_eps, k = 10, 1
        for n in range(1, 56):
            if n % t_eps == 0:
                k += 1
        assert k == 6
        assert epsilon_value(55, EpsilonSchedule(10)) == pytest.approx(1.0 / 6.0)

    def test_non_increasing(self):
        s = EpsilonSchedule(7)
        vals = [epsilon_value(n, s) for n in range(300)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_negative_n(self):
        with pytest.raises(ValueError):
            epsilon_value(-1, EpsilonSchedule())


class TestEpsGreedy:
    def test_pure_exploitation(self):
        rng = np.random.default_rng(0)
        q = [0.1, 3.0, 2.0]
        assert all(eps_greedy_select(q, 0.0, rng) == 1 for _ in range(50))

    def test_uniform_at_eps_one(self):
        rng = np.random.default_rng(1)
        n, k = 100_000, 6
        counts = np.zeros(k)
        q = np.arange(k, dtype=float)
        for _ in range(n):
            counts[eps_greedy_select(q, 1.0, rng)] += 1
        p = 1.0 / k
        sigma = np.sqrt(n * p * (1 - p))
        assert np.all(np.abs(counts - n * p) < 3 * sigma)

    def test_greedy_tie_lowest_index(self):
        rng = np.random.default_rng(2)
        assert eps_greedy_select([5.0, 5.0, 1.0], 0.0, rng) == 0

    def test_empty(self):
        with pytest.raises(ValueError, match="empty action set"):
            eps_greedy_select([], 0.5, np.random.default_rng(0))

    def test_greedy_probability(self):
        # overall greedy mass is 1 - eps + eps/|A|
        rng = np.random.default_rng(3)
        eps, k, n = 0.4, 4, 200_000
        q = [0.0, 9.0, 1.0, 2.0]
        hits = sum(eps_greedy_select(q, eps, rng) == 1 for _ in range(n))
        expect = 1 - eps + eps / k
        sigma = np.sqrt(n * expect * (1 - expect))
        assert abs(hits - n * expect) < 3 * sigma


def _ctx(beta_values, gamma0=(8.0, 4.0), angles=((-15.0, 4.1), (15.0, 3.0)),
         space=None):
    space = space or ActionSpace((3.0, 15.0), (6.8, 10.0), (45.0, 65.0, 70.0))
    init = AntennaConfig(15.0, 10.0, 70.0)
    init_idx = space.index_of(init)
    values = np.asarray(beta_values, dtype=float)
    beta = BetaTable(list(range(values.shape[0])), values,
                     values[:, init_idx].copy(), init_idx)
    return FeatureContext(np.asarray(gamma0, dtype=float), init, beta,
                          list(angles), space, RadioParams().noise_mw)


class TestFeatures:
    def test_initial_pair_is_identity(self):
        ctx = _ctx(np.full((2, 12), 2e-8))
        x = features(0, ctx.beta.initial_action, ctx)
        np.testing.assert_array_equal(x, ctx.gamma_q0_db)

    def test_tilt_only_change_matches_pattern_difference(self):
        ctx = _ctx(np.full((2, 12), 3e-8))     # beta constant -> dBeta = 0
        a = ctx.action_space.index_of(AntennaConfig(3.0, 10.0, 70.0))
        x = features(0, a, ctx)
        for u, (phi, theta) in enumerate(ctx.cluster_angles):
            da = (antenna_gain(phi, theta, AntennaConfig(3.0, 10.0, 70.0))
                  - antenna_gain(phi, theta, AntennaConfig(15.0, 10.0, 70.0)))
            assert x[u] == pytest.approx(ctx.gamma_q0_db[u] + da, abs=1e-12)

    def test_positive_dbeta_lowers_every_feature(self):
        values = np.full((2, 12), 1e-8)
        a = 0
        values[:, a] = 5e-7                     # ten-ish dB more interference
        # angles where both configs clip at -25 so dA vanishes
        ctx = _ctx(values, angles=((170.0, 60.0), (170.0, 60.0)))
        x = features(0, a, ctx)
        assert np.all(x < ctx.gamma_q0_db)

    def test_unlocated_ue(self):
        ctx = _ctx(np.full((2, 12), 1e-8))
        ctx.cluster_angles[1] = None
        with pytest.raises(ValueError, match="unlocated UE"):
            features(0, 0, ctx)


class TestQHat:
    def test_zero_weights(self):
        assert q_hat([1.0, 2.0], [0.0, 0.0]) == 0.0

    def test_one_hot_selector(self):
        assert q_hat([4.0, 7.0, 9.0], [0.0, 1.0, 0.0]) == 7.0

    def test_random_dot_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            x = rng.normal(size=5)
            w = rng.normal(size=5)
            manual = sum(float(a) * float(b) for a, b in zip(x, w))
            assert q_hat(x, w) == pytest.approx(manual, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            q_hat([1.0], [1.0, 2.0])


class TestUpdateW:
    def test_zero_feature_leaves_w(self):
        w = np.array([0.3, 0.7])
        out = update_w(w, 5.0, np.zeros(2), np.zeros(2), 0.8, 0.9)
        np.testing.assert_array_equal(out, w)

    def test_single_term_algebra(self):
        w = np.zeros(5)
        x = np.array([1.0, 0, 0, 0, 0])
        pre = update_w(w, 1.0, x, np.zeros(5), 0.8, 0.0, normalize=False)
        np.testing.assert_array_equal(pre, [0.8, 0, 0, 0, 0])
        post = update_w(w, 1.0, x, np.zeros(5), 0.8, 0.0, normalize=True)
        np.testing.assert_array_equal(post, [1.0, 0, 0, 0, 0])

    def test_exact_gradient_step(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            w = rng.normal(size=4)
            x = rng.normal(size=4)
            xn = rng.normal(size=4)
            r, mu, al = rng.normal(), rng.uniform(0.1, 1), rng.uniform(0.1, 0.99)
            got = update_w(w, r, x, xn, mu, al, normalize=False)
            target = r + al * float(np.dot(xn, w))
            expect = w + (mu * (target - float(np.dot(x, w)))) * x
            np.testing.assert_array_equal(got, expect)

    def test_ten_step_replay_oracle(self):
        rng = np.random.default_rng(7)
        w = np.zeros(3)
        w_ref = [0.0, 0.0, 0.0]
        for _ in range(10):
            x = rng.normal(size=3)
            xn = rng.normal(size=3)
            r = rng.normal()
            w = update_w(w, r, x, xn, 0.8, 0.9, normalize=True)
            # scalar replay with plain python arithmetic
            qn = sum(float(a) * float(b) for a, b in zip(xn, w_ref))
            q0 = sum(float(a) * float(b) for a, b in zip(x, w_ref))
            delta = (r + 0.9 * qn) - q0
            w_ref = [wi + 0.8 * delta * xi for wi, xi in zip(w_ref, x)]
            total = sum(w_ref)
            if abs(total) > 1e-9:
                w_ref = [wi / total for wi in w_ref]
            np.testing.assert_allclose(w, w_ref, rtol=1e-12, atol=1e-12)

    def test_normalization_guard_and_sign_flip(self):
        # inside the guard: division would blow up, so it is skipped
        w = np.array([0.5, -0.5])
        out = update_w(w, 0.0, np.zeros(2), np.zeros(2), 0.5, 0.9)
        np.testing.assert_array_equal(out, w)
        # a negative but well-conditioned sum divides through: sum becomes one
        w = np.array([0.5, -0.7])
        out = update_w(w, 0.0, np.zeros(2), np.zeros(2), 0.5, 0.9)
        assert np.sum(out) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(out, [-2.5, 3.5], rtol=1e-12)

    def test_diverged(self):
        with pytest.raises(ValueError, match="diverged"):
            update_w(np.zeros(2), np.inf, np.ones(2), np.ones(2), 0.5, 0.9)


class TestTabular:
    def test_zero_step_size(self):
        q = TabularQ(2)
        tabular_q_update(q, 0, 0, 5.0, 1, 1, 0.0, 0.9)
        assert q.get(0, 0) == 0.0

    def test_fixed_point_single_state(self):
        q = TabularQ(1)
        r, mu, al = 2.0, 0.5, 0.9
        for _ in range(2000):
            tabular_q_update(q, 0, 0, r, 0, 0, mu, al)
        assert q.get(0, 0) == pytest.approx(r / (1 - al), abs=1e-6)

    def test_three_state_toy_matches_value_iteration(self):
        rng = np.random.default_rng(11)
        n_s, n_a, al = 3, 2, 0.9
        nxt = rng.integers(0, n_s, size=(n_s, n_a))
        rew = rng.uniform(0, 1, size=(n_s, n_a))
        # value-iteration oracle
        q_star = np.zeros((n_s, n_a))
        for _ in range(600):
            q_star = rew + al * q_star.max(axis=1)[nxt]
        q = TabularQ(n_a, mu=1.0, alpha=al)
        for _ in range(20_000):
            s = int(rng.integers(n_s))         # exploring starts cover every pair
            a = int(rng.integers(n_a))
            s2 = int(nxt[s, a])
            tabular_q_update(q, s, a, rew[s, a], s2, q.greedy(s2), 1.0, al)
        for s in range(n_s):
            assert q.greedy(s) == int(np.argmax(q_star[s]))
            np.testing.assert_allclose(q.row(s), q_star[s], atol=1e-3)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            tabular_q_update(TabularQ(2), 0, 2, 0.0, 0, 0, 0.5, 0.9)


class TestFaTabularEquivalence:
    def test_one_hot_features_reproduce_tabular_exactly(self):
        # 3-state/2-action MDP, shared random trajectory, bit-identical values
        rng = np.random.default_rng(13)
        n_s, n_a = 3, 2
        nxt = rng.integers(0, n_s, size=(n_s, n_a))
        rew = rng.normal(size=(n_s, n_a))
        mu, al = 0.8, 0.9

        def onehot(s, a):
            x = np.zeros(n_s * n_a)
            x[s * n_a + a] = 1.0
            return x

        w = np.zeros(n_s * n_a)
        q = TabularQ(n_a, mu, al)
        s = 0
        a = int(rng.integers(n_a))
        for _ in range(10_000):
            s2 = int(nxt[s, a])
            a2 = int(rng.integers(n_a))
            r = float(rew[s, a])
            w = update_w(w, r, onehot(s, a), onehot(s2, a2), mu, al, normalize=False)
            tabular_q_update(q, s, a, r, s2, a2, mu, al)
            s, a = s2, a2
        for st in range(n_s):
            for ac in range(n_a):
                assert w[st * n_a + ac] == q.get(st, ac)   # exact


class TestCompactness:
    def test_constant_policy(self):
        hist, width, lo = policy_compactness(np.full(100, 7), 12)
        assert width == 1 and lo == 7 and hist[7] == 100

    def test_uniform_policy(self):
        actions = np.repeat(np.arange(180), 5)
        _, width, _ = policy_compactness(actions, 180, coverage=0.8)
        assert width == 144

    def test_band_location(self):
        actions = np.array([70] * 40 + [80] * 40 + [90] * 10 + [5] * 10)
        _, width, lo = policy_compactness(actions, 100, coverage=0.8)
        assert width == 11 and lo == 70


def _desk_world(tilts=(3.0, 15.0), vbws=(10.0,), hbws=(70.0,)):
    cfg = DeploymentConfig(area_side_km=2.0, n_ues=4, seed=0)
    sites = np.array([[0.5, 0.5], [1.5, 1.5]])
    polar = [(0, 0.35, 50.0), (0, 0.40, 80.0), (1, 0.40, 200.0), (1, 0.30, 160.0)]
    ues = [sites[s] + r * np.array([np.cos(np.radians(az)), np.sin(np.radians(az))])
           for s, r, az in polar]
    dep = fixed_deployment(cfg, sites, np.array(ues))
    radio = RadioParams(macro_shadow_sigma_db=0.0)
    return SectorWorld(dep, radio, StateQuantizer(0, 12, 4), RewardConfig(),
                       ActionSpace(tilts, vbws, hbws), seed=0)


class TestOnlineTraining:
    def _env_and_ctx(self, world, seed=0):
        # neighbors frozen at the initial config: a strictly dominant-action world
        env = OnlineEnv(world, lambda cfg: {}, seed=seed)
        space = world.action_space
        init_idx = world.initial_action
        values = np.full((2, len(space)), 1e-9)
        beta = BetaTable([0, 1], values, values[:, init_idx].copy(), init_idx)
        s0, g0 = OnlineEnv(world, lambda cfg: {}, seed=seed + 999).observe_initial()
        q = world.quantizer
        gamma_q0 = np.array([q.level_value(lv) for lv in s0.levels])
        angles = [(-15.0, 4.1), (15.0, 3.0)]
        ctx = FeatureContext(gamma_q0, world.initial_config, beta, angles,
                             space, world.radio.noise_mw)
        return env, ctx

    def test_dominant_action_selected_everywhere(self):
        world = _desk_world()                   # 2 actions: tilt 3 dominates tilt 15
        from hetnet_tuner.online import OnlineHyper
        env, ctx = self._env_and_ctx(world)
        linq, _ = run_online_training(env, ctx, OnlineHyper(trials=60, seed=1))
        dominant = 0                            # (3.0, 10.0, 70.0)
        pol = extract_policy(linq, ctx, world.n_states(0))
        assert np.all(pol == dominant)

    def test_determinism(self):
        world = _desk_world()
        from hetnet_tuner.online import OnlineHyper
        env1, ctx = self._env_and_ctx(world, seed=3)
        env2, _ = self._env_and_ctx(world, seed=3)
        w1, _ = run_online_training(env1, ctx, OnlineHyper(trials=50, seed=2))
        w2, _ = run_online_training(env2, ctx, OnlineHyper(trials=50, seed=2))
        np.testing.assert_array_equal(w1.weights, w2.weights)


class TestSpatialStreams:
    def test_v_streams_replicate_ue_sinrs(self):
        world = _desk_world()
        world.v_streams = 2
        s, r, g = world.observe(0, world.full_configs())
        assert len(g) == 4 and g[0] == g[1] and g[2] == g[3]
        assert len(s.levels) == 4
        assert world.n_states(0) == 4 ** 4
