import numpy as np
import pytest

from hetnet_tuner.locnet import (ClusterNet, SectorGeometry, TrainHyper, TrainingSet,
                                 assign_ue, build_clusters,
                                 cluster_quantization_loss, fingerprint_baseline,
                                 forward, init_cluster_net, localization_accuracy,
                                 loss_gradients, mse_loss, train_net)
from hetnet_tuner.radio import AntennaConfig

GEOM = SectorGeometry()          # annulus [1.0, 1.5] km, 120 deg at boresight 60
INIT = AntennaConfig(15.0, 10.0, 70.0)


class TestClusterGrid:
    def test_default_grid_has_20_clusters(self):
        grid = build_clusters(GEOM, 0.1, 30.0)
        assert len(grid) == 20
        assert grid.n_radial == 5 and grid.n_angular == 4

    def test_degenerate_single_cluster(self):
        geom = SectorGeometry(inner_radius_km=1.0, outer_radius_km=1.5)
        grid = build_clusters(geom, 0.5, 120.0)
        assert len(grid) == 1

    def test_every_point_maps_to_exactly_one_cluster(self):
        grid = build_clusters(GEOM, 0.1, 30.0)
        rng = np.random.default_rng(3)
        for _ in range(500):
            r = rng.uniform(1.0, 1.5 - 1e-9)
            az = rng.uniform(-60.0, 60.0 - 1e-9)
            k = grid.membership(r, az)
            assert k is not None
            # point lies inside the bounds of its assigned bin and no other
            ri, ai = divmod(k, grid.n_angular)
            assert 1.0 + ri * 0.1 <= r < 1.0 + (ri + 1) * 0.1
            assert -60 + ai * 30 <= az < -60 + (ai + 1) * 30

    def test_outside_grid(self):
        grid = build_clusters(GEOM, 0.1, 30.0)
        assert grid.membership(0.5, 0.0) is None
        assert grid.membership(1.2, 75.0) is None

    def test_indivisible_span(self):
        with pytest.raises(ValueError, match="not divisible"):
            build_clusters(GEOM, 0.13, 30.0)

    def test_json_roundtrip(self):
        from hetnet_tuner.locnet import ClusterGrid
        grid = build_clusters(GEOM, 0.1, 30.0)
        back = ClusterGrid.from_json_dict(grid.to_json_dict())
        assert len(back) == len(grid)
        assert back.center(7) == grid.center(7)


class TestForward:
    def test_zero_net_gives_zero(self):
        net = init_cluster_net(20, seed=0)
        for li in range(len(net.weights)):
            net.weights[li][:] = 0.0
        out = forward(net, 3.0)
        np.testing.assert_array_equal(out, np.zeros(20))

    def test_bias_passthrough(self):
        net = init_cluster_net(8, seed=0)
        for li in range(len(net.weights)):
            net.weights[li][:] = 0.0
        net.biases[-1][:] = 2.5
        np.testing.assert_allclose(forward(net, 1.0), np.full(8, 2.5), rtol=1e-15)

    def test_matches_layer_by_layer_oracle(self):
        net = init_cluster_net(12, seed=5)
        net.input_mean, net.input_std = 1.0, 2.0
        net.label_mean = np.linspace(0, 1, 12)
        net.label_std = np.linspace(1, 2, 12)
        x = 4.2
        # independent reference pass with explicit matrix arithmetic
        a = np.array([(x - 1.0) / 2.0])
        a = np.maximum(net.weights[0] @ a + net.biases[0], 0.0)
        a = np.maximum(net.weights[1] @ a + net.biases[1], 0.0)
        a = net.weights[2] @ a + net.biases[2]
        expect = a * net.label_std + net.label_mean
        np.testing.assert_allclose(forward(net, x), expect, rtol=1e-12)

    def test_hidden_activations_nonnegative(self):
        from hetnet_tuner.locnet import _forward_std
        net = init_cluster_net(20, seed=9)
        acts, _ = _forward_std(net, np.linspace(-3, 3, 11).reshape(-1, 1))
        for h in acts[1:-1]:
            assert np.all(h >= 0.0)

    def test_output_length_is_n(self):
        for n in (8, 12, 20):
            net = init_cluster_net(n, seed=1)
            assert forward(net, 0.3).shape == (n,)

    def test_non_finite_input(self):
        net = init_cluster_net(8, seed=0)
        with pytest.raises(ValueError, match="non-finite"):
            forward(net, np.nan)

    def test_n_not_divisible_by_4(self):
        with pytest.raises(ValueError, match="divisible by 4"):
            init_cluster_net(10)


def _finite_difference_check(net, X, Y, h=1e-6):
    gw, gb = loss_gradients(net, X, Y)
    worst = 0.0
    for li in range(len(net.weights)):
        for arr, grad in ((net.weights[li], gw[li]), (net.biases[li], gb[li])):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                keep = arr[idx]
                arr[idx] = keep + h
                up = mse_loss(net, X, Y)
                arr[idx] = keep - h
                dn = mse_loss(net, X, Y)
                arr[idx] = keep
                fd = (up - dn) / (2 * h)
                an = grad[idx]
                rel = abs(fd - an) / max(abs(fd) + abs(an), 1e-8)
                worst = max(worst, rel)
    return worst


class TestTraining:
    def test_backprop_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        net = init_cluster_net(8, seed=2)
        # jitter the biases off the all-zero init so no relu sits exactly on
        # its kink, where the loss is not differentiable
        for b in net.biases:
            b += rng.normal(0.0, 0.1, b.shape)
        X = rng.uniform(-2, 2, 6)
        Y = rng.normal(size=(6, 8))
        assert _finite_difference_check(net, X, Y) < 1e-4

    def test_constant_labels_learned(self):
        rng = np.random.default_rng(4)
        labels = np.tile(np.linspace(-4, 6, 8), (32, 1))
        data = TrainingSet(0, rng.uniform(0, 1, 32), labels,
                           rng.uniform(0, 1, 8), labels[:8])
        net, losses = train_net(data, TrainHyper(epochs=1500, seed=0))
        assert losses["test_mse"] < 1e-3

    def test_empty_training_set(self):
        data = TrainingSet(0, np.array([]), np.zeros((0, 8)),
                           np.array([]), np.zeros((0, 8)))
        with pytest.raises(ValueError, match="empty training set"):
            train_net(data)

    def test_divergence_detected(self):
        rng = np.random.default_rng(5)
        labels = rng.normal(scale=5.0, size=(16, 8))
        data = TrainingSet(0, labels[:, 0], labels, labels[:2, 0], labels[:2])
        with pytest.raises(ValueError, match="diverged"):
            train_net(data, TrainHyper(learning_rate=4000.0, epochs=400, seed=1))


class TestAssignment:
    VALUES = np.array([-3.0, 1.0, 4.0, 9.0])

    def test_exact_match(self):
        assert assign_ue(4.0, self.VALUES) == 2

    def test_equidistant_tie_lowest(self):
        vals = np.zeros(8)
        vals[3] = 2.0
        vals[7] = 4.0
        assert assign_ue(3.0, vals) == 3

    def test_noise_within_half_gap(self):
        rng = np.random.default_rng(6)
        gaps = np.diff(np.sort(self.VALUES))
        half = gaps.min() / 2
        for _ in range(200):
            k = int(rng.integers(len(self.VALUES)))
            noisy = self.VALUES[k] + rng.uniform(-half * 0.99, half * 0.99)
            assert assign_ue(noisy, self.VALUES) == k

    def test_shift_consistency(self):
        rng = np.random.default_rng(7)
        vals = rng.normal(size=12)
        for _ in range(50):
            g = rng.normal()
            c = rng.normal()
            assert assign_ue(g, vals) == assign_ue(g + c, vals + c)


class TestFingerprint:
    def test_single_vector(self):
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(fingerprint_baseline([v]), v)

    def test_two_vector_midpoint(self):
        a, b = np.zeros(3), np.array([2.0, 4.0, 6.0])
        np.testing.assert_array_equal(fingerprint_baseline([a, b]), b / 2)

    def test_empty(self):
        with pytest.raises(ValueError):
            fingerprint_baseline([])


class TestAccuracy:
    def test_all_correct(self):
        assert localization_accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_none_correct(self):
        assert localization_accuracy([1, 2, 3], [2, 3, 1]) == 0.0

    def test_half(self):
        assert localization_accuracy([1, 2], [1, 3]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            localization_accuracy([1], [1, 2])


class TestQuantizationLoss:
    def test_point_cluster_has_no_loss(self):
        geom = SectorGeometry(span_deg=1e-6, inner_radius_km=1.2,
                              outer_radius_km=1.2 + 1e-6)
        grid = build_clusters(geom, 1e-6, 1e-6)
        assert len(grid) == 1
        assert cluster_quantization_loss(grid, INIT) == pytest.approx(0.0, abs=1e-5)

    def test_default_grid_band(self):
        grid = build_clusters(GEOM, 0.1, 30.0)
        loss = cluster_quantization_loss(grid, INIT)
        assert 0.3 <= loss <= 1.2          # paper reports 0.68 under its geometry

    def test_refinement_does_not_increase_loss(self):
        coarse = build_clusters(GEOM, 0.1, 30.0)
        fine = build_clusters(GEOM, 0.05, 15.0)
        assert (cluster_quantization_loss(fine, INIT)
                <= cluster_quantization_loss(coarse, INIT) + 1e-12)
