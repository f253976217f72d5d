"""
locnet.py: cluster-grid localization.

The sector coverage is tiled into polar clusters; a small fully connected net
(1 -> N/4 -> N/2 -> N, ReLU hidden, linear out) reconstructs every cluster's
mean SINR from the single cluster value observed online, and UEs are placed
into the cluster whose value is nearest their own average SINR.
"""
from dataclasses import dataclass, field

import numpy as np

from .radio import antenna_gain


@dataclass(frozen=True)
class SectorGeometry:
    boresight_deg: float = 60.0
    span_deg: float = 120.0
    inner_radius_km: float = 1.0
    outer_radius_km: float = 1.5
    bs_height_m: float = 32.0
    ue_height_m: float = 1.5

    def elevation_deg(self, radius_km):
        dh = (self.bs_height_m - self.ue_height_m) / 1000.0
        return float(np.degrees(np.arctan2(dh, radius_km)))


@dataclass
class ClusterGrid:
    geom: SectorGeometry
    radial_res_km: float
    angular_res_deg: float
    n_radial: int
    n_angular: int
    values: np.ndarray = None      # ground-truth mean SINR per cluster, when known

    def __len__(self):
        return self.n_radial * self.n_angular

    def center(self, k):
        """(radius_km, azimuth offset from boresight) of the cluster midpoint."""
        ri, ai = divmod(k, self.n_angular)
        r = self.geom.inner_radius_km + (ri + 0.5) * self.radial_res_km
        az = -self.geom.span_deg / 2.0 + (ai + 0.5) * self.angular_res_deg
        return r, az

    def center_angles(self, k):
        """(phi, theta) feature angles of the cluster midpoint."""
        r, az = self.center(k)
        return az, self.geom.elevation_deg(r)

    def membership(self, radius_km, az_offset_deg):
        """Cluster index containing a polar point, or None outside the grid."""
        g = self.geom
        if not (g.inner_radius_km <= radius_km < g.inner_radius_km
                + self.n_radial * self.radial_res_km):
            return None
        half = g.span_deg / 2.0
        if not (-half <= az_offset_deg < -half + self.n_angular * self.angular_res_deg):
            return None
        ri = int((radius_km - g.inner_radius_km) / self.radial_res_km)
        ai = int((az_offset_deg + half) / self.angular_res_deg)
        ri = min(ri, self.n_radial - 1)
        ai = min(ai, self.n_angular - 1)
        return ri * self.n_angular + ai

    def to_json_dict(self):
        return {
            "boresight_deg": self.geom.boresight_deg,
            "span_deg": self.geom.span_deg,
            "inner_radius_km": self.geom.inner_radius_km,
            "outer_radius_km": self.geom.outer_radius_km,
            "bs_height_m": self.geom.bs_height_m,
            "ue_height_m": self.geom.ue_height_m,
            "radial_res_km": self.radial_res_km,
            "angular_res_deg": self.angular_res_deg,
        }

    @classmethod
    def from_json_dict(cls, doc):
        geom = SectorGeometry(doc["boresight_deg"], doc["span_deg"],
                              doc["inner_radius_km"], doc["outer_radius_km"],
                              doc["bs_height_m"], doc["ue_height_m"])
        return build_clusters(geom, doc["radial_res_km"], doc["angular_res_deg"])


def build_clusters(geom, radial_res_km=0.1, angular_res_deg=30.0):
    if radial_res_km <= 0 or angular_res_deg <= 0:
        raise ValueError("resolutions must be positive")
    r_extent = geom.outer_radius_km - geom.inner_radius_km
    nr = r_extent / radial_res_km
    na = geom.span_deg / angular_res_deg
    if abs(nr - round(nr)) > 1e-9 or abs(na - round(na)) > 1e-9:
        raise ValueError("sector extent is not divisible by the resolution")
    return ClusterGrid(geom, radial_res_km, angular_res_deg,
                       int(round(nr)), int(round(na)))


def cluster_quantization_loss(grid, config):
    """Mean over clusters of |gain at the edge midpoints - gain at the center|.

    This is the antenna-gain price of treating a UE on a cluster boundary as if
    it sat at the cluster midpoint.
    """
    losses = []
    for k in range(len(grid)):
        r, az = grid.center(k)
        a_center = antenna_gain(az, grid.geom.elevation_deg(r), config)
        diffs = []
        for dr, da in ((-grid.radial_res_km / 2, 0.0), (grid.radial_res_km / 2, 0.0),
                       (0.0, -grid.angular_res_deg / 2), (0.0, grid.angular_res_deg / 2)):
            r_e = max(r + dr, 1e-9)
            a_edge = antenna_gain(az + da, grid.geom.elevation_deg(r_e), config)
            diffs.append(abs(float(a_edge) - float(a_center)))
        losses.append(np.mean(diffs))
    return float(np.mean(losses))


# -- the cluster-value net -------------------------------------------------------


@dataclass
class ClusterNet:
    sizes: list                    # [1, N/4, N/2, N]
    weights: list                  # per layer, (fan_out, fan_in)
    biases: list
    input_mean: float = 0.0
    input_std: float = 1.0
    label_mean: np.ndarray = None
    label_std: np.ndarray = None

    def to_json_dict(self):
        return {
            "version": 1,
            "kind": "cluster_net",
            "sizes": list(self.sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "input_mean": self.input_mean,
            "input_std": self.input_std,
            "label_mean": self.label_mean.tolist(),
            "label_std": self.label_std.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc):
        if doc.get("kind") != "cluster_net" or doc.get("version") != 1:
            raise ValueError("not a version-1 cluster net document")
        return cls(sizes=list(doc["sizes"]),
                   weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
                   biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
                   input_mean=float(doc["input_mean"]),
                   input_std=float(doc["input_std"]),
                   label_mean=np.asarray(doc["label_mean"], dtype=float),
                   label_std=np.asarray(doc["label_std"], dtype=float))


def init_cluster_net(n_clusters, seed=0):
    if n_clusters % 4 != 0:
        raise ValueError("cluster count must be divisible by 4")
    sizes = [1, n_clusters // 4, n_clusters // 2, n_clusters]
    rng = np.random.default_rng(np.random.SeedSequence((seed, 503)))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        r = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-r, r, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ClusterNet(sizes, weights, biases,
                      label_mean=np.zeros(n_clusters), label_std=np.ones(n_clusters))


def _forward_std(net, z):
    """Forward pass in standardized space, keeping activations for backprop."""
    acts = [np.atleast_2d(z)]
    n_layers = len(net.weights)
    pre = []
    for li, (w, b) in enumerate(zip(net.weights, net.biases)):
        zlin = acts[-1] @ w.T + b
        pre.append(zlin)
        acts.append(np.maximum(zlin, 0.0) if li < n_layers - 1 else zlin)
    return acts, pre


def forward(net, value):
    """Predicted cluster vector(s) for an observed input cluster value."""
    v = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite input")
    z = (v.reshape(-1, 1) - net.input_mean) / net.input_std
    acts, _ = _forward_std(net, z)
    out = acts[-1] * net.label_std + net.label_mean
    return out[0] if v.ndim == 0 else out


def mse_loss(net, inputs, labels):
    zin = (np.asarray(inputs, dtype=float).reshape(-1, 1) - net.input_mean) / net.input_std
    zlab = (np.asarray(labels, dtype=float) - net.label_mean) / net.label_std
    with np.errstate(over="ignore", invalid="ignore"):
        acts, _ = _forward_std(net, zin)
        return float(np.mean((acts[-1] - zlab) ** 2))


def loss_gradients(net, inputs, labels):
    """Analytic gradients of the standardized-space MSE w.r.t. every parameter."""
    zin = (np.asarray(inputs, dtype=float).reshape(-1, 1) - net.input_mean) / net.input_std
    zlab = (np.asarray(labels, dtype=float) - net.label_mean) / net.label_std
    acts, pre = _forward_std(net, zin)
    n = zin.shape[0]
    delta = 2.0 * (acts[-1] - zlab) / (n * zlab.shape[1])
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    for li in reversed(range(len(net.weights))):
        grads_w[li] = delta.T @ acts[li]
        grads_b[li] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ net.weights[li]) * (pre[li - 1] > 0.0)
    return grads_w, grads_b


@dataclass(frozen=True)
class TrainHyper:
    learning_rate: float = 1e-2
    epochs: int = 5000
    patience: int = 200
    min_improve: float = 1e-7
    seed: int = 0


@dataclass
class TrainingSet:
    """(one observed cluster value, full cluster vector) pairs, split in two."""
    input_index: int
    train_inputs: np.ndarray
    train_labels: np.ndarray
    test_inputs: np.ndarray
    test_labels: np.ndarray

    def to_csv(self, path):
        n = self.train_labels.shape[1]
        header = "input," + ",".join(f"label_{k}" for k in range(n))
        rows = np.column_stack([self.train_inputs, self.train_labels])
        np.savetxt(path, rows, delimiter=",", header=header, comments="")


def train_net(data, hyper=TrainHyper()):
    """Full-batch gradient descent on the MSE; early stop on plateau.

    Returns the trained net plus its final train/test losses (raw dB scale).
    """
    if len(data.train_inputs) == 0:
        raise ValueError("empty training set")
    n_clusters = data.train_labels.shape[1]
    net = init_cluster_net(n_clusters, hyper.seed)
    net.input_mean = float(np.mean(data.train_inputs))
    net.input_std = float(np.std(data.train_inputs)) or 1.0
    net.label_mean = data.train_labels.mean(axis=0)
    net.label_std = np.where(data.train_labels.std(axis=0) > 1e-12,
                             data.train_labels.std(axis=0), 1.0)
    best, since_best = np.inf, 0
    for epoch in range(hyper.epochs):
        gw, gb = loss_gradients(net, data.train_inputs, data.train_labels)
        for li in range(len(net.weights)):
            net.weights[li] -= hyper.learning_rate * gw[li]
            net.biases[li] -= hyper.learning_rate * gb[li]
        loss = mse_loss(net, data.train_inputs, data.train_labels)
        if not np.isfinite(loss):
            raise ValueError(f"training diverged at epoch {epoch}")
        if loss < best - hyper.min_improve:
            best, since_best = loss, 0
        else:
            since_best += 1
            if since_best >= hyper.patience:
                break
    train_mse = _raw_mse(net, data.train_inputs, data.train_labels)
    test_mse = (_raw_mse(net, data.test_inputs, data.test_labels)
                if len(data.test_inputs) else float("nan"))
    return net, {"train_mse": train_mse, "test_mse": test_mse}


def _raw_mse(net, inputs, labels):
    pred = forward(net, np.asarray(inputs, dtype=float))
    return float(np.mean((pred - np.asarray(labels, dtype=float)) ** 2))


def assign_ue(avg_sinr_db, cluster_values):
    """Nearest-value cluster; ties go to the lowest index."""
    return int(np.argmin(np.abs(np.asarray(cluster_values, dtype=float) - avg_sinr_db)))


def fingerprint_baseline(offline_vectors):
    """Conventional fingerprinting: the elementwise mean of the offline
    cluster vectors, used with assign_ue directly."""
    arr = np.asarray(offline_vectors, dtype=float)
    if arr.size == 0:
        raise ValueError("no offline cluster vectors")
    return arr.mean(axis=0)


def localization_accuracy(assignments, ground_truth):
    a = list(assignments)
    g = list(ground_truth)
    if len(a) != len(g):
        raise ValueError("length mismatch")
    if not a:
        raise ValueError("empty assignment list")
    return sum(int(x == y) for x, y in zip(a, g)) / len(a)
