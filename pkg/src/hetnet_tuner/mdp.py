"""
mdp.py: the RL problem encoding.

SINR quantization into CQI-style bins, the bijections between per-stream bin
vectors / antenna configurations and their integer indices, and the ACK-driven
reward. The index conventions here are the bit-exact contract used by every
persisted artifact.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .radio import AntennaConfig


@dataclass(frozen=True)
class StateQuantizer:
    min_db: float = 0.0
    max_db: float = 12.0
    step_db: float = 2.0

    def __post_init__(self):
        if self.max_db <= self.min_db:
            raise ValueError("max_db must exceed min_db")
        if self.step_db <= 0:
            raise ValueError("step_db must be positive")
        n = (self.max_db - self.min_db) / self.step_db
        if abs(n - round(n)) > 1e-9:
            raise ValueError("bin range must be an integer multiple of the step")

    @property
    def n_levels(self):
        return int(round((self.max_db - self.min_db) / self.step_db)) + 1

    def level_value(self, level):
        return self.min_db + level * self.step_db


def quantize_sinr(gamma_db, q):
    """Clamp to [min, max] and round to the nearest bin level; ties round up."""
    g = min(max(gamma_db, q.min_db), q.max_db)
    level = int(math.floor((g - q.min_db) / q.step_db + 0.5))
    return min(level, q.n_levels - 1)


@dataclass(frozen=True)
class StateIndex:
    levels: tuple
    index: int


def encode_state(levels, q, n_streams=None):
    """Bin-level vector -> integer index, first stream most significant."""
    levels = tuple(int(v) for v in levels)
    if n_streams is not None and len(levels) != n_streams:
        raise ValueError("wrong number of streams")
    m = q.n_levels
    idx = 0
    for lv in levels:
        if lv < 0 or lv >= m:
            raise ValueError(f"bin level {lv} out of range 0..{m - 1}")
        idx = idx * m + lv
    return StateIndex(levels, idx)


def decode_state(index, q, n_streams):
    m = q.n_levels
    if index < 0 or index >= m ** n_streams:
        raise ValueError("state index out of range")
    levels = []
    rem = index
    for _ in range(n_streams):
        rem, lv = divmod(rem, m)
        levels.append(lv)
    return StateIndex(tuple(reversed(levels)), index)


DEFAULT_TILTS = (0.0, 3.0, 6.0, 9.0, 12.0, 15.0)
DEFAULT_VBWS = (4.4, 6.8, 9.4, 10.0, 13.5)
DEFAULT_HBWS = (45.0, 55.0, 65.0, 70.0, 75.0, 85.0)


@dataclass(frozen=True)
class ActionSpace:
    """Discrete grid of antenna configurations, ordered h-beamwidth fastest."""
    tilts: tuple = DEFAULT_TILTS
    v_beamwidths: tuple = DEFAULT_VBWS
    h_beamwidths: tuple = DEFAULT_HBWS

    def __post_init__(self):
        for levels in (self.tilts, self.v_beamwidths, self.h_beamwidths):
            if len(levels) == 0 or any(b <= a for a, b in zip(levels, levels[1:])):
                raise ValueError("action levels must be strictly increasing")

    def __len__(self):
        return len(self.tilts) * len(self.v_beamwidths) * len(self.h_beamwidths)

    def config_at(self, index):
        nv, nh = len(self.v_beamwidths), len(self.h_beamwidths)
        if index < 0 or index >= len(self):
            raise ValueError("action index out of range")
        t, rem = divmod(index, nv * nh)
        v, h = divmod(rem, nh)
        return AntennaConfig(self.tilts[t], self.v_beamwidths[v], self.h_beamwidths[h])

    def index_of(self, cfg):
        t = _level_index(self.tilts, cfg.tilt_deg)
        v = _level_index(self.v_beamwidths, cfg.v_beamwidth_deg)
        h = _level_index(self.h_beamwidths, cfg.h_beamwidth_deg)
        return (t * len(self.v_beamwidths) + v) * len(self.h_beamwidths) + h

    def nearest(self, cfg):
        """Snap an off-grid (e.g. mean) config to the closest grid point per axis."""
        return AntennaConfig(_nearest_level(self.tilts, cfg.tilt_deg),
                             _nearest_level(self.v_beamwidths, cfg.v_beamwidth_deg),
                             _nearest_level(self.h_beamwidths, cfg.h_beamwidth_deg))

    def all_configs(self):
        return [self.config_at(i) for i in range(len(self))]


def _level_index(levels, value):
    for i, lv in enumerate(levels):
        if abs(lv - value) <= 1e-9:
            return i
    raise ValueError(f"value {value} is not on the action grid {levels}")


def _nearest_level(levels, value):
    arr = np.asarray(levels)
    return float(arr[int(np.argmin(np.abs(arr - value)))])


def encode_action(cfg, space):
    return space.index_of(cfg)


def decode_action(index, space):
    return space.config_at(index)


@dataclass(frozen=True)
class RewardConfig:
    weights: tuple = None          # c_{u,v}; None means all ones
    penalty: float = -100.0        # NACK penalty
    discount: float = 0.9
    gamma_min_db: float = 2.0
    n_periods: int = 50            # evaluation horizon

    def __post_init__(self):
        if not (0.0 < self.discount < 1.0):
            raise ValueError("discount must be in (0, 1)")
        if self.penalty >= 0:
            raise ValueError("penalty must be negative")

    def stream_weights(self, n_streams):
        if self.weights is None:
            return np.ones(n_streams)
        w = np.asarray(self.weights, dtype=float)
        if len(w) != n_streams:
            raise ValueError("weights length must match stream count")
        return w


def ack_rate_db(gamma_db):
    """Per-stream ACK reward 10*log10(2)*log2(1 + 10^(gamma/10)) = 10*log10(1 + rho)."""
    return 10.0 * np.log10(1.0 + 10.0 ** (np.asarray(gamma_db, dtype=float) / 10.0))


def immediate_reward(gamma_q_db, acks, rc, weights=None):
    """Sum of weighted per-stream rewards; the penalty replaces NACKed streams.

    gamma_q_db are the quantized per-stream SINRs in dB, acks the per-stream
    ACK flags (true iff unquantized gamma >= gamma_min).
    """
    g = np.asarray(gamma_q_db, dtype=float)
    a = np.asarray(acks, dtype=bool)
    w = rc.stream_weights(len(g)) if weights is None else np.asarray(weights, dtype=float)
    per_stream = np.where(a, ack_rate_db(g), rc.penalty)
    return float(np.sum(w * per_stream))


def equivalence_weights(lambdas, alpha, n):
    """The c = lambda / (alpha^n * 10*log10(2)) scaling that makes the reward
    objective match the weighted sum-rate objective exactly."""
    lam = np.asarray(lambdas, dtype=float)
    return lam / (alpha ** n * 10.0 * np.log10(2.0))


def period_state(samples, q):
    """Average the quantized per-TTI CQI reports per stream, requantize, encode.

    samples: sequence per stream of per-TTI SINR samples in dB.
    """
    levels = []
    for stream in samples:
        vals = np.asarray(stream, dtype=float)
        if vals.size == 0:
            raise ValueError("empty sample set")
        reported = [q.level_value(quantize_sinr(v, q)) for v in vals]
        levels.append(quantize_sinr(float(np.mean(reported)), q))
    return encode_state(levels, q)
