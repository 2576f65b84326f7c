# Per-layer, per-input merge-count decision. The redundancy proxy (mean
# best-match score) is standardized by calibrated per-layer statistics and
# squashed through a sigmoid to pick r in [0, r_max].

from dataclasses import dataclass, field

import numpy as np

SIGMA_FLOOR = 1e-6


@dataclass
class ScheduleConfig:
    r_max: int
    alpha: float = 1.0        # gain on the z-score inside the sigmoid
    temperature: float = 1.0  # z <- z / T; smaller T sharpens the decision
    mode: str = "adaptive"    # "adaptive" or "fixed"
    fixed_r: int = 0          # used when mode == "fixed"

    def __post_init__(self):
        if self.r_max < 0:
            raise ValueError(f"r_max must be >= 0, got {self.r_max}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError(f"unknown schedule mode: {self.mode}")


@dataclass
class LayerStats:
    """Calibrated per-layer (mu, sigma) of the redundancy proxy."""
    model_id: str
    mu: np.ndarray
    sigma: np.ndarray
    r_max: int
    alpha: float
    temperature: float
    passes: int
    calibration_size: int

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if len(self.mu) != len(self.sigma):
            raise ValueError(
                f"mu/sigma length mismatch: {len(self.mu)} vs {len(self.sigma)}")
        if not np.all(self.sigma > 0):
            raise ValueError("sigma must be strictly positive at every layer")

    @property
    def num_layers(self) -> int:
        return len(self.mu)


def logistic(z: float) -> float:
    # split by sign to avoid overflow in exp
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


def redundancy_proxy(scores: np.ndarray) -> float:
    """Mean over A rows of the best matching score; 0 for an empty A."""
    if scores.size == 0:
        return 0.0
    return float(scores.astype(np.float64).max(axis=1).mean())


def zscore(sbar: float, stats: LayerStats, layer: int,
           temperature: float) -> float:
    if layer >= stats.num_layers:
        raise ValueError(
            f"layer {layer} out of range for {stats.num_layers}-layer stats")
    z = (sbar - stats.mu[layer]) / stats.sigma[layer]
    return float(z / temperature)


def r_from_z(z: float, cfg: ScheduleConfig, a_size: int) -> int:
    r = int(np.floor(cfg.r_max * logistic(cfg.alpha * z)))
    return max(0, min(r, a_size))


def decide_r(sbar: float, stats: LayerStats, layer: int,
             cfg: ScheduleConfig, a_size: int) -> int:
    """r = floor(r_max * sigmoid(alpha * z / T)), clamped to [0, |A|]."""
    z = zscore(sbar, stats, layer, cfg.temperature)
    return r_from_z(z, cfg, a_size)
