"""Normalization statistics, score calibration and anomaly maps."""

from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from ..core.exceptions import ShapeError

DEFAULT_SIGMA_FLOOR = 1e-8


@dataclass
class FeatureStats:
    """Per-dimension mean and std of teacher descriptors over the training set."""
    mu: np.ndarray
    sigma: np.ndarray
    epsilon: float = DEFAULT_SIGMA_FLOOR
    count: int = 0

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float32)
        self.sigma = np.maximum(np.asarray(self.sigma, dtype=np.float32), np.float32(self.epsilon))
        if self.mu.shape != self.sigma.shape or self.mu.ndim != 1:
            raise ShapeError(f"FeatureStats mu {self.mu.shape} and sigma {self.sigma.shape} must be equal 1-d")

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])

    def normalize(self, descriptors: np.ndarray) -> np.ndarray:
        """(y − μ)·diag(σ)⁻¹ for a map (d, h, w) or a batch (N, d, h, w)."""
        if descriptors.shape[-3] != self.dim:
            raise ShapeError(f"Descriptor dim {descriptors.shape[-3]} does not match stats dim {self.dim}")
        return ((descriptors - self.mu[:, None, None]) / self.sigma[:, None, None]).astype(np.float32)


@dataclass
class ScoreCalibration:
    """Validation mean/std of the regression error e and predictive variance v."""
    e_mu: float
    e_sigma: float
    v_mu: float
    v_sigma: float
    epsilon: float = DEFAULT_SIGMA_FLOOR
    patch_size: int = 0
    num_pixels: int = 0

    def __post_init__(self):
        self.e_sigma = max(float(self.e_sigma), self.epsilon)
        self.v_sigma = max(float(self.v_sigma), self.epsilon)

    def normalize_error(self, e: np.ndarray) -> np.ndarray:
        return ((e - self.e_mu) / self.e_sigma).astype(np.float32)

    def normalize_variance(self, v: np.ndarray) -> np.ndarray:
        return ((v - self.v_mu) / self.v_sigma).astype(np.float32)

    @property
    def calibration_id(self) -> str:
        return f"p{self.patch_size}:{self.e_mu:.6g}/{self.e_sigma:.6g}/{self.v_mu:.6g}/{self.v_sigma:.6g}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "e_mu": self.e_mu,
            "e_sigma": self.e_sigma,
            "v_mu": self.v_mu,
            "v_sigma": self.v_sigma,
            "epsilon": self.epsilon,
            "patch_size": self.patch_size,
            "num_pixels": self.num_pixels,
        }


@dataclass
class AnomalyMap:
    """Per-pixel scores with the scales and calibrations they came from."""
    scores: np.ndarray
    scales: List[int] = field(default_factory=list)
    calibration_ids: List[str] = field(default_factory=list)
    score_mode: str = "combined"

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float32)
        if self.scores.ndim != 2:
            raise ShapeError(f"Anomaly map must be h×w, got {self.scores.shape}")

    @property
    def shape(self):
        return self.scores.shape

    @property
    def max_score(self) -> float:
        return float(self.scores.max())

    def provenance(self) -> Dict[str, Any]:
        return {"scales": list(self.scales), "calibration_ids": list(self.calibration_ids), "score_mode": self.score_mode}
