"""Models for teacher pretraining: augmentation, triplets, loss weights, targets, checkpoints."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..core.exceptions import ConfigError, DataError, ShapeError
from ..nets.decoder import DecoderSpec
from ..nets.patch_net import PatchNet


@dataclass
class AugmentConfig:
    """Zoom, translation and photometric jitter used to build triplets."""
    patch_size: int
    noise_std: float = 0.1
    grayscale_prob: float = 0.1
    luminance_range: Tuple[float, float] = (0.8, 1.2)
    rng_seed: int = 0

    def __post_init__(self):
        if self.patch_size < 1 or self.patch_size % 2 == 0:
            raise ConfigError(f"patch_size must be odd and positive, got {self.patch_size}")

    @property
    def zoom_side_range(self) -> Tuple[int, int]:
        """Inclusive range {4p, ..., 16p} of zoomed image sides."""
        return 4 * self.patch_size, 16 * self.patch_size

    @property
    def translate_range(self) -> int:
        """Positive patches shift by at most this many pixels per axis."""
        return (self.patch_size - 1) // 4


@dataclass
class Triplet:
    """Anchor, positive and negative patches, each 3×p×p."""
    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray

    def __post_init__(self):
        if not (self.anchor.shape == self.positive.shape == self.negative.shape):
            raise ShapeError(
                f"Triplet shapes differ: {self.anchor.shape}, {self.positive.shape}, {self.negative.shape}"
            )

    @property
    def patch_size(self) -> int:
        return self.anchor.shape[-1]


@dataclass(frozen=True)
class TeacherLossWeights:
    """λk, λm, λc and the triplet margin."""
    lambda_k: float = 1.0
    lambda_m: float = 0.0
    lambda_c: float = 1.0
    margin: float = 1.0

    def __post_init__(self):
        if min(self.lambda_k, self.lambda_m, self.lambda_c) < 0:
            raise ConfigError("Teacher loss weights must be >= 0")
        if self.lambda_k + self.lambda_m + self.lambda_c <= 0:
            raise ConfigError("At least one teacher loss weight must be > 0")
        if self.margin <= 0:
            raise ConfigError(f"Triplet margin must be > 0, got {self.margin}")

    def scaled(self, factor: float) -> "TeacherLossWeights":
        return TeacherLossWeights(self.lambda_k * factor, self.lambda_m * factor, self.lambda_c * factor, self.margin)

    def to_dict(self) -> Dict[str, float]:
        return {"lambda_k": self.lambda_k, "lambda_m": self.lambda_m, "lambda_c": self.lambda_c, "margin": self.margin}


@dataclass
class DistillTargetSet:
    """Stacked distillation records: patches (N, 3, p, p) and targets (N, target_dim)."""
    patches: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.patches = np.asarray(self.patches, dtype=np.float32)
        self.targets = np.asarray(self.targets, dtype=np.float32)
        if self.patches.ndim != 4 or self.patches.shape[2] != self.patches.shape[3]:
            raise ShapeError(f"Distillation patches must be (N, C, p, p), got {self.patches.shape}")
        if self.targets.ndim != 2 or self.targets.shape[0] != self.patches.shape[0]:
            raise ShapeError(f"Distillation targets {self.targets.shape} do not pair with patches {self.patches.shape}")
        if len(self) == 0:
            raise DataError("Distillation target set is empty")

    def __len__(self) -> int:
        return int(self.patches.shape[0])

    @property
    def patch_size(self) -> int:
        return int(self.patches.shape[-1])

    @property
    def target_dim(self) -> int:
        return int(self.targets.shape[1])

    def sample(self, rng: np.random.Generator, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """``count`` records drawn uniformly with replacement."""
        idx = rng.integers(0, len(self), size=count)
        return self.patches[idx], self.targets[idx]


@dataclass
class TeacherCheckpoint:
    """Trained teacher (plus decoder when distillation was used) and its training record."""
    net: PatchNet
    decoder: Optional[DecoderSpec] = None
    config: Dict[str, Any] = field(default_factory=dict)
    loss_trace: List[Dict[str, float]] = field(default_factory=list)
    seed: int = 0
    iteration: int = 0

    @property
    def patch_size(self) -> int:
        return self.net.patch_size

    @property
    def final_loss(self) -> Optional[float]:
        return self.loss_trace[-1]["total"] if self.loss_trace else None
