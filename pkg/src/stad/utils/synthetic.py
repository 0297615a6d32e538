"""
Synthetic textured datasets with inserted foreign patches and exact masks.

Backgrounds are sums of two oriented sinusoidal gratings with random phases, a fixed
tint and mild pixel noise. Defects are square patches of saturated colour noise.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from .image_io import save_mask_png, save_png
from .logging import get_logger

logger = get_logger("synthetic")

DEFECT_LABEL = "foreign"


@dataclass(frozen=True)
class TextureFamily:
    """Grating orientations (degrees), periods (pixels) and tint of one texture class."""
    angles: Tuple[float, float] = (30.0, 110.0)
    periods: Tuple[float, float] = (12.0, 20.0)
    tint: Tuple[float, float, float] = (0.55, 0.45, 0.35)
    contrast: float = 0.18
    noise_std: float = 0.02


CATEGORY_FAMILY = TextureFamily()


def texture_image(rng: np.random.Generator, side: int, family: TextureFamily = CATEGORY_FAMILY) -> np.ndarray:
    """One 3×side×side background in [0, 1]."""
    rows, cols = np.mgrid[0:side, 0:side].astype(np.float64)
    field = np.zeros((side, side))
    for angle, period in zip(family.angles, family.periods):
        theta = np.deg2rad(angle + rng.normal(0.0, 2.0))
        phase = rng.uniform(0.0, 2 * np.pi)
        field += np.sin(2 * np.pi * (cols * np.cos(theta) + rows * np.sin(theta)) / period + phase)
    field /= len(family.angles)
    image = np.stack([t + family.contrast * field for t in family.tint])
    image += rng.normal(0.0, family.noise_std, size=image.shape)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def insert_foreign_patch(
    image: np.ndarray, rng: np.random.Generator, size: int = 16
) -> Tuple[np.ndarray, np.ndarray]:
    """Copy of ``image`` with one size×size colour-noise square, plus its exact mask."""
    _, height, width = image.shape
    top = int(rng.integers(0, height - size + 1))
    left = int(rng.integers(0, width - size + 1))
    defect = image.copy()
    base = rng.uniform(0.0, 1.0, size=(3, 1, 1))
    defect[:, top:top + size, left:left + size] = np.clip(
        base + rng.uniform(-0.35, 0.35, size=(3, size, size)), 0.0, 1.0
    )
    mask = np.zeros((height, width), dtype=bool)
    mask[top:top + size, left:left + size] = True
    return defect.astype(np.float32), mask


def random_family(rng: np.random.Generator) -> TextureFamily:
    """A texture class drawn away from the category family, for pretraining corpora."""
    return TextureFamily(
        angles=(float(rng.uniform(0, 180)), float(rng.uniform(0, 180))),
        periods=(float(rng.uniform(4, 40)), float(rng.uniform(4, 40))),
        tint=tuple(float(v) for v in rng.uniform(0.2, 0.8, size=3)),
        contrast=float(rng.uniform(0.1, 0.3)),
        noise_std=float(rng.uniform(0.0, 0.05)),
    )


def write_synthetic_category(
    root,
    seed: int = 7,
    num_train: int = 100,
    num_test_anomalous: int = 20,
    num_test_good: int = 10,
    side: int = 128,
    defect_size: int = 16,
) -> Path:
    """Write an MVTec-style category (train/good, test/good, test/foreign, ground_truth/foreign)."""
    root = Path(root)
    rng = np.random.default_rng([seed, 0])
    for i in range(num_train):
        save_png(texture_image(rng, side), root / "train" / "good" / f"{i:03d}.png")
    for i in range(num_test_good):
        save_png(texture_image(rng, side), root / "test" / "good" / f"{i:03d}.png")
    for i in range(num_test_anomalous):
        image, mask = insert_foreign_patch(texture_image(rng, side), rng, defect_size)
        save_png(image, root / "test" / DEFECT_LABEL / f"{i:03d}.png")
        save_mask_png(mask, root / "ground_truth" / DEFECT_LABEL / f"{i:03d}_mask.png")
    logger.info(
        f"Wrote synthetic category to {root}: {num_train} train, {num_test_good} good and "
        f"{num_test_anomalous} defective test images at {side}×{side}"
    )
    return root


def write_pretraining_corpus(root, seed: int = 7, count: int = 40, side: int = 128) -> Path:
    """Write ``count`` images from random texture families, disjoint from the category."""
    root = Path(root)
    rng = np.random.default_rng([seed, 1])
    for i in range(count):
        save_png(texture_image(rng, side, random_family(rng)), root / f"{i:03d}.png")
    logger.info(f"Wrote {count} pretraining images to {root}")
    return root
