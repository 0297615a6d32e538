"""PNG helpers for images, masks and anomaly-map visualizations."""

from pathlib import Path

import numpy as np
from skimage import io
from skimage.util import img_as_ubyte

from ..core.exceptions import ShapeError

OVERLAY_ALPHA = 0.6


def _prepare(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def save_png(image: np.ndarray, path) -> None:
    """Write a 3×H×W float image in [0, 1] as an 8-bit RGB PNG."""
    pixels = np.clip(image.transpose(1, 2, 0), 0.0, 1.0)
    io.imsave(str(_prepare(path)), img_as_ubyte(pixels), check_contrast=False)


def save_mask_png(mask: np.ndarray, path) -> None:
    io.imsave(str(_prepare(path)), (np.asarray(mask, dtype=bool) * 255).astype(np.uint8), check_contrast=False)


def scale_scores(scores: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant map becomes all zeros."""
    low, high = float(scores.min()), float(scores.max())
    if high - low <= 0:
        return np.zeros_like(scores, dtype=np.float32)
    return ((scores - low) / (high - low)).astype(np.float32)


def overlay(image: np.ndarray, scores: np.ndarray, alpha: float = OVERLAY_ALPHA) -> np.ndarray:
    """H×W×3 visualization with the scaled scores blended onto the red channel."""
    pixels = np.clip(image.transpose(1, 2, 0), 0.0, 1.0).astype(np.float32).copy()
    pixels[:, :, 0] = (1.0 - alpha) * pixels[:, :, 0] + alpha * scale_scores(scores)
    return pixels


def write_overlay_png(image: np.ndarray, scores: np.ndarray, path, alpha: float = OVERLAY_ALPHA) -> None:
    """Write the 8-bit companion visualization of an anomaly map."""
    if image.shape[1:] != scores.shape:
        raise ShapeError(f"Image {image.shape[1:]} and score map {scores.shape} differ in size")
    io.imsave(str(_prepare(path)), img_as_ubyte(np.clip(overlay(image, scores, alpha), 0.0, 1.0)), check_contrast=False)
