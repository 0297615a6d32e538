"""Triplet sampling for teacher pretraining."""

from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence

import numpy as np
from skimage.color import rgb2gray
from skimage.transform import AffineTransform, warp

from ..core.exceptions import DataError
from ..models.training import AugmentConfig, Triplet


def triplet_rng(seed: int, iteration: int, slot: int) -> np.random.Generator:
    """Generator for one batch slot; independent of worker scheduling."""
    return np.random.default_rng([seed, iteration, slot])


def zoom_crop(image: np.ndarray, zoom_side: int, top: int, left: int, size: int) -> np.ndarray:
    """
    The size×size crop at (top, left) of ``image`` bilinearly zoomed to zoom_side×zoom_side.

    Only the crop is interpolated; the zoomed image is never materialized.
    """
    channels, height, width = image.shape
    sx, sy = zoom_side / width, zoom_side / height
    transform = AffineTransform(
        scale=(1.0 / sx, 1.0 / sy),
        translation=((left + 0.5) / sx - 0.5, (top + 0.5) / sy - 0.5),
    )
    crop = warp(
        image.transpose(1, 2, 0),
        inverse_map=transform,
        output_shape=(size, size),
        order=1,
        mode="edge",
        preserve_range=True,
    )
    return crop.transpose(2, 0, 1).astype(np.float32)


def to_grayscale(patch: np.ndarray) -> np.ndarray:
    gray = rgb2gray(patch.transpose(1, 2, 0)).astype(np.float32)
    return np.repeat(gray[None], patch.shape[0], axis=0)


def sample_triplet(corpus: Sequence[np.ndarray], cfg: AugmentConfig, rng: np.random.Generator) -> Triplet:
    """
    Anchor and positive come from one zoomed image, the negative from another.

    The positive is shifted by up to ``cfg.translate_range`` pixels per axis, scaled in
    luminance and perturbed with Gaussian noise.
    """
    if len(corpus) < 2:
        raise DataError(f"Triplet sampling needs at least 2 images, got {len(corpus)}")
    p = cfg.patch_size
    shift = cfg.translate_range
    low, high = cfg.zoom_side_range

    index = int(rng.integers(len(corpus)))
    side = int(rng.integers(low, high + 1))
    top = int(rng.integers(shift, side - p - shift + 1))
    left = int(rng.integers(shift, side - p - shift + 1))
    anchor = zoom_crop(corpus[index], side, top, left, p)

    dy, dx = (int(v) for v in rng.integers(-shift, shift + 1, size=2))
    positive = zoom_crop(corpus[index], side, top + dy, left + dx, p)
    positive = np.clip(positive * np.float32(rng.uniform(*cfg.luminance_range)), 0.0, 1.0)

    other = int(rng.integers(len(corpus) - 1))
    if other >= index:
        other += 1
    neg_side = int(rng.integers(low, high + 1))
    neg_top = int(rng.integers(0, neg_side - p + 1))
    neg_left = int(rng.integers(0, neg_side - p + 1))
    negative = zoom_crop(corpus[other], neg_side, neg_top, neg_left, p)

    if rng.random() < cfg.grayscale_prob:
        anchor, positive, negative = to_grayscale(anchor), to_grayscale(positive), to_grayscale(negative)

    if cfg.noise_std > 0:
        positive = positive + rng.normal(0.0, cfg.noise_std, size=positive.shape).astype(np.float32)
    return Triplet(anchor=anchor, positive=positive.astype(np.float32), negative=negative)


def sample_triplet_batch(
    corpus: Sequence[np.ndarray],
    cfg: AugmentConfig,
    iteration: int,
    batch_size: int,
    num_workers: int = 1,
) -> List[Triplet]:
    """``batch_size`` triplets for one iteration, identical for any ``num_workers``."""
    def _slot(slot: int) -> Triplet:
        return sample_triplet(corpus, cfg, triplet_rng(cfg.rng_seed, iteration, slot))

    if num_workers <= 1:
        return [_slot(slot) for slot in range(batch_size)]
    with ThreadPoolExecutor(max_workers=num_workers, thread_name_prefix="triplets") as executor:
        return list(executor.map(_slot, range(batch_size)))


def stack_triplets(triplets: Sequence[Triplet]) -> np.ndarray:
    """(3N, C, p, p): all anchors, then positives, then negatives."""
    return np.concatenate([
        np.stack([t.anchor for t in triplets]),
        np.stack([t.positive for t in triplets]),
        np.stack([t.negative for t in triplets]),
    ]).astype(np.float32)
