"""Repository for image datasets on disk: MVTec-style categories, pretraining corpora and one-class sets."""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from skimage import io
from skimage.transform import resize
from skimage.util import img_as_float32

from ..core.exceptions import DataError
from ..models import DatasetEntry, DatasetIndex, GOOD_LABEL, RunConfig
from ..utils.logging import get_logger

logger = get_logger("dataset_repository")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
MASK_SUFFIX = "_mask"


def resize_image(image: np.ndarray, side: int, order: int = 1) -> np.ndarray:
    """
    Zoom a C×H×W image to C×side×side.

    ``order=1`` is bilinear (images), ``order=0`` nearest neighbour (masks). Pixel
    centres are aligned and no anti-aliasing filter is applied.
    """
    if side < 1:
        raise DataError(f"Resize target must be >= 1, got {side}")
    if image.shape[1:] == (side, side):
        return image.astype(np.float32, copy=True)
    out = resize(
        image.transpose(1, 2, 0),
        (side, side),
        order=order,
        mode="edge",
        anti_aliasing=False,
        preserve_range=True,
    )
    return out.transpose(2, 0, 1).astype(np.float32)


def read_image(path) -> np.ndarray:
    """Decode an image file to 3×H×W float32 in [0, 1]; grayscale is replicated and alpha dropped."""
    try:
        pixels = io.imread(str(path))
    except Exception as exc:
        raise DataError(f"Could not decode image {path}: {exc}") from exc
    pixels = img_as_float32(pixels)
    if pixels.ndim == 2:
        pixels = np.repeat(pixels[:, :, None], 3, axis=2)
    elif pixels.ndim == 3 and pixels.shape[2] == 4:
        pixels = pixels[:, :, :3]
    elif pixels.ndim != 3 or pixels.shape[2] != 3:
        raise DataError(f"Unsupported image layout {pixels.shape} in {path}")
    return np.ascontiguousarray(pixels.transpose(2, 0, 1), dtype=np.float32)


def read_mask(path) -> np.ndarray:
    """Decode a ground-truth mask to an H×W boolean array (any non-zero pixel is anomalous)."""
    try:
        pixels = io.imread(str(path))
    except Exception as exc:
        raise DataError(f"Could not decode mask {path}: {exc}") from exc
    if pixels.ndim == 3:
        pixels = pixels[:, :, 0]
    return pixels > 0


def list_images(directory: Path) -> List[Path]:
    if not directory.is_dir():
        return []
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def split_validation(paths: Sequence[str], fraction: float, seed: int) -> Tuple[List[str], List[str]]:
    """Seeded hold-out of round(n·fraction) paths, at least one, leaving at least one for training."""
    n = len(paths)
    if n < 2:
        raise DataError(f"Need at least 2 anomaly-free training images to hold out a validation set, got {n}")
    n_val = min(max(1, int(round(n * fraction))), n - 1)
    held_out = set(np.random.default_rng(seed).permutation(n)[:n_val].tolist())
    train = [p for i, p in enumerate(paths) if i not in held_out]
    validation = [p for i, p in enumerate(paths) if i in held_out]
    return train, validation


class DatasetRepository:
    """
    Loads images and masks laid out as

        <category>/train/good/*
        <category>/test/<label>/*
        <category>/ground_truth/<label>/<stem>_mask.*
    """

    def __init__(self, config: RunConfig):
        self.config = config
        logger.info("Initialized DatasetRepository")

    # ------------------------------------------------------------------
    # Indexing
    # ------------------------------------------------------------------

    def _find_mask(self, root: Path, label: str, stem: str) -> Optional[Path]:
        directory = root / "ground_truth" / label
        for suffix in IMAGE_SUFFIXES:
            candidate = directory / f"{stem}{MASK_SUFFIX}{suffix}"
            if candidate.exists():
                return candidate
        return None

    def load_dataset(self, root: Optional[str] = None) -> DatasetIndex:
        """
        Index one category with a seeded validation hold-out.

        Args:
            root: Category directory (defaults to ``category_root`` of the run config)

        Returns:
            DatasetIndex with train, validation and labelled test entries
        """
        root_path = Path(root or self.config.category_root or "")
        if not root_path.is_dir():
            raise DataError(f"Category directory not found: {root_path}")

        train_paths = [str(p) for p in list_images(root_path / "train" / GOOD_LABEL)]
        if not train_paths:
            raise DataError(f"No anomaly-free training images under {root_path / 'train' / GOOD_LABEL}")
        train, validation = split_validation(train_paths, self.config.validation_fraction, self.config.seed)

        test: List[DatasetEntry] = []
        test_root = root_path / "test"
        labels = sorted(d.name for d in test_root.iterdir() if d.is_dir()) if test_root.is_dir() else []
        for label in labels:
            for path in list_images(test_root / label):
                mask = None
                if label != GOOD_LABEL:
                    mask_path = self._find_mask(root_path, label, path.stem)
                    if mask_path is None:
                        raise DataError(f"Missing ground-truth mask for defective test image {path}")
                    mask = str(mask_path)
                test.append(DatasetEntry(image_path=str(path), label=label, mask_path=mask))

        index = DatasetIndex(
            root=str(root_path),
            train=[DatasetEntry(p) for p in train],
            validation=[DatasetEntry(p) for p in validation],
            test=test,
        )
        logger.info(
            f"Indexed {index.category}: {len(index.train)} train, {len(index.validation)} validation, "
            f"{len(index.test)} test ({', '.join(index.test_labels) or 'none'})"
        )
        return index

    # ------------------------------------------------------------------
    # Loading
    # ------------------------------------------------------------------

    def load_images(self, entries: Sequence[DatasetEntry], side: Optional[int] = None) -> List[np.ndarray]:
        side = side or self.config.image_side
        return [resize_image(read_image(e.image_path), side) for e in entries]

    def load_test_set(self, index: DatasetIndex) -> Tuple[List[np.ndarray], List[np.ndarray], List[DatasetEntry]]:
        """Test images and masks at ``image_side``; anomaly-free images get an all-false mask."""
        side = self.config.image_side
        images, masks = [], []
        for entry in index.test:
            raw = read_image(entry.image_path)
            if entry.mask_path:
                mask = read_mask(entry.mask_path)
                if mask.shape != raw.shape[1:]:
                    raise DataError(
                        f"Mask {entry.mask_path} is {mask.shape}, image {entry.image_path} is {raw.shape[1:]}"
                    )
                mask = resize_image(mask[None].astype(np.float32), side, order=0)[0] > 0.5
            else:
                mask = np.zeros((side, side), dtype=bool)
            images.append(resize_image(raw, side))
            masks.append(mask)
        return images, masks, list(index.test)

    def load_corpus(self, root: Optional[str] = None) -> List[np.ndarray]:
        """Every image under ``root`` (recursively) at native resolution, for teacher pretraining."""
        root_path = Path(root or self.config.corpus_root or "")
        if not root_path.is_dir():
            raise DataError(f"Corpus directory not found: {root_path}")
        paths = sorted(p for p in root_path.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
        if len(paths) < 2:
            raise DataError(f"A pretraining corpus needs at least 2 images, found {len(paths)} under {root_path}")
        logger.info(f"Loading {len(paths)} corpus images from {root_path}")
        return [read_image(p) for p in paths]

    def load_oneclass(self, root: Optional[str] = None) -> Dict[str, Tuple[List[Path], List[Path]]]:
        """Map class name -> (train paths, test paths) for a ``train/<class>/``, ``test/<class>/`` tree."""
        root_path = Path(root or self.config.oneclass_root or "")
        train_root, test_root = root_path / "train", root_path / "test"
        if not train_root.is_dir() or not test_root.is_dir():
            raise DataError(f"One-class dataset needs train/ and test/ under {root_path}")
        classes = sorted(d.name for d in train_root.iterdir() if d.is_dir())
        if len(classes) < 2:
            raise DataError(f"One-class evaluation needs at least 2 classes, found {classes}")
        layout = {c: (list_images(train_root / c), list_images(test_root / c)) for c in classes}
        empty = [c for c, (train, test) in layout.items() if not train or not test]
        if empty:
            raise DataError(f"Classes without train or test images: {empty}")
        return layout
