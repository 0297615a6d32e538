"""Repository layer for data access."""

from .dataset_repository import DatasetRepository, read_image, read_mask, resize_image
from .run_repository import RunRepository
from . import formats

__all__ = ["DatasetRepository", "RunRepository", "read_image", "read_mask", "resize_image", "formats"]
