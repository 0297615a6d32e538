"""
Utility modules: logging, PNG output and synthetic data.
"""

from .logging import setup_logger, get_logger, set_global_level
from .image_io import save_png, save_mask_png, write_overlay_png
from .synthetic import write_synthetic_category, write_pretraining_corpus

__all__ = [
    'setup_logger',
    'get_logger',
    'set_global_level',
    'save_png',
    'save_mask_png',
    'write_overlay_png',
    'write_synthetic_category',
    'write_pretraining_corpus'
]
