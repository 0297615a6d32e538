"""Triplet augmentation and the training losses."""

from .augment import sample_triplet, sample_triplet_batch, stack_triplets, triplet_rng, zoom_crop
from .losses import (
    knowledge_loss_from_descriptors,
    loss_compactness,
    loss_knowledge,
    loss_metric,
    metric_loss_from_descriptors,
    student_loss,
    teacher_loss,
)

__all__ = [
    "sample_triplet",
    "sample_triplet_batch",
    "stack_triplets",
    "triplet_rng",
    "zoom_crop",
    "loss_metric",
    "loss_compactness",
    "loss_knowledge",
    "metric_loss_from_descriptors",
    "knowledge_loss_from_descriptors",
    "teacher_loss",
    "student_loss",
]
