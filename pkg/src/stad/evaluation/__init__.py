"""Evaluation metrics."""

from .metrics import connected_components, pro_at_threshold, pro_curve, pro_auc, pro_auc_from_curve, roc_auc

__all__ = ["connected_components", "pro_at_threshold", "pro_curve", "pro_auc", "pro_auc_from_curve", "roc_auc"]
