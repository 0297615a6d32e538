"""Workflow orchestration."""

from .pipeline import AnomalyDetectionPipeline

__all__ = ["AnomalyDetectionPipeline"]
