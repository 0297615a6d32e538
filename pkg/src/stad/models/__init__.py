"""Data models for student-teacher anomaly detection."""

from .run_config import RunConfig, SUPPORTED_SCALES, SCORE_MODES
from .dataset import DatasetEntry, DatasetIndex, GOOD_LABEL
from .training import AugmentConfig, Triplet, TeacherLossWeights, DistillTargetSet, TeacherCheckpoint
from .scores import FeatureStats, ScoreCalibration, AnomalyMap, DEFAULT_SIGMA_FLOOR
from .ensemble import StudentEnsemble, ScaleArtifacts, NOMINAL_COVARIANCE
from .evaluation import Region, PROCurvePoint, EvaluationSummary

__all__ = [
    "RunConfig",
    "SUPPORTED_SCALES",
    "SCORE_MODES",
    "DatasetEntry",
    "DatasetIndex",
    "GOOD_LABEL",
    "AugmentConfig",
    "Triplet",
    "TeacherLossWeights",
    "DistillTargetSet",
    "TeacherCheckpoint",
    "FeatureStats",
    "ScoreCalibration",
    "AnomalyMap",
    "DEFAULT_SIGMA_FLOOR",
    "StudentEnsemble",
    "ScaleArtifacts",
    "NOMINAL_COVARIANCE",
    "Region",
    "PROCurvePoint",
    "EvaluationSummary",
]
