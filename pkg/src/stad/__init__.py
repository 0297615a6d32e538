"""
Student-teacher anomaly detection.

Teacher pretraining on patch triplets and distillation targets, student-ensemble
regression of dense teacher descriptors, calibrated regression-error / predictive-variance
anomaly maps with multi-scale fusion, and PRO / ROC evaluation.
"""

__version__ = "0.1.0"

from .utils.logging import get_logger
from .models import RunConfig
from .service_factory import ServiceFactory, get_pipeline, get_service_factory

__all__ = [
    'get_logger',
    'RunConfig',
    'ServiceFactory',
    'get_pipeline',
    'get_service_factory',
]

# Set up package-level logger
logger = get_logger(__name__)
