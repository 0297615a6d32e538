"""Service layer for training, scoring and evaluation."""

from .teacher_service import TeacherService
from .student_service import StudentService
from .scoring_service import ScoringService
from .evaluation_service import EvaluationService
from .oneclass_service import OneClassService

__all__ = [
    "TeacherService",
    "StudentService",
    "ScoringService",
    "EvaluationService",
    "OneClassService"
]
