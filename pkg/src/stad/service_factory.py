"""Factory for creating and configuring services."""

from typing import Optional

from .models import RunConfig
from .repositories import DatasetRepository, RunRepository
from .services import EvaluationService, OneClassService, ScoringService, StudentService, TeacherService
from .workflows.pipeline import AnomalyDetectionPipeline
from .utils.logging import get_logger

logger = get_logger("service_factory")


class ServiceFactory:
    """Factory for creating and managing service dependencies of one run configuration."""

    def __init__(self, config: RunConfig):
        self.config = config
        self._dataset_repository = None
        self._run_repository = None
        self._teacher_service = None
        self._student_service = None
        self._scoring_service = None
        self._evaluation_service = None
        self._oneclass_service = None
        self._pipeline = None

        logger.info("Initialized ServiceFactory")

    def get_dataset_repository(self) -> DatasetRepository:
        """Get or create dataset repository."""
        if self._dataset_repository is None:
            self._dataset_repository = DatasetRepository(self.config)
        return self._dataset_repository

    def get_run_repository(self) -> RunRepository:
        """Get or create run repository."""
        if self._run_repository is None:
            self._run_repository = RunRepository(self.config.run_dir)
        return self._run_repository

    def get_teacher_service(self) -> TeacherService:
        """Get or create teacher service."""
        if self._teacher_service is None:
            self._teacher_service = TeacherService(self.config)
        return self._teacher_service

    def get_student_service(self) -> StudentService:
        """Get or create student service."""
        if self._student_service is None:
            self._student_service = StudentService(self.config)
        return self._student_service

    def get_scoring_service(self) -> ScoringService:
        """Get or create scoring service."""
        if self._scoring_service is None:
            self._scoring_service = ScoringService(self.config)
        return self._scoring_service

    def get_evaluation_service(self) -> EvaluationService:
        """Get or create evaluation service."""
        if self._evaluation_service is None:
            self._evaluation_service = EvaluationService(self.config)
        return self._evaluation_service

    def get_oneclass_service(self) -> OneClassService:
        """Get or create one-class service."""
        if self._oneclass_service is None:
            self._oneclass_service = OneClassService(
                self.config,
                self.get_student_service(),
                self.get_scoring_service(),
            )
        return self._oneclass_service

    def get_pipeline(self) -> AnomalyDetectionPipeline:
        """Get or create the stage pipeline."""
        if self._pipeline is None:
            self._pipeline = AnomalyDetectionPipeline(
                self.config,
                self.get_dataset_repository(),
                self.get_run_repository(),
                self.get_teacher_service(),
                self.get_student_service(),
                self.get_scoring_service(),
                self.get_evaluation_service(),
                self.get_oneclass_service(),
            )
        return self._pipeline


# Global service factory instance
_service_factory: Optional[ServiceFactory] = None


def get_service_factory(config: Optional[RunConfig] = None) -> ServiceFactory:
    """Get the global service factory, rebuilding it when a different config is passed."""
    global _service_factory
    if _service_factory is None or (config is not None and config != _service_factory.config):
        _service_factory = ServiceFactory(config or RunConfig())
    return _service_factory


def get_pipeline(config: Optional[RunConfig] = None) -> AnomalyDetectionPipeline:
    """Get the stage pipeline."""
    return get_service_factory(config).get_pipeline()


def reset_services() -> None:
    """Drop the global factory (tests and repeated CLI invocations in one process)."""
    global _service_factory
    _service_factory = None
