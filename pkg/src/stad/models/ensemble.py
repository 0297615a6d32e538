"""Student ensemble and the per-scale artifact bundle used for scoring."""

from dataclasses import dataclass, field
from typing import List, Optional

from ..core.exceptions import ConfigError
from ..nets.dense import DenseNet, densify
from ..nets.patch_net import PatchNet
from .scores import FeatureStats, ScoreCalibration

# Nominal covariance of each student's Gaussian; the training criterion and both scores do not use it
NOMINAL_COVARIANCE = 1.0


@dataclass
class StudentEnsemble:
    """M students sharing the teacher's architecture, patch size and descriptor dim."""
    students: List[PatchNet]
    seeds: List[int] = field(default_factory=list)
    covariance: float = NOMINAL_COVARIANCE
    epochs_trained: int = 0
    # Mean training loss per student per epoch
    loss_history: List[List[float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.students:
            raise ConfigError("A student ensemble needs at least one student")
        first = self.students[0]
        for student in self.students[1:]:
            if student.architecture() != first.architecture():
                raise ConfigError("All students of an ensemble must share one architecture")
        self._dense: List[DenseNet] = []

    def __len__(self) -> int:
        return len(self.students)

    @property
    def patch_size(self) -> int:
        return self.students[0].patch_size

    @property
    def descriptor_dim(self) -> int:
        return self.students[0].descriptor_dim

    @property
    def dense_students(self) -> List[DenseNet]:
        if len(self._dense) != len(self.students):
            self._dense = [densify(s) for s in self.students]
        return self._dense

    def check_compatible(self, teacher: PatchNet) -> None:
        if teacher.patch_size != self.patch_size or teacher.descriptor_dim != self.descriptor_dim:
            raise ConfigError(
                f"Ensemble (p={self.patch_size}, d={self.descriptor_dim}) does not match "
                f"teacher (p={teacher.patch_size}, d={teacher.descriptor_dim})"
            )


@dataclass
class ScaleArtifacts:
    """Everything needed to score at one receptive field."""
    teacher: PatchNet
    ensemble: StudentEnsemble
    stats: FeatureStats
    calibration: Optional[ScoreCalibration] = None

    def __post_init__(self):
        self.ensemble.check_compatible(self.teacher)
        if self.stats.dim != self.teacher.descriptor_dim:
            raise ConfigError(f"Feature stats dim {self.stats.dim} does not match teacher dim {self.teacher.descriptor_dim}")
        self._dense_teacher: Optional[DenseNet] = None

    @property
    def patch_size(self) -> int:
        return self.teacher.patch_size

    @property
    def dense_teacher(self) -> DenseNet:
        if self._dense_teacher is None:
            self._dense_teacher = densify(self.teacher)
        return self._dense_teacher

    def prepare(self) -> "ScaleArtifacts":
        """Build the dense teacher and students up front."""
        self.dense_teacher
        self.ensemble.dense_students
        return self
