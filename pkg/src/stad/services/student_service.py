"""Service for feature normalization statistics and student-ensemble training."""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..core.exceptions import ConfigError, DataError
from ..models import FeatureStats, RunConfig, StudentEnsemble
from ..nets.dense import DenseNet, dense_forward, densify, extract_dense
from ..nets.patch_net import PatchNet, build_teacher_patch_net
from ..numerics import AdamState, ComputeGraph, adam_step, backward
from ..numerics import functional as F
from ..training.losses import student_loss
from ..utils.logging import get_logger

logger = get_logger("student_service")

LOG_EVERY_EPOCHS = 10


class StatsAccumulator:
    """Streaming per-dimension mean/variance over descriptors, float64 sums."""

    def __init__(self, dim: int):
        self.dim = dim
        self.count = 0
        self.total = np.zeros(dim, dtype=np.float64)
        self.total_sq = np.zeros(dim, dtype=np.float64)

    def update(self, descriptors: np.ndarray) -> None:
        """Add descriptors laid out as (d, ...) or (N, d)."""
        if descriptors.ndim == 2 and descriptors.shape[1] == self.dim:
            flat = descriptors.T.astype(np.float64)
        else:
            flat = descriptors.reshape(self.dim, -1).astype(np.float64)
        self.count += flat.shape[1]
        self.total += flat.sum(axis=1)
        self.total_sq += np.square(flat).sum(axis=1)

    def finalize(self, epsilon: float) -> FeatureStats:
        if self.count == 0:
            raise DataError("Cannot compute feature statistics over an empty dataset")
        mean = self.total / self.count
        variance = np.maximum(self.total_sq / self.count - mean * mean, 0.0)
        sigma = np.sqrt(variance)
        dead = int(np.sum(sigma < epsilon))
        if dead:
            logger.warning(f"{dead} descriptor dimensions have zero variance; std floored at {epsilon}")
        return FeatureStats(mu=mean, sigma=sigma, epsilon=epsilon, count=self.count)


def derive_student_seed(seed: int, patch_size: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, patch_size, index]).generate_state(1)[0])


class StudentService:
    """Trains ensembles of students to regress normalized teacher descriptors."""

    def __init__(self, config: RunConfig):
        self.config = config
        logger.info("Initialized StudentService")

    def _adam(self) -> AdamState:
        cfg = self.config
        return AdamState(
            lr=cfg.student_lr,
            beta1=cfg.adam_beta1,
            beta2=cfg.adam_beta2,
            eps=cfg.adam_eps,
            weight_decay=cfg.student_weight_decay,
            decoupled=cfg.decoupled_weight_decay,
        )

    # ------------------------------------------------------------------
    # Normalization statistics
    # ------------------------------------------------------------------

    def compute_feature_stats(self, teacher: DenseNet, images: Sequence[np.ndarray]) -> FeatureStats:
        """Per-dimension mean/std of teacher descriptors over every pixel of every image."""
        if not len(images):
            raise DataError("Cannot compute feature statistics over an empty dataset")
        accumulator = StatsAccumulator(teacher.descriptor_dim)
        for image in images:
            accumulator.update(extract_dense(teacher, image))
        stats = accumulator.finalize(self.config.sigma_floor)
        logger.info(f"Feature stats over {stats.count} descriptors (p={teacher.patch_size})")
        return stats

    def compute_patch_stats(self, teacher: PatchNet, patches: np.ndarray) -> FeatureStats:
        """Statistics of single-descriptor inputs (images zoomed to p)."""
        if not len(patches):
            raise DataError("Cannot compute feature statistics over an empty dataset")
        accumulator = StatsAccumulator(teacher.descriptor_dim)
        for batch in self._batches(patches):
            accumulator.update(teacher.forward_batch(batch).data)
        return accumulator.finalize(self.config.sigma_floor)

    # ------------------------------------------------------------------
    # Training on dense maps
    # ------------------------------------------------------------------

    def _target_cache(self, teacher: DenseNet, stats: FeatureStats, images: Sequence[np.ndarray]) -> Optional[List[np.ndarray]]:
        first = images[0]
        bytes_per_map = teacher.descriptor_dim * first.shape[1] * first.shape[2] * 4
        budget = self.config.target_cache_mb * 1024 * 1024
        if bytes_per_map * len(images) > budget:
            logger.info(
                f"Teacher targets need {bytes_per_map * len(images) / 2**20:.0f}MB, over the "
                f"{self.config.target_cache_mb}MB cache budget; recomputing per step"
            )
            return None
        return [stats.normalize(extract_dense(teacher, image)) for image in images]

    def train_students(
        self,
        teacher: PatchNet,
        stats: FeatureStats,
        images: Sequence[np.ndarray],
        num_students: Optional[int] = None,
        epochs: Optional[int] = None,
        progress_callback: Optional[Callable[[int, int, float], None]] = None,
    ) -> StudentEnsemble:
        """
        Train M randomly initialized students on full dense maps, one image per step.

        Args:
            teacher: Trained teacher patch network
            stats: Normalization statistics of the teacher's descriptors
            images: Anomaly-free training images (3, h, w)
            num_students: Ensemble size M (defaults to the run config)
            epochs: Passes over ``images`` (defaults to the run config)
            progress_callback: Called with (student index, epoch, mean epoch loss)

        Returns:
            StudentEnsemble with per-student epoch losses
        """
        cfg = self.config
        num_students = num_students if num_students is not None else cfg.num_students
        epochs = epochs if epochs is not None else cfg.student_epochs
        if num_students < 1:
            raise ConfigError(f"An ensemble needs M >= 1 students, got {num_students}")
        if epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {epochs}")
        if not len(images):
            raise DataError("Student training needs at least one anomaly-free image")
        if stats.dim != teacher.descriptor_dim:
            raise ConfigError(f"Feature stats dim {stats.dim} does not match teacher dim {teacher.descriptor_dim}")

        dense_teacher = densify(teacher)
        cache = self._target_cache(dense_teacher, stats, images)

        def _target(index: int) -> np.ndarray:
            if cache is not None:
                return cache[index]
            return stats.normalize(extract_dense(dense_teacher, images[index]))

        seeds = [derive_student_seed(cfg.seed, teacher.patch_size, i) for i in range(num_students)]
        students = [
            build_teacher_patch_net(teacher.patch_size, teacher.descriptor_dim, teacher.channel_scale, seed=s)
            for s in seeds
        ]

        def _train_one(index: int) -> List[float]:
            student = students[index]
            dense_student = densify(student)
            state = self._adam()
            history = []
            for epoch in range(1, epochs + 1):
                order = np.random.default_rng([seeds[index], epoch]).permutation(len(images))
                losses = []
                for i in order:
                    target = _target(i)
                    with ComputeGraph() as graph:
                        loss = student_loss(dense_forward(dense_student, images[i][None]), target)
                    student.params.zero_grad()
                    backward(graph, loss)
                    adam_step(student.params, state)
                    losses.append(loss.item())
                history.append(float(np.mean(losses)))
                if epoch == 1 or epoch % LOG_EVERY_EPOCHS == 0 or epoch == epochs:
                    logger.info(f"[p={teacher.patch_size}] student {index + 1}/{num_students} epoch {epoch}/{epochs}: loss={history[-1]:.5f}")
                if progress_callback:
                    progress_callback(index, epoch, history[-1])
            return history

        start = time.perf_counter()
        if cfg.num_workers > 1 and num_students > 1:
            with ThreadPoolExecutor(max_workers=cfg.num_workers, thread_name_prefix="students") as executor:
                histories = list(executor.map(_train_one, range(num_students)))
        else:
            histories = [_train_one(i) for i in range(num_students)]

        logger.info(f"Trained {num_students} students (p={teacher.patch_size}) in {time.perf_counter() - start:.1f}s")
        return StudentEnsemble(students=students, seeds=seeds, epochs_trained=epochs, loss_history=histories)

    # ------------------------------------------------------------------
    # Training on single descriptors (one-class protocol)
    # ------------------------------------------------------------------

    def _batches(self, patches: np.ndarray) -> List[np.ndarray]:
        size = self.config.oneclass_batch_size
        return [patches[i:i + size] for i in range(0, len(patches), size)]

    def train_students_on_patches(
        self,
        teacher: PatchNet,
        stats: FeatureStats,
        patches: np.ndarray,
        num_students: Optional[int] = None,
        epochs: Optional[int] = None,
    ) -> StudentEnsemble:
        """Train students on images already zoomed to p×p; each contributes one descriptor."""
        cfg = self.config
        num_students = num_students if num_students is not None else cfg.num_students
        epochs = epochs if epochs is not None else cfg.student_epochs
        if num_students < 1:
            raise ConfigError(f"An ensemble needs M >= 1 students, got {num_students}")
        if epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {epochs}")
        if not len(patches):
            raise DataError("Student training needs at least one anomaly-free image")

        targets = np.concatenate([
            (teacher.forward_batch(batch).data - stats.mu) / stats.sigma for batch in self._batches(patches)
        ]).astype(np.float32)
        seeds = [derive_student_seed(cfg.seed, teacher.patch_size, i) for i in range(num_students)]
        students, histories = [], []
        for index, seed in enumerate(seeds):
            student = build_teacher_patch_net(teacher.patch_size, teacher.descriptor_dim, teacher.channel_scale, seed=seed)
            state = self._adam()
            history = []
            for epoch in range(1, epochs + 1):
                order = np.random.default_rng([seed, epoch]).permutation(len(patches))
                losses = []
                for start in range(0, len(order), cfg.oneclass_batch_size):
                    idx = order[start:start + cfg.oneclass_batch_size]
                    with ComputeGraph() as graph:
                        prediction = student.forward_batch(patches[idx])
                        loss = F.mean(F.sum_(F.square(F.sub(prediction, targets[idx])), axis=1))
                    student.params.zero_grad()
                    backward(graph, loss)
                    adam_step(student.params, state)
                    losses.append(loss.item())
                history.append(float(np.mean(losses)))
            if history:
                logger.debug(f"[p={teacher.patch_size}] patch student {index + 1}: final loss {history[-1]:.5f}")
            students.append(student)
            histories.append(history)
        return StudentEnsemble(students=students, seeds=seeds, epochs_trained=epochs, loss_history=histories)

    @staticmethod
    def loss_summary(ensemble: StudentEnsemble) -> Dict[str, float]:
        return {f"student_{i + 1}": h[-1] for i, h in enumerate(ensemble.loss_history) if h}
