"""Workflow for the staged train / calibrate / score / evaluate pipeline."""

import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..core.exceptions import ConfigError, DataError
from ..models import AnomalyMap, DatasetIndex, EvaluationSummary, RunConfig, ScaleArtifacts
from ..nets.dense import densify
from ..repositories import DatasetRepository, RunRepository, formats
from ..services import EvaluationService, OneClassService, ScoringService, StudentService, TeacherService
from ..utils.logging import get_logger

logger = get_logger("pipeline")

# Fields that must agree between the stage that wrote an artifact and the stage reading it
ARCHITECTURE_KEYS = ("descriptor_dim", "channel_scale")
DATA_KEYS = ("image_side", "category_root", "validation_fraction", "seed")
SCALE_PLACEHOLDER = "{p}"


class AnomalyDetectionPipeline:
    """
    Orchestrates the stages of one run directory.

    Every stage reads its inputs from files written by earlier stages, so stages can be
    run in separate processes and resumed after a failure.
    """

    def __init__(
        self,
        config: RunConfig,
        dataset_repository: DatasetRepository,
        run_repository: RunRepository,
        teacher_service: TeacherService,
        student_service: StudentService,
        scoring_service: ScoringService,
        evaluation_service: EvaluationService,
        oneclass_service: OneClassService,
    ):
        self.config = config
        self.datasets = dataset_repository
        self.runs = run_repository
        self.teacher_service = teacher_service
        self.student_service = student_service
        self.scoring_service = scoring_service
        self.evaluation_service = evaluation_service
        self.oneclass_service = oneclass_service
        logger.info("Initialized AnomalyDetectionPipeline")

    # ------------------------------------------------------------------
    # Stage bookkeeping
    # ------------------------------------------------------------------

    def _check_echo(self, keys: Tuple[str, ...]) -> None:
        """Refuse to mix artifacts written under a different configuration."""
        config_path = self.runs.root / "config.json"
        if not config_path.exists():
            return
        previous = self.runs.load_config().to_dict()
        current = self.config.to_dict()
        mismatched = [k for k in keys if previous.get(k) != current.get(k)]
        if mismatched:
            details = ", ".join(f"{k}: {previous.get(k)!r} -> {current.get(k)!r}" for k in mismatched)
            raise ConfigError(f"Run directory {self.runs.root} was written with a different configuration ({details})")

    def _start_stage(self, name: str, keys: Tuple[str, ...] = ()) -> float:
        self._check_echo(keys)
        self.runs.save_config(self.config)
        logger.info(f"=== {name} (scales {self.config.scales}) ===")
        return time.perf_counter()

    def _load_teacher(self, patch_size: int):
        checkpoint = self.runs.load_teacher(patch_size)
        for key in ARCHITECTURE_KEYS:
            stored = checkpoint.config.get(key)
            if stored is not None and stored != getattr(self.config, key):
                raise ConfigError(
                    f"Teacher p={patch_size} was trained with {key}={stored}, run config has {getattr(self.config, key)}"
                )
        return checkpoint.net

    def _index(self) -> DatasetIndex:
        return self.datasets.load_dataset(self.config.category_root)

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    def train_teacher(self, progress_callback: Optional[Callable[[int, int, Dict[str, float]], None]] = None) -> List[Path]:
        """Pretrain and save one teacher per configured scale."""
        start = self._start_stage("train-teacher")
        cfg = self.config
        corpus = self.datasets.load_corpus(cfg.corpus_root) if cfg.corpus_root else []
        paths = []
        for p in cfg.scales:
            targets = None
            if cfg.teacher_lambda_k > 0:
                if not cfg.distill_targets:
                    raise ConfigError("teacher_lambda_k > 0 requires distill_targets")
                targets = formats.load_distill_targets(cfg.distill_targets.replace(SCALE_PLACEHOLDER, str(p)))
            callback = (lambda it, parts, p=p: progress_callback(p, it, parts)) if progress_callback else None
            checkpoint = self.teacher_service.train_teacher(corpus, p, targets=targets, progress_callback=callback)
            paths.append(self.runs.save_teacher(checkpoint))
        logger.info(f"train-teacher finished in {time.perf_counter() - start:.1f}s")
        return paths

    def train_students(self, progress_callback: Optional[Callable[[int, int, float], None]] = None) -> Dict[int, ScaleArtifacts]:
        """Feature stats, student ensemble and calibration for every scale."""
        start = self._start_stage("train-students", ARCHITECTURE_KEYS)
        index = self._index()
        train_images = self.datasets.load_images(index.train)
        validation_images = self.datasets.load_images(index.validation)
        artifacts = {}
        for p in self.config.scales:
            teacher = self._load_teacher(p)
            stats = self.student_service.compute_feature_stats(densify(teacher), train_images)
            ensemble = self.student_service.train_students(teacher, stats, train_images, progress_callback=progress_callback)
            self.runs.save_ensemble(ensemble)
            self.runs.save_stats(p, stats)
            scale = ScaleArtifacts(teacher=teacher, ensemble=ensemble, stats=stats)
            scale.calibration = self.scoring_service.calibrate_scale(scale, validation_images)
            self.runs.save_calibration(scale.calibration)
            artifacts[p] = scale
        logger.info(f"train-students finished in {time.perf_counter() - start:.1f}s")
        return artifacts

    def calibrate(self) -> Dict[int, ScaleArtifacts]:
        """Recompute the validation calibration of every scale from saved artifacts."""
        self._start_stage("calibrate", ARCHITECTURE_KEYS + DATA_KEYS)
        validation_images = self.datasets.load_images(self._index().validation)
        artifacts = {}
        for p in self.config.scales:
            scale = self._load_scale(p, with_calibration=False)
            scale.calibration = self.scoring_service.calibrate_scale(scale, validation_images)
            self.runs.save_calibration(scale.calibration)
            artifacts[p] = scale
        return artifacts

    def _load_scale(self, p: int, with_calibration: bool = True) -> ScaleArtifacts:
        return ScaleArtifacts(
            teacher=self._load_teacher(p),
            ensemble=self.runs.load_ensemble(p),
            stats=self.runs.load_stats(p),
            calibration=self.runs.load_calibration(p) if with_calibration else None,
        )

    def score(self, write_png: bool = True) -> List[AnomalyMap]:
        """Write the fused (and, with several scales, per-scale) anomaly map of every test image."""
        start = self._start_stage("score", ARCHITECTURE_KEYS + DATA_KEYS)
        index = self._index()
        if not index.test:
            raise DataError(f"No test images under {index.root}")
        images, _, entries = self.datasets.load_test_set(index)
        artifacts = [self._load_scale(p) for p in self.config.scales]
        results = self.scoring_service.score_images(images, artifacts)
        multiscale = len(artifacts) > 1
        maps = []
        for image, entry, (amap, per_scale) in zip(images, entries, results):
            self.runs.save_anomaly_map(entry.label, entry.stem, amap, image if write_png else None)
            if multiscale:
                for p, scores in per_scale.items():
                    self.runs.save_anomaly_map(entry.label, entry.stem, AnomalyMap(scores, [p]), patch_size=p)
            maps.append(amap)
        self.runs.save_map_provenance(maps[0])
        logger.info(f"Scored {len(maps)} test images in {time.perf_counter() - start:.1f}s")
        return maps

    def evaluate(self) -> Tuple[EvaluationSummary, Dict[str, pd.DataFrame]]:
        """PRO/ROC evaluation of the saved maps; writes metric tables and summary.json."""
        self._start_stage("evaluate", ARCHITECTURE_KEYS + DATA_KEYS)
        index = self._index()
        _, masks, entries = self.datasets.load_test_set(index)
        fused = [self.runs.load_anomaly_map(e.label, e.stem) for e in entries]
        per_scale = None
        if len(self.config.scales) > 1:
            per_scale = {
                p: [self.runs.load_anomaly_map(e.label, e.stem, patch_size=p) for e in entries]
                for p in self.config.scales
            }
        summary, tables = self.evaluation_service.evaluate(
            fused,
            masks,
            [e.label for e in entries],
            [e.stem for e in entries],
            per_scale_maps=per_scale,
            category=index.category,
        )
        for name, table in tables.items():
            self.runs.save_table(name, table)
        self.runs.save_summary(summary)
        return summary, tables

    def run_oneclass(self, progress_callback: Optional[Callable[[str, float], None]] = None) -> Tuple[pd.DataFrame, float]:
        """Per-class ROC-AUC with the teacher of the first configured scale."""
        self._start_stage("one-class", ARCHITECTURE_KEYS)
        p = self.config.scales[0]
        teacher = self._load_teacher(p)
        layout = self.datasets.load_oneclass(self.config.oneclass_root)
        table, mean_auc = self.oneclass_service.run_oneclass(teacher, layout, progress_callback)
        summary = pd.concat(
            [table, pd.DataFrame([{"class": "mean", "roc_auc": mean_auc, "num_train": np.nan, "num_test": np.nan}])],
            ignore_index=True,
        )
        self.runs.save_table("oneclass.tsv", summary)
        return table, mean_auc

    def run_all(self) -> EvaluationSummary:
        """Every stage in order: teacher, students (with calibration), scoring, evaluation."""
        self.train_teacher()
        self.train_students()
        self.score()
        return self.evaluate()[0]
