"""Service for the image-level one-class protocol (one class normal, all others anomalous)."""

from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..evaluation.metrics import roc_auc
from ..models import RunConfig, ScaleArtifacts
from ..nets.dense import densify
from ..nets.patch_net import PatchNet
from ..repositories.dataset_repository import read_image, resize_image, split_validation
from ..utils.logging import get_logger
from .scoring_service import ScoringService
from .student_service import StudentService

logger = get_logger("oneclass_service")


class OneClassService:
    """Trains one ensemble per class and reports per-class ROC-AUC."""

    def __init__(self, config: RunConfig, student_service: StudentService, scoring_service: ScoringService):
        self.config = config
        self.student_service = student_service
        self.scoring_service = scoring_service
        logger.info("Initialized OneClassService")

    def _load(self, paths: Sequence[Path], side: int) -> List[np.ndarray]:
        return [resize_image(read_image(p), side) for p in paths]

    def fit_class(self, teacher: PatchNet, train_images: Sequence[np.ndarray]) -> ScaleArtifacts:
        """Stats, students and calibration for one normal class."""
        cfg = self.config
        indices = [str(i) for i in range(len(train_images))]
        train_idx, val_idx = split_validation(indices, cfg.validation_fraction, cfg.seed)
        train = [train_images[int(i)] for i in train_idx]
        validation = [train_images[int(i)] for i in val_idx]

        if cfg.oneclass_zoom_to_patch:
            patches = np.stack(train)
            stats = self.student_service.compute_patch_stats(teacher, patches)
            ensemble = self.student_service.train_students_on_patches(teacher, stats, patches)
            artifacts = ScaleArtifacts(teacher=teacher, ensemble=ensemble, stats=stats)
            e_scores, v_scores = zip(*(self.scoring_service.raw_image_scores(artifacts, image) for image in validation))
            artifacts.calibration = self.scoring_service.calibrate(
                [np.asarray(e_scores)], [np.asarray(v_scores)], teacher.patch_size
            )
        else:
            stats = self.student_service.compute_feature_stats(densify(teacher), train)
            ensemble = self.student_service.train_students(teacher, stats, train)
            artifacts = ScaleArtifacts(teacher=teacher, ensemble=ensemble, stats=stats)
            artifacts.calibration = self.scoring_service.calibrate_scale(artifacts, validation)
        return artifacts

    def score(self, artifacts: ScaleArtifacts, image: np.ndarray) -> float:
        if self.config.oneclass_zoom_to_patch:
            return self.scoring_service.image_level_score([artifacts], image)
        return self.scoring_service.anomaly_map(image, [artifacts]).max_score

    def run_oneclass(
        self,
        teacher: PatchNet,
        layout: Dict[str, Tuple[List[Path], List[Path]]],
        progress_callback: Optional[Callable[[str, float], None]] = None,
    ) -> Tuple[pd.DataFrame, float]:
        """
        Evaluate every class of ``layout`` as the normal class in turn.

        Args:
            teacher: Pretrained teacher for the configured receptive field
            layout: Class name -> (train image paths, test image paths)
            progress_callback: Called with (class name, ROC-AUC) after each class

        Returns:
            Tuple of (per-class table with columns class/roc_auc/num_train/num_test, mean ROC-AUC)
        """
        side = teacher.patch_size if self.config.oneclass_zoom_to_patch else self.config.image_side
        test_images, test_classes = [], []
        for name, (_, test_paths) in layout.items():
            test_images.extend(self._load(test_paths, side))
            test_classes.extend([name] * len(test_paths))

        rows = []
        for name, (train_paths, _) in layout.items():
            logger.info(f"One-class run for normal class '{name}' ({len(train_paths)} training images)")
            artifacts = self.fit_class(teacher, self._load(train_paths, side))
            scores = [self.score(artifacts, image) for image in test_images]
            labels = [c != name for c in test_classes]
            auc = roc_auc(scores, labels)
            rows.append({"class": name, "roc_auc": auc, "num_train": len(train_paths), "num_test": len(test_images)})
            logger.info(f"Class '{name}': ROC-AUC = {auc:.4f}")
            if progress_callback:
                progress_callback(name, auc)

        table = pd.DataFrame(rows, columns=["class", "roc_auc", "num_train", "num_test"])
        mean_auc = float(table["roc_auc"].mean())
        logger.info(f"Mean one-class ROC-AUC over {len(table)} classes: {mean_auc:.4f}")
        return table, mean_auc
