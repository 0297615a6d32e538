"""Service for regression-error / predictive-variance scoring, calibration and multi-scale fusion."""

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import ConfigError, DataError, ShapeError
from ..models import AnomalyMap, RunConfig, ScaleArtifacts, ScoreCalibration, StudentEnsemble
from ..nets.dense import DenseNet, extract_dense
from ..nets.patch_net import forward_patch
from ..repositories.dataset_repository import resize_image
from ..utils.logging import get_logger

logger = get_logger("scoring_service")


def error_and_variance(predictions: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Regression error e and predictive variance v from member predictions.

    Args:
        predictions: (M, d, ...) student outputs
        target: (d, ...) normalized teacher descriptors

    Returns:
        (e, v), each shaped like ``target`` without its leading dim
    """
    if predictions.shape[1:] != target.shape:
        raise ShapeError(f"Predictions {predictions.shape} do not match target {target.shape}")
    predictions = predictions.astype(np.float64)
    mean = predictions.mean(axis=0)
    e = np.square(mean - target).sum(axis=0)
    # (1/M)Σ||μ_i||² − ||μ̄||² written as the mean squared deviation from μ̄
    v = np.square(predictions - mean).sum(axis=1).mean(axis=0)
    return e.astype(np.float32), v.astype(np.float32)


def combine_scores(e: np.ndarray, v: np.ndarray, calibration: ScoreCalibration, score_mode: str = "combined") -> np.ndarray:
    """Calibrated ẽ + ṽ, or one of the two alone."""
    if score_mode == "regression":
        return calibration.normalize_error(e)
    if score_mode == "variance":
        return calibration.normalize_variance(v)
    if score_mode == "combined":
        return calibration.normalize_error(e) + calibration.normalize_variance(v)
    raise ConfigError(f"Unknown score mode: {score_mode}")


class ScoringService:
    """Computes anomaly maps and image-level scores from per-scale artifacts."""

    def __init__(self, config: RunConfig):
        self.config = config
        logger.info("Initialized ScoringService")

    # ------------------------------------------------------------------
    # Raw scores
    # ------------------------------------------------------------------

    @staticmethod
    def predict(ensemble: StudentEnsemble, image: np.ndarray) -> np.ndarray:
        """Stacked student maps (M, d, h, w)."""
        return np.stack([extract_dense(dense, image) for dense in ensemble.dense_students])

    def raw_scores(self, artifacts: ScaleArtifacts, image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(e, v) maps of one image at one scale."""
        target = artifacts.stats.normalize(extract_dense(artifacts.dense_teacher, image))
        return error_and_variance(self.predict(artifacts.ensemble, image), target)

    def regression_error_map(self, ensemble: StudentEnsemble, teacher: DenseNet, stats, image: np.ndarray) -> AnomalyMap:
        ensemble.check_compatible(teacher.source)
        target = stats.normalize(extract_dense(teacher, image))
        e, _ = error_and_variance(self.predict(ensemble, image), target)
        return AnomalyMap(scores=e, scales=[ensemble.patch_size], score_mode="regression-raw")

    def variance_map(self, ensemble: StudentEnsemble, image: np.ndarray) -> AnomalyMap:
        predictions = self.predict(ensemble, image).astype(np.float64)
        v = np.square(predictions - predictions.mean(axis=0)).sum(axis=1).mean(axis=0)
        return AnomalyMap(scores=v.astype(np.float32), scales=[ensemble.patch_size], score_mode="variance-raw")

    # ------------------------------------------------------------------
    # Calibration
    # ------------------------------------------------------------------

    def calibrate(self, e_maps: Sequence[np.ndarray], v_maps: Sequence[np.ndarray], patch_size: int = 0) -> ScoreCalibration:
        """Mean and population std of e and v over every pixel of the validation maps."""
        if not len(e_maps) or not len(v_maps):
            raise DataError("Calibration needs at least one validation image")
        e_all = np.concatenate([np.asarray(m, dtype=np.float64).ravel() for m in e_maps])
        v_all = np.concatenate([np.asarray(m, dtype=np.float64).ravel() for m in v_maps])
        calibration = ScoreCalibration(
            e_mu=float(e_all.mean()),
            e_sigma=float(e_all.std()),
            v_mu=float(v_all.mean()),
            v_sigma=float(v_all.std()),
            epsilon=self.config.sigma_floor,
            patch_size=patch_size,
            num_pixels=int(e_all.size),
        )
        logger.info(
            f"Calibration p={patch_size}: e={calibration.e_mu:.5f}±{calibration.e_sigma:.5f}, "
            f"v={calibration.v_mu:.5f}±{calibration.v_sigma:.5f} over {e_all.size} pixels"
        )
        return calibration

    def calibrate_scale(self, artifacts: ScaleArtifacts, validation_images: Sequence[np.ndarray]) -> ScoreCalibration:
        if not len(validation_images):
            raise DataError("Calibration needs at least one validation image")
        e_maps, v_maps = [], []
        for image in validation_images:
            e, v = self.raw_scores(artifacts, image)
            e_maps.append(e)
            v_maps.append(v)
        return self.calibrate(e_maps, v_maps, artifacts.patch_size)

    # ------------------------------------------------------------------
    # Calibrated maps
    # ------------------------------------------------------------------

    def scale_map(self, artifacts: ScaleArtifacts, image: np.ndarray) -> np.ndarray:
        if artifacts.calibration is None:
            raise ConfigError(f"Scale p={artifacts.patch_size} has not been calibrated")
        e, v = self.raw_scores(artifacts, image)
        return combine_scores(e, v, artifacts.calibration, self.config.score_mode)

    def anomaly_map_with_scales(
        self, image: np.ndarray, artifacts: Sequence[ScaleArtifacts]
    ) -> Tuple[AnomalyMap, Dict[int, np.ndarray]]:
        """Fused map plus the calibrated map of every scale."""
        if not artifacts:
            raise ConfigError("Anomaly scoring needs at least one scale")
        per_scale = {a.patch_size: self.scale_map(a, image) for a in artifacts}
        fused = np.mean(np.stack(list(per_scale.values())), axis=0)
        amap = AnomalyMap(
            scores=fused,
            scales=[a.patch_size for a in artifacts],
            calibration_ids=[a.calibration.calibration_id for a in artifacts],
            score_mode=self.config.score_mode,
        )
        return amap, per_scale

    def anomaly_map(self, image: np.ndarray, artifacts: Sequence[ScaleArtifacts]) -> AnomalyMap:
        """Average of the calibrated per-scale maps; one scale gives that scale's map."""
        return self.anomaly_map_with_scales(image, artifacts)[0]

    def score_images(
        self,
        images: Sequence[np.ndarray],
        artifacts: Sequence[ScaleArtifacts],
        workers: Optional[int] = None,
    ) -> List[Tuple[AnomalyMap, Dict[int, np.ndarray]]]:
        """Score every image, in input order, across ``workers`` threads."""
        workers = workers or self.config.num_workers
        for a in artifacts:
            a.prepare()

        def _score(item: Tuple[int, np.ndarray]):
            index, image = item
            logger.debug(f"Scoring image {index + 1}/{len(images)}")
            return self.anomaly_map_with_scales(image, artifacts)

        if workers <= 1:
            return [_score(item) for item in enumerate(images)]
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="scoring") as executor:
            return list(executor.map(_score, enumerate(images)))

    # ------------------------------------------------------------------
    # Image-level scoring
    # ------------------------------------------------------------------

    def raw_image_scores(self, artifacts: ScaleArtifacts, image: np.ndarray) -> Tuple[float, float]:
        """(e, v) from the single descriptor of ``image`` zoomed to p×p."""
        p = artifacts.patch_size
        patch = image if image.shape[1:] == (p, p) else resize_image(image, p)
        target = (forward_patch(artifacts.teacher, patch).data - artifacts.stats.mu) / artifacts.stats.sigma
        predictions = np.stack([forward_patch(s, patch).data for s in artifacts.ensemble.students])
        e, v = error_and_variance(predictions, target.astype(np.float32))
        return float(e), float(v)

    def image_level_score(self, artifacts: Sequence[ScaleArtifacts], image: np.ndarray) -> float:
        """Calibrated ẽ + ṽ of the central descriptor, averaged over scales."""
        if not artifacts:
            raise ConfigError("Image-level scoring needs at least one scale")
        scores = []
        for a in artifacts:
            if a.calibration is None:
                raise ConfigError(f"Scale p={a.patch_size} has not been calibrated")
            e, v = self.raw_image_scores(a, image)
            scores.append(float(combine_scores(np.float64(e), np.float64(v), a.calibration, self.config.score_mode)))
        return float(np.mean(scores))
