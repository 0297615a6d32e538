"""Service for PRO/ROC evaluation of scored test sets."""

from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.exceptions import DataError
from ..evaluation.metrics import connected_components, pro_auc_from_curve, pro_curve, roc_auc
from ..models import EvaluationSummary, PROCurvePoint, RunConfig
from ..utils.logging import get_logger

logger = get_logger("evaluation_service")

MULTISCALE_ROW = "multiscale"


def curve_table(curve: Sequence[PROCurvePoint]) -> pd.DataFrame:
    return pd.DataFrame([pt.to_dict() for pt in curve], columns=["threshold", "fpr", "mean_pro"])


class EvaluationService:
    """Computes PRO curves, per-scale PRO-AUC rows and image-level ROC-AUC."""

    def __init__(self, config: RunConfig):
        self.config = config
        logger.info("Initialized EvaluationService")

    def region_pro_auc(self, score_maps: Sequence[np.ndarray], masks: Sequence[np.ndarray]) -> Tuple[float, List[PROCurvePoint]]:
        curve = pro_curve(score_maps, masks, self.config.fpr_limit, self.config.max_thresholds)
        return pro_auc_from_curve(curve, self.config.fpr_limit), curve

    def image_roc_auc(self, image_scores: Sequence[float], labels: Sequence[str]) -> Optional[float]:
        """ROC-AUC of per-image scores, or None when the test set has a single class."""
        try:
            return roc_auc(image_scores, labels)
        except DataError as exc:
            logger.warning(f"Skipping image-level ROC-AUC: {exc}")
            return None

    def evaluate(
        self,
        score_maps: Sequence[np.ndarray],
        masks: Sequence[np.ndarray],
        labels: Sequence[str],
        stems: Sequence[str],
        per_scale_maps: Optional[Mapping[int, Sequence[np.ndarray]]] = None,
        category: str = "",
    ) -> Tuple[EvaluationSummary, Dict[str, pd.DataFrame]]:
        """
        Evaluate fused anomaly maps against ground truth.

        Args:
            score_maps: Fused anomaly map per test image
            masks: Ground-truth mask per test image (all false for anomaly-free images)
            labels: Test label per image ("good" or a defect type)
            stems: File stem per image, used in the image score table
            per_scale_maps: Calibrated single-scale maps keyed by p, for the receptive-field ablation
            category: Dataset category name for the summary

        Returns:
            Tuple of (EvaluationSummary, tables keyed by file name)
        """
        if not len(score_maps):
            raise DataError("Nothing to evaluate: no scored test images")
        scales = sorted(per_scale_maps) if per_scale_maps else list(self.config.scales)

        fused_auc, curve = self.region_pro_auc(score_maps, masks)
        per_scale: Dict[str, float] = {}
        if per_scale_maps and len(per_scale_maps) > 1:
            for p in scales:
                per_scale[str(p)] = self.region_pro_auc(per_scale_maps[p], masks)[0]
            per_scale[MULTISCALE_ROW] = fused_auc
        else:
            per_scale[str(scales[0])] = fused_auc

        image_scores = [float(np.max(m)) for m in score_maps]
        image_auc = self.image_roc_auc(image_scores, labels)
        num_regions = sum(len(connected_components(m, i)) for i, m in enumerate(masks))

        summary = EvaluationSummary(
            category=category,
            scales=scales,
            fpr_limit=self.config.fpr_limit,
            pro_auc=fused_auc,
            roc_auc=image_auc,
            per_scale_pro_auc=per_scale,
            num_images=len(score_maps),
            num_regions=num_regions,
            score_mode=self.config.score_mode,
        )
        tables = {
            "pro_curve.tsv": curve_table(curve),
            "per_scale.tsv": pd.DataFrame(
                {"scale": list(per_scale.keys()), "pro_auc": list(per_scale.values())}
            ),
            "image_scores.tsv": pd.DataFrame({"label": list(labels), "stem": list(stems), "score": image_scores}),
        }
        roc_text = f"{image_auc:.4f}" if image_auc is not None else "n/a"
        logger.info(
            f"PRO-AUC@{self.config.fpr_limit} = {fused_auc:.4f}, image ROC-AUC = {roc_text} "
            f"over {len(score_maps)} images and {num_regions} regions"
        )
        return summary, tables
