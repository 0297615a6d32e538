"""
Per-region-overlap (PRO) and ROC metrics.

PRO at threshold t averages, over every ground-truth connected component of the
dataset, the fraction of the component predicted anomalous (score ≥ t). The false
positive rate is pooled over all negative pixels of all images, anomaly-free test
images included.
"""

from typing import List, Sequence, Tuple

import numpy as np
from skimage.measure import label, regionprops
from sklearn.metrics import auc, roc_auc_score

from ..core.exceptions import ConfigError, DataError, ShapeError
from ..models.evaluation import PROCurvePoint, Region

NORMAL_LABELS = {"good", "normal", "0", "false"}


def connected_components(mask: np.ndarray, image_index: int = 0) -> List[Region]:
    """8-connected components of the true pixels of ``mask``."""
    labeled = label(np.asarray(mask, dtype=bool), connectivity=2)
    return [
        Region(image_index=image_index, label=int(region.label), area=int(region.area), bbox=tuple(region.bbox))
        for region in regionprops(labeled)
    ]


def _check_pairs(score_maps: Sequence[np.ndarray], gt_masks: Sequence[np.ndarray]) -> None:
    if len(score_maps) != len(gt_masks):
        raise ShapeError(f"{len(score_maps)} score maps for {len(gt_masks)} masks")
    for i, (scores, mask) in enumerate(zip(score_maps, gt_masks)):
        if np.shape(scores) != np.shape(mask):
            raise ShapeError(f"Image {i}: score map {np.shape(scores)} does not match mask {np.shape(mask)}")


def _labeled_masks(gt_masks: Sequence[np.ndarray]) -> Tuple[List[np.ndarray], int]:
    labeled = [label(np.asarray(m, dtype=bool), connectivity=2) for m in gt_masks]
    total = sum(int(lab.max()) for lab in labeled)
    if total == 0:
        raise DataError("No ground-truth anomaly region in the dataset")
    return labeled, total


def pro_at_threshold(score_maps: Sequence[np.ndarray], gt_masks: Sequence[np.ndarray], t: float) -> Tuple[float, float]:
    """(mean per-region overlap, pooled FPR) of the prediction score ≥ t."""
    _check_pairs(score_maps, gt_masks)
    labeled, _ = _labeled_masks(gt_masks)
    overlaps = []
    false_positives = negatives = 0
    for scores, lab in zip(score_maps, labeled):
        predicted = np.asarray(scores) >= t
        for region_id in range(1, int(lab.max()) + 1):
            region = lab == region_id
            overlaps.append(np.count_nonzero(predicted & region) / np.count_nonzero(region))
        background = lab == 0
        false_positives += np.count_nonzero(predicted & background)
        negatives += np.count_nonzero(background)
    if negatives == 0:
        raise DataError("No negative pixels; the false positive rate is undefined")
    return float(np.mean(overlaps)), false_positives / negatives


def pro_curve(
    score_maps: Sequence[np.ndarray],
    gt_masks: Sequence[np.ndarray],
    fpr_limit: float = 1.0,
    max_thresholds: int = 10000,
) -> List[PROCurvePoint]:
    """
    PRO/FPR pairs from the highest threshold down, stopping at the first FPR ≥ ``fpr_limit``.

    Every distinct score is a threshold unless there are more than ``max_thresholds``
    of them, in which case evenly spaced score quantiles are used.
    """
    _check_pairs(score_maps, gt_masks)
    labeled, num_regions = _labeled_masks(gt_masks)

    scores = np.concatenate([np.asarray(s, dtype=np.float64).ravel() for s in score_maps])
    weights_pro = np.zeros_like(scores)
    negative = np.concatenate([(lab == 0).ravel() for lab in labeled])
    num_negatives = int(negative.sum())
    if num_negatives == 0:
        raise DataError("No negative pixels; the false positive rate is undefined")

    # Each region pixel carries 1/(K·|region|) so cumulative sums give mean PRO directly
    offset = 0
    for lab in labeled:
        flat = lab.ravel()
        areas = np.bincount(flat)
        inside = flat > 0
        weights_pro[offset:offset + flat.size][inside] = 1.0 / (num_regions * areas[flat[inside]])
        offset += flat.size

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    cum_pro = np.cumsum(weights_pro[order])
    cum_fp = np.cumsum(negative[order].astype(np.int64))

    thresholds = np.unique(sorted_scores)[::-1]
    if thresholds.size > max_thresholds:
        thresholds = np.unique(np.quantile(scores, np.linspace(0.0, 1.0, max_thresholds)))[::-1]
    # Pixels with score ≥ t form a prefix of the descending order
    counts = np.searchsorted(-sorted_scores, -thresholds, side="right")

    curve = []
    for t, n in zip(thresholds, counts):
        fpr = cum_fp[n - 1] / num_negatives if n else 0.0
        mean_pro = min(cum_pro[n - 1], 1.0) if n else 0.0
        curve.append(PROCurvePoint(threshold=float(t), fpr=float(fpr), mean_pro=float(mean_pro)))
        if fpr >= fpr_limit:
            break
    return curve


def pro_auc(
    score_maps: Sequence[np.ndarray],
    gt_masks: Sequence[np.ndarray],
    fpr_limit: float = 0.3,
    max_thresholds: int = 10000,
) -> float:
    """Area under the PRO curve for FPR in [0, fpr_limit], normalized to at most 1."""
    if not 0 < fpr_limit <= 1:
        raise ConfigError(f"fpr_limit must be in (0, 1], got {fpr_limit}")
    curve = pro_curve(score_maps, gt_masks, fpr_limit, max_thresholds)
    return pro_auc_from_curve(curve, fpr_limit)


def pro_auc_from_curve(curve: Sequence[PROCurvePoint], fpr_limit: float) -> float:
    fprs = np.array([0.0] + [pt.fpr for pt in curve])
    pros = np.array([0.0] + [pt.mean_pro for pt in curve])
    if fprs[-1] > fpr_limit:
        # Interpolate the crossing segment so the curve ends exactly at fpr_limit
        i = int(np.argmax(fprs > fpr_limit))
        x0, x1, y0, y1 = fprs[i - 1], fprs[i], pros[i - 1], pros[i]
        y_limit = y0 + (y1 - y0) * (fpr_limit - x0) / (x1 - x0)
        fprs = np.append(fprs[:i], fpr_limit)
        pros = np.append(pros[:i], y_limit)
    if fprs.size < 2:
        return 0.0
    return float(np.clip(auc(fprs, pros) / fpr_limit, 0.0, 1.0))


def _binary_labels(labels: Sequence) -> np.ndarray:
    out = []
    for value in labels:
        if isinstance(value, (bool, np.bool_, int, np.integer)):
            out.append(int(bool(value)))
        else:
            out.append(int(str(value).lower() not in NORMAL_LABELS))
    return np.asarray(out, dtype=np.int64)


def roc_auc(scores: Sequence[float], labels: Sequence) -> float:
    """
    ROC-AUC with anomalous as the positive class; ties count one half.

    Labels may be booleans, 0/1, or names where "good"/"normal" mark the negative class.
    """
    y = _binary_labels(labels)
    if len(y) != len(scores):
        raise ShapeError(f"{len(scores)} scores for {len(y)} labels")
    if np.unique(y).size < 2:
        raise DataError("ROC-AUC needs both normal and anomalous samples")
    return float(roc_auc_score(y, np.asarray(scores, dtype=np.float64)))
