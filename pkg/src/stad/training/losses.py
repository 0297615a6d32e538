"""
Teacher and student training losses, built from recorded ops so they back-propagate.

    knowledge    mean_n ||D(T(p_n)) - P(p_n)||²
    metric       mean_n max(0, margin + d⁺ - min(d(a, n), d(p, n)))
    compactness  Σ_{i≠j} corr_ij over the batch
    student      mean over pixels of ||S(x) - (T(x) - μ) / σ||²
"""

from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import DataError, ShapeError
from ..models.training import TeacherLossWeights, Triplet
from ..nets.decoder import DecoderSpec, decode
from ..nets.patch_net import PatchNet
from ..numerics import functional as F
from ..numerics.tensor import Tensor, as_tensor
from .augment import stack_triplets

# Dimensions whose batch variance is at or below this count as constant
ZERO_VARIANCE = 1e-12


def squared_distance(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise ||a - b||² for (N, d) operands."""
    return F.sum_(F.square(F.sub(a, b)), axis=-1)


def metric_loss_from_descriptors(anchor: Tensor, positive: Tensor, negative: Tensor, delta: float) -> Tensor:
    d_pos = squared_distance(anchor, positive)
    d_neg = F.minimum(squared_distance(anchor, negative), squared_distance(positive, negative))
    return F.mean(F.clamp_min(F.add(F.sub(d_pos, d_neg), delta), 0.0))


def loss_metric(net: PatchNet, triplets, delta: float = 1.0) -> Tensor:
    """Triplet margin loss with anchor swap, averaged over one triplet or a list of them."""
    if isinstance(triplets, Triplet):
        triplets = [triplets]
    n = len(triplets)
    descriptors = net.forward_batch(stack_triplets(triplets))
    return metric_loss_from_descriptors(
        F.slice_(descriptors, slice(0, n)),
        F.slice_(descriptors, slice(n, 2 * n)),
        F.slice_(descriptors, slice(2 * n, 3 * n)),
        delta,
    )


def loss_compactness(descriptors) -> Tensor:
    """Sum of off-diagonal entries of the batch correlation matrix of descriptor dims."""
    y = as_tensor(descriptors)
    if y.ndim != 2:
        raise ShapeError(f"Compactness expects a (b, d) batch, got {y.shape}")
    b, d = y.shape
    if b < 2:
        raise DataError(f"Compactness needs at least 2 descriptors, got {b}")

    centered = F.sub(y, F.mean(y, axis=0, keepdims=True))
    variance = F.mean(F.square(centered), axis=0)
    live = (variance.data > ZERO_VARIANCE).astype(np.float32)
    # Constant dims get unit std and a zeroed column, so their correlations are 0
    std = F.sqrt(F.add(F.mul(variance, live), 1.0 - live))
    normalized = F.div(F.mul(centered, live), std)
    corr = F.mul(F.matmul(F.transpose(normalized), normalized), 1.0 / b)
    off_diagonal = 1.0 - np.eye(d, dtype=np.float32)
    return F.sum_(F.mul(corr, off_diagonal))


def knowledge_loss_from_descriptors(dec: DecoderSpec, descriptors: Tensor, targets) -> Tensor:
    targets = as_tensor(targets)
    if targets.shape[-1] != dec.target_dim:
        raise ShapeError(f"Target dim {targets.shape[-1]} does not match decoder output {dec.target_dim}")
    return F.mean(squared_distance(decode(dec, descriptors), targets))


def loss_knowledge(net: PatchNet, dec: DecoderSpec, patches, targets) -> Tensor:
    """Mean squared L2 distance between decoded teacher descriptors and distillation targets."""
    patches = np.asarray(patches, dtype=np.float32)
    if patches.ndim == 3:
        patches = patches[None]
        targets = np.asarray(targets, dtype=np.float32)[None]
    return knowledge_loss_from_descriptors(dec, net.forward_batch(patches), targets)


def teacher_loss(
    net: PatchNet,
    weights: TeacherLossWeights,
    triplets: Optional[Sequence[Triplet]] = None,
    dec: Optional[DecoderSpec] = None,
    distill_patches: Optional[np.ndarray] = None,
    distill_targets: Optional[np.ndarray] = None,
) -> Tuple[Tensor, Dict[str, float]]:
    """
    λk·knowledge + λm·metric + λc·compactness over one batch.

    Terms with a zero weight are not evaluated. Compactness is computed over every
    descriptor of the batch: triplet anchors and distillation patches.
    """
    patches = []
    n_triplets = len(triplets) if triplets else 0
    if n_triplets:
        patches.append(stack_triplets(triplets))
    n_distill = 0 if distill_patches is None else len(distill_patches)
    if n_distill:
        patches.append(np.asarray(distill_patches, dtype=np.float32))
    if not patches:
        raise DataError("Teacher loss needs triplets or distillation patches")

    descriptors = net.forward_batch(np.concatenate(patches))
    offset = 3 * n_triplets
    parts: Dict[str, float] = {}
    total: Optional[Tensor] = None

    def _accumulate(term: Tensor, weight: float, name: str) -> None:
        nonlocal total
        parts[name] = term.item()
        weighted = F.mul(term, weight)
        total = weighted if total is None else F.add(total, weighted)

    if weights.lambda_k > 0:
        if dec is None or not n_distill:
            raise DataError("Knowledge distillation requires a decoder and distillation targets")
        distill_desc = F.slice_(descriptors, slice(offset, offset + n_distill))
        _accumulate(knowledge_loss_from_descriptors(dec, distill_desc, distill_targets), weights.lambda_k, "knowledge")

    if weights.lambda_m > 0:
        if not n_triplets:
            raise DataError("Metric learning requires triplets")
        _accumulate(
            metric_loss_from_descriptors(
                F.slice_(descriptors, slice(0, n_triplets)),
                F.slice_(descriptors, slice(n_triplets, 2 * n_triplets)),
                F.slice_(descriptors, slice(2 * n_triplets, 3 * n_triplets)),
                weights.margin,
            ),
            weights.lambda_m,
            "metric",
        )

    if weights.lambda_c > 0:
        rows = list(range(n_triplets)) + list(range(offset, offset + n_distill))
        _accumulate(loss_compactness(F.slice_(descriptors, np.array(rows))), weights.lambda_c, "compactness")

    parts["total"] = total.item()
    return total, parts


def student_loss(prediction: Tensor, target) -> Tensor:
    """Mean over pixels of the squared error to the normalized teacher map (d, h, w)."""
    target = as_tensor(target)
    if prediction.ndim == 4:
        prediction = F.reshape(prediction, prediction.shape[1:])
    if prediction.shape != target.shape:
        raise ShapeError(f"Student prediction {prediction.shape} does not match target {target.shape}")
    pixels = target.shape[1] * target.shape[2]
    return F.mul(F.sum_(F.square(F.sub(prediction, target))), 1.0 / pixels)
