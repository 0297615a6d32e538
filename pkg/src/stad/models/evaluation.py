"""Evaluation result models."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class Region:
    """One ground-truth connected component."""
    image_index: int
    label: int
    area: int
    bbox: tuple


@dataclass
class PROCurvePoint:
    """Mean per-region overlap and pooled FPR at one threshold."""
    threshold: float
    fpr: float
    mean_pro: float

    def to_dict(self) -> Dict[str, float]:
        return {"threshold": self.threshold, "fpr": self.fpr, "mean_pro": self.mean_pro}


@dataclass
class EvaluationSummary:
    """Headline metrics of one evaluated run."""
    category: str
    scales: List[int]
    fpr_limit: float
    pro_auc: float
    roc_auc: Optional[float] = None
    per_scale_pro_auc: Dict[str, float] = field(default_factory=dict)
    num_images: int = 0
    num_regions: int = 0
    score_mode: str = "combined"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "category": self.category,
            "scales": list(self.scales),
            "fpr_limit": self.fpr_limit,
            "pro_auc": self.pro_auc,
            "roc_auc": self.roc_auc,
            "per_scale_pro_auc": dict(self.per_scale_pro_auc),
            "num_images": self.num_images,
            "num_regions": self.num_regions,
            "score_mode": self.score_mode,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvaluationSummary":
        return cls(
            category=data.get("category", ""),
            scales=list(data.get("scales", [])),
            fpr_limit=float(data["fpr_limit"]),
            pro_auc=float(data["pro_auc"]),
            roc_auc=data.get("roc_auc"),
            per_scale_pro_auc=dict(data.get("per_scale_pro_auc", {})),
            num_images=int(data.get("num_images", 0)),
            num_regions=int(data.get("num_regions", 0)),
            score_mode=data.get("score_mode", "combined"),
        )
