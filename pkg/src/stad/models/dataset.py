"""Dataset index models."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from ..core.exceptions import DataError

GOOD_LABEL = "good"


@dataclass
class DatasetEntry:
    """One image on disk with its label and optional ground-truth mask."""
    image_path: str
    label: str = GOOD_LABEL
    mask_path: Optional[str] = None

    @property
    def is_anomalous(self) -> bool:
        return self.label != GOOD_LABEL

    @property
    def stem(self) -> str:
        name = self.image_path.replace("\\", "/").rsplit("/", 1)[-1]
        return name.rsplit(".", 1)[0]

    def to_dict(self) -> Dict[str, Any]:
        return {"image_path": self.image_path, "label": self.label, "mask_path": self.mask_path}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetEntry":
        return cls(image_path=data["image_path"], label=data.get("label", GOOD_LABEL), mask_path=data.get("mask_path"))


@dataclass
class DatasetIndex:
    """Train / validation / test split of one MVTec-style category."""
    root: str
    train: List[DatasetEntry]
    validation: List[DatasetEntry]
    test: List[DatasetEntry] = field(default_factory=list)

    def __post_init__(self):
        overlap = {e.image_path for e in self.train} & {e.image_path for e in self.validation}
        if overlap:
            raise DataError(f"Train and validation splits share {len(overlap)} images")
        missing = [e.image_path for e in self.test if e.is_anomalous and not e.mask_path]
        if missing:
            raise DataError(f"Defective test images without masks: {missing[:3]}")

    @property
    def category(self) -> str:
        return self.root.replace("\\", "/").rstrip("/").rsplit("/", 1)[-1]

    @property
    def test_labels(self) -> List[str]:
        return sorted({e.label for e in self.test})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "root": self.root,
            "train": [e.to_dict() for e in self.train],
            "validation": [e.to_dict() for e in self.validation],
            "test": [e.to_dict() for e in self.test],
        }
