"""Validated run configuration shared by every CLI stage."""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core.exceptions import ConfigError

SUPPORTED_SCALES = (17, 33, 65)
SCORE_MODES = ("combined", "regression", "variance")
# Fields holding filesystem locations
PATH_FIELDS = ("run_dir", "category_root", "corpus_root", "distill_targets", "oneclass_root")


class RunConfig(BaseModel):
    """
    Every hyperparameter of every stage.

    Field names double as CLI flags (``teacher_lr`` → ``--teacher-lr``). Defaults
    follow the MVTec recipe: p=65, d=128, M=3, λk=λc=1, λm=0, images zoomed to 256.
    """

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # Paths
    run_dir: str = Field("runs/default", description="Run directory holding every artifact")
    category_root: Optional[str] = Field(None, description="MVTec-style category directory")
    corpus_root: Optional[str] = Field(None, description="Image tree for teacher pretraining")
    distill_targets: Optional[str] = Field(None, description="Distillation target file (required when teacher_lambda_k > 0)")
    oneclass_root: Optional[str] = Field(None, description="Dataset with train/<class>/ and test/<class>/ folders")

    # Architecture
    scales: List[int] = Field(default_factory=lambda: [65], description="Receptive fields, subset of 17/33/65")
    descriptor_dim: int = Field(128, ge=1)
    channel_scale: float = Field(1.0, gt=0, description="Multiplier on hidden conv widths")
    image_side: int = Field(256, ge=1, description="Side images and masks are zoomed to")
    num_students: int = Field(3, ge=1)

    # Teacher loss
    teacher_lambda_k: float = Field(1.0, ge=0, description="Knowledge distillation weight")
    teacher_lambda_m: float = Field(0.0, ge=0, description="Metric learning weight")
    teacher_lambda_c: float = Field(1.0, ge=0, description="Descriptor compactness weight")
    teacher_margin: float = Field(1.0, gt=0, description="Triplet margin delta")
    distill_target_dim: int = Field(512, ge=1)

    # Teacher optimization
    teacher_lr: float = Field(2e-4, gt=0)
    teacher_weight_decay: float = Field(1e-5, ge=0)
    teacher_batch_size: int = Field(64, ge=2)
    teacher_iterations: int = Field(50000, ge=1)

    # Augmentation
    noise_std: float = Field(0.1, ge=0)
    grayscale_prob: float = Field(0.1, ge=0, le=1)
    luminance_min: float = Field(0.8, gt=0)
    luminance_max: float = Field(1.2, gt=0)

    # Student optimization
    student_lr: float = Field(1e-4, gt=0)
    student_weight_decay: float = Field(1e-5, ge=0)
    student_epochs: int = Field(100, ge=1)

    # Shared Adam settings
    adam_beta1: float = Field(0.9, gt=0, lt=1)
    adam_beta2: float = Field(0.999, gt=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    decoupled_weight_decay: bool = False

    # Data, scoring and evaluation
    validation_fraction: float = Field(0.1, gt=0, lt=1)
    sigma_floor: float = Field(1e-8, gt=0)
    score_mode: Literal["combined", "regression", "variance"] = "combined"
    fpr_limit: float = Field(0.3, gt=0, le=1)
    max_thresholds: int = Field(10000, ge=2)
    oneclass_zoom_to_patch: bool = True
    oneclass_batch_size: int = Field(32, ge=1)

    # Runtime
    seed: int = 0
    num_workers: int = Field(1, ge=1)
    target_cache_mb: int = Field(2048, ge=0)
    log_every: int = Field(100, ge=1)

    @field_validator("scales")
    @classmethod
    def _check_scales(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one scale is required")
        unknown = [p for p in value if p not in SUPPORTED_SCALES]
        if unknown:
            raise ValueError(f"unsupported scales {unknown}; expected a subset of {list(SUPPORTED_SCALES)}")
        if len(set(value)) != len(value):
            raise ValueError(f"duplicate scales in {value}")
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        if self.teacher_lambda_k + self.teacher_lambda_m + self.teacher_lambda_c <= 0:
            raise ValueError("at least one teacher loss weight must be > 0")
        if self.luminance_min > self.luminance_max:
            raise ValueError("luminance_min must not exceed luminance_max")
        if self.image_side < max(self.scales):
            raise ValueError(f"image_side {self.image_side} is smaller than the largest scale {max(self.scales)}")
        return self

    @classmethod
    def from_file(cls, path: str, **overrides: Any) -> "RunConfig":
        """Load a JSON config and apply non-None overrides on top."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"Config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.build(**data)

    @classmethod
    def build(cls, **values: Any) -> "RunConfig":
        """Construct and translate validation failures into ``ConfigError``."""
        try:
            return cls(**values)
        except ValidationError as exc:
            raise ConfigError(f"Invalid run configuration: {exc}") from exc

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.build(**data)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump()

    def portable_dict(self) -> Dict[str, Any]:
        """Hyperparameters without the path fields."""
        return self.model_dump(exclude=set(PATH_FIELDS))

    def to_json(self) -> str:
        return json.dumps(self.model_dump(), indent=2, sort_keys=True)
