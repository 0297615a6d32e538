"""Repository for the artifacts of one run directory."""

import json
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from ..core.exceptions import ArtifactError, ArtifactFormatError
from ..models import (
    AnomalyMap,
    EvaluationSummary,
    FeatureStats,
    RunConfig,
    ScoreCalibration,
    StudentEnsemble,
    TeacherCheckpoint,
)
from ..nets.decoder import build_decoder
from ..nets.patch_net import PatchNet, build_from_architecture
from ..utils.image_io import write_overlay_png
from ..utils.logging import get_logger
from . import formats

logger = get_logger("run_repository")

CONFIG_FILE = "config.json"
METRICS_DIR = "metrics"


def _load_net(architecture: Dict[str, Any], blobs: Dict[str, np.ndarray], prefix: str) -> PatchNet:
    net = build_from_architecture(architecture)
    try:
        net.params.load_state_dict(blobs, prefix=prefix)
    except KeyError as exc:
        raise ArtifactFormatError(f"Checkpoint is missing a parameter: {exc}") from exc
    return net


class RunRepository:
    """
    Reads and writes everything under ``run_dir``:

        config.json
        teacher_p{p}.ckpt
        scale_p{p}/ensemble.ckpt, stats.bin, calibration.bin
        maps/<label>/<stem>.amap, <stem>.png   (maps_p{p}/ per scale when several)
        metrics/*.tsv, summary.json
    """

    def __init__(self, run_dir: str):
        self.root = Path(run_dir)
        logger.info(f"Initialized RunRepository at {self.root}")

    # ------------------------------------------------------------------
    # Paths
    # ------------------------------------------------------------------

    def teacher_path(self, patch_size: int) -> Path:
        return self.root / f"teacher_p{patch_size}.ckpt"

    def scale_dir(self, patch_size: int) -> Path:
        return self.root / f"scale_p{patch_size}"

    def ensemble_path(self, patch_size: int) -> Path:
        return self.scale_dir(patch_size) / "ensemble.ckpt"

    def stats_path(self, patch_size: int) -> Path:
        return self.scale_dir(patch_size) / "stats.bin"

    def calibration_path(self, patch_size: int) -> Path:
        return self.scale_dir(patch_size) / "calibration.bin"

    def map_path(self, label: str, stem: str, patch_size: Optional[int] = None) -> Path:
        folder = "maps" if patch_size is None else f"maps_p{patch_size}"
        return self.root / folder / label / f"{stem}.amap"

    def metrics_path(self, name: str) -> Path:
        return self.root / METRICS_DIR / name

    # ------------------------------------------------------------------
    # Config echo
    # ------------------------------------------------------------------

    def save_config(self, config: RunConfig) -> Path:
        path = self.root / CONFIG_FILE
        formats.atomic_write(path, (config.to_json() + "\n").encode("utf-8"))
        return path

    def load_config(self) -> RunConfig:
        path = self.root / CONFIG_FILE
        if not path.exists():
            raise ArtifactError(f"Missing artifact: {path}")
        return RunConfig.from_file(str(path))

    # ------------------------------------------------------------------
    # Teacher
    # ------------------------------------------------------------------

    def save_teacher(self, checkpoint: TeacherCheckpoint) -> Path:
        blobs: "OrderedDict[str, np.ndarray]" = OrderedDict(
            (f"net/{name}", t.data) for name, t in checkpoint.net.params.items()
        )
        decoder = None
        if checkpoint.decoder is not None:
            decoder = {"descriptor_dim": checkpoint.decoder.descriptor_dim, "target_dim": checkpoint.decoder.target_dim}
            blobs.update((f"decoder/{name}", t.data) for name, t in checkpoint.decoder.params.items())
        metadata = {
            "kind": "teacher",
            "architecture": checkpoint.net.architecture(),
            "decoder": decoder,
            "config": checkpoint.config,
            "seed": checkpoint.seed,
            "iteration": checkpoint.iteration,
            "loss_trace": checkpoint.loss_trace,
        }
        path = self.teacher_path(checkpoint.patch_size)
        formats.write_checkpoint(path, metadata, blobs)
        logger.info(f"Saved teacher checkpoint {path}")
        return path

    def load_teacher(self, patch_size: int) -> TeacherCheckpoint:
        metadata, blobs = formats.read_checkpoint(self.teacher_path(patch_size))
        if metadata.get("kind") != "teacher":
            raise ArtifactFormatError(f"{self.teacher_path(patch_size)} is not a teacher checkpoint")
        net = _load_net(metadata["architecture"], blobs, "net/")
        decoder = None
        if metadata.get("decoder"):
            spec = metadata["decoder"]
            decoder = build_decoder(spec["descriptor_dim"], spec["target_dim"])
            try:
                decoder.params.load_state_dict(blobs, prefix="decoder/")
            except KeyError as exc:
                raise ArtifactFormatError(f"Checkpoint is missing a parameter: {exc}") from exc
        return TeacherCheckpoint(
            net=net,
            decoder=decoder,
            config=metadata.get("config", {}),
            loss_trace=metadata.get("loss_trace", []),
            seed=metadata.get("seed", 0),
            iteration=metadata.get("iteration", 0),
        )

    # ------------------------------------------------------------------
    # Students, statistics, calibration
    # ------------------------------------------------------------------

    def save_ensemble(self, ensemble: StudentEnsemble) -> Path:
        blobs: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for i, student in enumerate(ensemble.students):
            blobs.update((f"student{i}/{name}", t.data) for name, t in student.params.items())
        metadata = {
            "kind": "ensemble",
            "architecture": ensemble.students[0].architecture(),
            "num_students": len(ensemble),
            "seeds": list(ensemble.seeds),
            "covariance": ensemble.covariance,
            "epochs_trained": ensemble.epochs_trained,
            "loss_history": ensemble.loss_history,
        }
        path = self.ensemble_path(ensemble.patch_size)
        formats.write_checkpoint(path, metadata, blobs)
        logger.info(f"Saved {len(ensemble)} students to {path}")
        return path

    def load_ensemble(self, patch_size: int) -> StudentEnsemble:
        metadata, blobs = formats.read_checkpoint(self.ensemble_path(patch_size))
        if metadata.get("kind") != "ensemble":
            raise ArtifactFormatError(f"{self.ensemble_path(patch_size)} is not an ensemble checkpoint")
        students = [
            _load_net(metadata["architecture"], blobs, f"student{i}/") for i in range(metadata["num_students"])
        ]
        return StudentEnsemble(
            students=students,
            seeds=metadata.get("seeds", []),
            covariance=metadata.get("covariance", 1.0),
            epochs_trained=metadata.get("epochs_trained", 0),
            loss_history=metadata.get("loss_history", []),
        )

    def save_stats(self, patch_size: int, stats: FeatureStats) -> Path:
        path = self.stats_path(patch_size)
        formats.write_feature_stats(path, stats)
        return path

    def load_stats(self, patch_size: int) -> FeatureStats:
        return formats.read_feature_stats(self.stats_path(patch_size))

    def save_calibration(self, calibration: ScoreCalibration) -> Path:
        path = self.calibration_path(calibration.patch_size)
        formats.write_calibration(path, calibration)
        return path

    def load_calibration(self, patch_size: int) -> ScoreCalibration:
        return formats.read_calibration(self.calibration_path(patch_size))

    # ------------------------------------------------------------------
    # Anomaly maps
    # ------------------------------------------------------------------

    def save_anomaly_map(
        self,
        label: str,
        stem: str,
        amap: AnomalyMap,
        image: Optional[np.ndarray] = None,
        patch_size: Optional[int] = None,
    ) -> Path:
        """Raw float map plus, when ``image`` is given, the PNG overlay next to it."""
        path = self.map_path(label, stem, patch_size)
        formats.write_anomaly_map(path, amap)
        if image is not None:
            write_overlay_png(image, amap.scores, path.with_suffix(".png"))
        return path

    def save_map_provenance(self, amap: AnomalyMap) -> Path:
        """Scales, calibration ids and score mode shared by the fused maps."""
        path = self.root / "maps" / "provenance.json"
        formats.atomic_write(path, (json.dumps(amap.provenance(), indent=2) + "\n").encode("utf-8"))
        return path

    def load_anomaly_map(self, label: str, stem: str, patch_size: Optional[int] = None) -> np.ndarray:
        return formats.read_anomaly_map(self.map_path(label, stem, patch_size))

    # ------------------------------------------------------------------
    # Metrics
    # ------------------------------------------------------------------

    def save_table(self, name: str, table: pd.DataFrame) -> Path:
        path = self.metrics_path(name)
        formats.atomic_write(path, table.to_csv(sep="\t", index=False, float_format="%.9g").encode("utf-8"))
        return path

    def load_table(self, name: str) -> pd.DataFrame:
        path = self.metrics_path(name)
        if not path.exists():
            raise ArtifactError(f"Missing artifact: {path}")
        return pd.read_csv(path, sep="\t")

    def save_summary(self, summary: EvaluationSummary) -> Path:
        path = self.metrics_path("summary.json")
        formats.atomic_write(path, (json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8"))
        logger.info(f"Saved evaluation summary {path}")
        return path

    def load_summary(self) -> EvaluationSummary:
        path = self.metrics_path("summary.json")
        if not path.exists():
            raise ArtifactError(f"Missing artifact: {path}")
        return EvaluationSummary.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def existing_scales(self) -> List[int]:
        return sorted(int(p.stem.split("_p")[-1]) for p in self.root.glob("teacher_p*.ckpt"))
