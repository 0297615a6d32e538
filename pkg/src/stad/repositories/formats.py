"""
Versioned binary artifact formats.

Every file starts with an 8-byte magic and a little-endian uint16 version. Floats are
little-endian float32 unless noted; writes go through a temp file and ``os.replace``.

    checkpoint   STADCKPT | u32 json_len | json metadata | u32 n_blobs |
                 n × (u16 name_len | name | u8 ndim | ndim × u32 dims | f32 data)
    stats        STADSTAT | u32 d | u64 count | f64 epsilon | f32 mu[d] | f32 sigma[d]
    calibration  STADCALB | u32 p | u64 num_pixels | f64 e_mu e_sigma v_mu v_sigma epsilon
    anomaly map  STADAMAP | u32 h | u32 w | f32 scores[h·w]
    distillation STADDIST | u32 count | u32 p | u32 channels | u32 target_dim |
                 count × (f32 patch[channels·p·p] | f32 target[target_dim])
"""

import json
import os
import struct
import tempfile
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from ..core.exceptions import ArtifactError, ArtifactFormatError
from ..models import AnomalyMap, DistillTargetSet, FeatureStats, ScoreCalibration

FORMAT_VERSION = 1
MAGIC_CHECKPOINT = b"STADCKPT"
MAGIC_STATS = b"STADSTAT"
MAGIC_CALIBRATION = b"STADCALB"
MAGIC_ANOMALY_MAP = b"STADAMAP"
MAGIC_DISTILL = b"STADDIST"

FLOAT32_LE = np.dtype("<f4")
PathLike = Union[str, Path]


def atomic_write(path: PathLike, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(magic: bytes) -> bytes:
    return magic + struct.pack("<H", FORMAT_VERSION)


class _Reader:
    """Bounds-checked cursor over a file's bytes."""

    def __init__(self, data: bytes, path: PathLike):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise ArtifactFormatError(f"{self.path}: truncated payload")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str) -> Tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype=FLOAT32_LE).astype(np.float32)

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise ArtifactFormatError(f"{self.path}: {len(self.data) - self.pos} trailing bytes")


def _open(path: PathLike, magic: bytes) -> _Reader:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"Missing artifact: {path}")
    reader = _Reader(path.read_bytes(), path)
    found = reader.take(len(magic)) if len(reader.data) >= len(magic) else reader.data
    if found != magic:
        raise ArtifactFormatError(f"{path}: bad magic {found!r}, expected {magic!r}")
    (version,) = reader.unpack("<H")
    if version != FORMAT_VERSION:
        raise ArtifactFormatError(f"{path}: unsupported format version {version}")
    return reader


def _f32_bytes(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype=FLOAT32_LE).tobytes()


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def write_checkpoint(path: PathLike, metadata: Dict[str, Any], blobs: "OrderedDict[str, np.ndarray]") -> None:
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    parts = [_header(MAGIC_CHECKPOINT), struct.pack("<I", len(meta)), meta, struct.pack("<I", len(blobs))]
    for name, array in blobs.items():
        encoded = name.encode("utf-8")
        array = np.asarray(array, dtype=np.float32)
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack("<B", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape))
        parts.append(_f32_bytes(array))
    atomic_write(path, b"".join(parts))


def read_checkpoint(path: PathLike) -> Tuple[Dict[str, Any], "OrderedDict[str, np.ndarray]"]:
    reader = _open(path, MAGIC_CHECKPOINT)
    (meta_len,) = reader.unpack("<I")
    try:
        metadata = json.loads(reader.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactFormatError(f"{path}: corrupt metadata") from exc
    (count,) = reader.unpack("<I")
    blobs: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        blobs[name] = reader.floats(int(np.prod(shape, dtype=np.int64))).reshape(shape)
    reader.finish()
    return metadata, blobs


# ---------------------------------------------------------------------------
# Feature statistics and calibration
# ---------------------------------------------------------------------------

def write_feature_stats(path: PathLike, stats: FeatureStats) -> None:
    payload = (
        _header(MAGIC_STATS)
        + struct.pack("<IQd", stats.dim, stats.count, stats.epsilon)
        + _f32_bytes(stats.mu)
        + _f32_bytes(stats.sigma)
    )
    atomic_write(path, payload)


def read_feature_stats(path: PathLike) -> FeatureStats:
    reader = _open(path, MAGIC_STATS)
    dim, count, epsilon = reader.unpack("<IQd")
    mu, sigma = reader.floats(dim), reader.floats(dim)
    reader.finish()
    return FeatureStats(mu=mu, sigma=sigma, epsilon=epsilon, count=count)


def write_calibration(path: PathLike, calibration: ScoreCalibration) -> None:
    c = calibration
    payload = _header(MAGIC_CALIBRATION) + struct.pack(
        "<IQ5d", c.patch_size, c.num_pixels, c.e_mu, c.e_sigma, c.v_mu, c.v_sigma, c.epsilon
    )
    atomic_write(path, payload)


def read_calibration(path: PathLike) -> ScoreCalibration:
    reader = _open(path, MAGIC_CALIBRATION)
    patch_size, num_pixels, e_mu, e_sigma, v_mu, v_sigma, epsilon = reader.unpack("<IQ5d")
    reader.finish()
    return ScoreCalibration(
        e_mu=e_mu, e_sigma=e_sigma, v_mu=v_mu, v_sigma=v_sigma,
        epsilon=epsilon, patch_size=patch_size, num_pixels=num_pixels,
    )


# ---------------------------------------------------------------------------
# Anomaly maps
# ---------------------------------------------------------------------------

def write_anomaly_map(path: PathLike, amap: Union[AnomalyMap, np.ndarray]) -> None:
    scores = amap.scores if isinstance(amap, AnomalyMap) else np.asarray(amap, dtype=np.float32)
    h, w = scores.shape
    atomic_write(path, _header(MAGIC_ANOMALY_MAP) + struct.pack("<II", h, w) + _f32_bytes(scores))


def read_anomaly_map(path: PathLike) -> np.ndarray:
    reader = _open(path, MAGIC_ANOMALY_MAP)
    h, w = reader.unpack("<II")
    scores = reader.floats(h * w).reshape(h, w)
    reader.finish()
    return scores


# ---------------------------------------------------------------------------
# Distillation targets
# ---------------------------------------------------------------------------

def write_distill_targets(path: PathLike, targets: DistillTargetSet) -> None:
    count, channels, p, _ = targets.patches.shape
    records = np.concatenate(
        [targets.patches.reshape(count, -1), targets.targets.reshape(count, -1)], axis=1
    )
    payload = _header(MAGIC_DISTILL) + struct.pack("<4I", count, p, channels, targets.target_dim) + _f32_bytes(records)
    atomic_write(path, payload)


def load_distill_targets(path: PathLike) -> DistillTargetSet:
    reader = _open(path, MAGIC_DISTILL)
    count, p, channels, target_dim = reader.unpack("<4I")
    patch_len = channels * p * p
    records = reader.floats(count * (patch_len + target_dim)).reshape(count, patch_len + target_dim)
    reader.finish()
    return DistillTargetSet(
        patches=records[:, :patch_len].reshape(count, channels, p, p),
        targets=records[:, patch_len:],
    )
