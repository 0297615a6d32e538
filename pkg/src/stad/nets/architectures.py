"""
Layer stacks of the patch-sized teacher/student networks.

Receptive fields p ∈ {17, 33, 65}. Shape traces for a p×p×3 input:

    p=65: 65 → conv5 61 → pool 30 → conv5 26 → pool 13 → conv5 9 → pool 4 → conv4 1 → conv1 1
    p=33: 33 → conv3 31 → pool 15 → conv5 11 → pool 5 → conv2 4 → conv4 1
    p=17: 17 → conv6 12 → conv5 8 → conv5 4 → conv4 1

For p=65 the third conv emits 256 channels and the last layer is a 1×1 conv; for
p=17 the first kernel is 6×6 so that the stride-1 stack ends at 1×1.
"""

from typing import Dict, List

from ..core.exceptions import UnsupportedArchitectureError
from .layers import LayerKind, LayerSpec

SUPPORTED_PATCH_SIZES = (17, 33, 65)
DEFAULT_DESCRIPTOR_DIM = 128

# Conv rows are (name, kernel, out_channels), None marking the descriptor layer;
# pool rows are (name, kernel, stride).
ARCHITECTURE_TABLE: Dict[int, List[tuple]] = {
    65: [
        ("conv1", 5, 128), ("pool1", 2, 2),
        ("conv2", 5, 128), ("pool2", 2, 2),
        ("conv3", 5, 256), ("pool3", 2, 2),
        ("conv4", 4, 256),
        ("conv5", 1, None),
    ],
    33: [
        ("conv1", 3, 128), ("pool1", 2, 2),
        ("conv2", 5, 256), ("pool2", 2, 2),
        ("conv3", 2, 256),
        ("conv4", 4, None),
    ],
    17: [
        ("conv1", 6, 128),
        ("conv2", 5, 256),
        ("conv3", 5, 256),
        ("conv4", 4, None),
    ],
}


def scaled_width(channels: int, channel_scale: float) -> int:
    return max(1, int(round(channels * channel_scale)))


def layer_specs(patch_size: int, descriptor_dim: int = DEFAULT_DESCRIPTOR_DIM, channel_scale: float = 1.0) -> List[LayerSpec]:
    """Layer stack for receptive field ``patch_size``."""
    if patch_size not in ARCHITECTURE_TABLE:
        raise UnsupportedArchitectureError(
            f"Unsupported patch size {patch_size}; expected one of {SUPPORTED_PATCH_SIZES}"
        )
    if descriptor_dim < 1:
        raise UnsupportedArchitectureError(f"descriptor_dim must be >= 1, got {descriptor_dim}")
    if channel_scale <= 0:
        raise UnsupportedArchitectureError(f"channel_scale must be > 0, got {channel_scale}")

    specs = []
    for row in ARCHITECTURE_TABLE[patch_size]:
        name = row[0]
        if name.startswith("pool"):
            specs.append(LayerSpec(name=name, kind=LayerKind.MAXPOOL, kernel=row[1], stride=row[2]))
            continue
        _, kernel, channels = row
        is_descriptor = channels is None
        specs.append(LayerSpec(
            name=name,
            kind=LayerKind.CONV,
            kernel=kernel,
            stride=1,
            out_channels=descriptor_dim if is_descriptor else scaled_width(channels, channel_scale),
            activation=not is_descriptor,
        ))
    return specs
