"""
Dense evaluation of patch networks.

``densify`` turns a patch network into one that emits a descriptor for every p×p
window of an image in a single pass. Every strided max-pool becomes a stride-1 pool
and all later layers are dilated by the removed stride, so each pooling phase is
evaluated in place. The result at position (r, c) is exactly the patch network
applied to the window whose top-left corner is (r, c).
"""

from dataclasses import dataclass, replace
from typing import List, Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core.exceptions import DataError, ShapeError, UnsupportedArchitectureError
from ..numerics import functional as F
from ..numerics.params import ParamStore
from ..numerics.tensor import Tensor
from .layers import LayerKind, LayerSpec
from .patch_net import IN_CHANNELS, PatchNet, apply_layers

REFLECT_BORDER = "reflect"


@dataclass
class DenseNet:
    """Dense extractor sharing its parameters with ``source``."""
    layers: List[LayerSpec]
    source: PatchNet
    border: str = REFLECT_BORDER

    @property
    def params(self) -> ParamStore:
        return self.source.params

    @property
    def patch_size(self) -> int:
        return self.source.patch_size

    @property
    def descriptor_dim(self) -> int:
        return self.source.descriptor_dim

    @property
    def border_width(self) -> int:
        return (self.patch_size - 1) // 2

    def __call__(self, x: Tensor) -> Tensor:
        """Valid dense map: (N, d, H-p+1, W-p+1) for input (N, 3, H, W)."""
        if x.ndim != 4 or x.shape[1] != IN_CHANNELS:
            raise ShapeError(f"Expected (N, {IN_CHANNELS}, H, W) input, got {x.shape}")
        height, width = x.shape[2] - self.patch_size + 1, x.shape[3] - self.patch_size + 1
        if height < 1 or width < 1:
            raise DataError(f"Input {x.shape[2]}×{x.shape[3]} is smaller than patch size {self.patch_size}")
        out = apply_layers(self.layers, self.params, x)
        if out.shape[2] < height or out.shape[3] < width:
            raise ShapeError(f"Dense output {out.shape[2:]} shorter than {height}×{width}")
        if out.shape[2:] == (height, width):
            return out
        # Floor pooling leaves trailing positions whose windows run past the input
        return F.slice_(out, (slice(None), slice(None), slice(0, height), slice(0, width)))


def densify(net: PatchNet) -> DenseNet:
    """Stride-to-dilation transform of ``net``; parameters are shared, not copied."""
    dilation = 1
    layers = []
    for spec in net.layers:
        if spec.kind is LayerKind.CONV:
            if spec.stride != 1:
                raise UnsupportedArchitectureError(f"{spec.name}: strided convolutions are not supported")
            layers.append(spec.with_dense_stride(dilation * spec.dilation))
        elif spec.kind is LayerKind.MAXPOOL:
            layers.append(replace(spec, stride=1, dilation=dilation * spec.dilation))
            dilation *= spec.stride
        else:
            raise UnsupportedArchitectureError(f"{spec.name}: layer kind {spec.kind.value} cannot be densified")
    return DenseNet(layers=layers, source=net)


def pad_for_dense(images: np.ndarray, patch_size: int) -> np.ndarray:
    """Reflection-pad (…, H, W) arrays by (p-1)/2 per side."""
    pad = (patch_size - 1) // 2
    widths = [(0, 0)] * (images.ndim - 2) + [(pad, pad), (pad, pad)]
    return np.pad(images, widths, mode=REFLECT_BORDER)


def _check_image(image: np.ndarray, patch_size: int) -> None:
    if image.shape[-3] != IN_CHANNELS:
        raise ShapeError(f"Expected {IN_CHANNELS} channels, got image of shape {image.shape}")
    if image.shape[-2] < patch_size or image.shape[-1] < patch_size:
        raise DataError(f"Image {image.shape[-2]}×{image.shape[-1]} is smaller than patch size {patch_size}")


def dense_forward(dnet: DenseNet, images: Union[np.ndarray, Tensor]) -> Tensor:
    """Full-resolution maps (N, d, H, W) for images (N, 3, H, W); usable under a graph."""
    data = images.data if isinstance(images, Tensor) else np.asarray(images, dtype=np.float32)
    if data.ndim != 4:
        raise ShapeError(f"Expected (N, 3, H, W) images, got {data.shape}")
    _check_image(data, dnet.patch_size)
    return dnet(Tensor(pad_for_dense(data, dnet.patch_size)))


def extract_dense(dnet: DenseNet, image: np.ndarray) -> np.ndarray:
    """Descriptor map (d, h, w) of a 3×h×w image."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3:
        raise ShapeError(f"Expected a 3×h×w image, got {image.shape}")
    return dense_forward(dnet, image[None]).data[0]


def extract_dense_reference(net: PatchNet, image: np.ndarray, rows_per_batch: Optional[int] = None) -> np.ndarray:
    """Sliding-window oracle: ``forward_batch`` on the padded patch around every pixel."""
    image = np.asarray(image, dtype=np.float32)
    _check_image(image, net.patch_size)
    p = net.patch_size
    padded = pad_for_dense(image, p)
    windows = sliding_window_view(padded, (p, p), axis=(1, 2))  # (3, h, w, p, p)
    height, width = windows.shape[1], windows.shape[2]
    rows_per_batch = rows_per_batch or max(1, 4096 // width)

    out = np.empty((net.descriptor_dim, height, width), dtype=np.float32)
    for top in range(0, height, rows_per_batch):
        rows = windows[:, top:top + rows_per_batch]
        patches = np.ascontiguousarray(rows.transpose(1, 2, 0, 3, 4)).reshape(-1, IN_CHANNELS, p, p)
        descriptors = net.forward_batch(patches).data
        out[:, top:top + rows.shape[1]] = descriptors.reshape(rows.shape[1], width, -1).transpose(2, 0, 1)
    return out
