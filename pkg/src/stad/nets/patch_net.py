"""Patch-sized networks mapping a p×p×3 patch to a d-dimensional descriptor."""

from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import ShapeError, UnsupportedArchitectureError
from ..numerics import functional as F
from ..numerics.params import ParamStore
from ..numerics.tensor import Tensor, as_tensor
from .architectures import DEFAULT_DESCRIPTOR_DIM, SUPPORTED_PATCH_SIZES, layer_specs
from .layers import LayerKind, LayerSpec

IN_CHANNELS = 3


def init_params(layers: Sequence[LayerSpec], in_channels: int, rng: np.random.Generator) -> ParamStore:
    """Uniform ±sqrt(1/fan_in) initialization of every conv weight and bias."""
    params = ParamStore()
    channels = in_channels
    for spec in layers:
        if spec.kind is not LayerKind.CONV:
            continue
        fan_in = channels * spec.kernel * spec.kernel
        bound = np.sqrt(1.0 / fan_in)
        weight = rng.uniform(-bound, bound, size=(spec.out_channels, channels, spec.kernel, spec.kernel))
        bias = rng.uniform(-bound, bound, size=(spec.out_channels,))
        params.add(f"{spec.name}.weight", weight.astype(np.float32))
        params.add(f"{spec.name}.bias", bias.astype(np.float32))
        channels = spec.out_channels
    return params


def apply_layers(layers: Sequence[LayerSpec], params: ParamStore, x: Tensor) -> Tensor:
    """Run ``x`` (C×H×W or N×C×H×W) through ``layers`` with their strides and dilations."""
    for spec in layers:
        if spec.kind is LayerKind.CONV:
            x = F.conv2d(
                x,
                params[f"{spec.name}.weight"],
                params[f"{spec.name}.bias"],
                stride=spec.stride,
                dilation=spec.dilation,
            )
            if spec.activation:
                x = F.leaky_relu(x)
        elif spec.kind is LayerKind.MAXPOOL:
            x = F.maxpool2d(x, kernel=spec.kernel, stride=spec.stride, dilation=spec.dilation)
        else:
            raise UnsupportedArchitectureError(f"Layer kind {spec.kind.value} is not part of a patch network")
    return x


class PatchNet:
    """Teacher or student network with receptive field ``patch_size``."""

    def __init__(
        self,
        layers: List[LayerSpec],
        params: ParamStore,
        patch_size: int,
        descriptor_dim: int,
        channel_scale: float = 1.0,
    ):
        self.layers = layers
        self.params = params
        self.patch_size = patch_size
        self.descriptor_dim = descriptor_dim
        self.channel_scale = channel_scale

    def __call__(self, x: Tensor) -> Tensor:
        return apply_layers(self.layers, self.params, x)

    def forward_batch(self, patches) -> Tensor:
        """Descriptors (N, d) for patches (N, 3, p, p)."""
        patches = as_tensor(patches)
        if patches.ndim != 4 or patches.shape[1:] != (IN_CHANNELS, self.patch_size, self.patch_size):
            raise ShapeError(
                f"Expected patches of shape (N, {IN_CHANNELS}, {self.patch_size}, {self.patch_size}), got {patches.shape}"
            )
        out = self(patches)
        if out.shape[2:] != (1, 1):
            raise ShapeError(f"Patch network produced spatial shape {out.shape[2:]}, expected (1, 1)")
        return F.reshape(out, (patches.shape[0], self.descriptor_dim))

    def trace_shapes(self, side: int) -> List[Tuple[str, int, int, int]]:
        """(layer name, channels, height, width) after each layer for a side×side input."""
        trace = []
        channels, height, width = IN_CHANNELS, side, side
        for spec in self.layers:
            height = F.output_extent(height, spec.kernel, spec.stride, spec.dilation)
            width = F.output_extent(width, spec.kernel, spec.stride, spec.dilation)
            if spec.kind is LayerKind.CONV:
                channels = spec.out_channels
            trace.append((spec.name, channels, height, width))
        return trace

    def architecture(self) -> Dict[str, Any]:
        return {
            "patch_size": self.patch_size,
            "descriptor_dim": self.descriptor_dim,
            "channel_scale": self.channel_scale,
            "layers": [spec.to_dict() for spec in self.layers],
        }

    def clone(self) -> "PatchNet":
        return PatchNet(list(self.layers), self.params.clone(), self.patch_size, self.descriptor_dim, self.channel_scale)


def build_teacher_patch_net(
    p: int,
    d: int = DEFAULT_DESCRIPTOR_DIM,
    channel_scale: float = 1.0,
    seed: Optional[int] = 0,
) -> PatchNet:
    """Randomly initialized patch network for receptive field ``p``; students use the same builder."""
    if p not in SUPPORTED_PATCH_SIZES:
        raise UnsupportedArchitectureError(f"Unsupported patch size {p}; expected one of {SUPPORTED_PATCH_SIZES}")
    layers = layer_specs(p, d, channel_scale)
    params = init_params(layers, IN_CHANNELS, np.random.default_rng(seed))
    return PatchNet(layers, params, p, d, channel_scale)


def build_from_architecture(architecture: Dict[str, Any]) -> PatchNet:
    """Rebuild an (uninitialized-values) network from ``PatchNet.architecture()``."""
    layers = [LayerSpec.from_dict(row) for row in architecture["layers"]]
    params = init_params(layers, IN_CHANNELS, np.random.default_rng(0))
    return PatchNet(
        layers,
        params,
        int(architecture["patch_size"]),
        int(architecture["descriptor_dim"]),
        float(architecture.get("channel_scale", 1.0)),
    )


def forward_patch(net: PatchNet, patch) -> Tensor:
    """Descriptor (d,) of a single 3×p×p patch."""
    patch = as_tensor(patch)
    if patch.shape != (IN_CHANNELS, net.patch_size, net.patch_size):
        raise ShapeError(f"Patch shape {patch.shape} does not match patch size {net.patch_size}")
    return F.reshape(net.forward_batch(F.reshape(patch, (1,) + patch.shape)), (net.descriptor_dim,))
