"""Patch networks, their dense form and the distillation decoder."""

from .layers import LayerKind, LayerSpec
from .architectures import SUPPORTED_PATCH_SIZES, DEFAULT_DESCRIPTOR_DIM, layer_specs
from .patch_net import PatchNet, build_teacher_patch_net, build_from_architecture, forward_patch
from .dense import DenseNet, densify, dense_forward, extract_dense, extract_dense_reference
from .decoder import DEFAULT_TARGET_DIM, DecoderSpec, build_decoder, decode

__all__ = [
    "LayerKind",
    "LayerSpec",
    "SUPPORTED_PATCH_SIZES",
    "DEFAULT_DESCRIPTOR_DIM",
    "layer_specs",
    "PatchNet",
    "build_teacher_patch_net",
    "build_from_architecture",
    "forward_patch",
    "DenseNet",
    "densify",
    "dense_forward",
    "extract_dense",
    "extract_dense_reference",
    "DEFAULT_TARGET_DIM",
    "DecoderSpec",
    "build_decoder",
    "decode",
]
