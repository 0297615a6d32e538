"""Tensor algebra, layer primitives, reverse-mode gradients and Adam."""

from .tensor import Tensor, as_tensor
from .graph import ComputeGraph, backward, current_graph
from .params import ParamStore
from .optim import AdamState, adam_step
from .gradcheck import gradcheck
from . import functional

__all__ = [
    "Tensor",
    "as_tensor",
    "ComputeGraph",
    "backward",
    "current_graph",
    "ParamStore",
    "AdamState",
    "adam_step",
    "gradcheck",
    "functional",
]
