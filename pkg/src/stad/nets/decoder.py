"""Linear decoder mapping teacher descriptors onto distillation-target space."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.exceptions import ShapeError
from ..numerics import functional as F
from ..numerics.params import ParamStore
from ..numerics.tensor import Tensor, as_tensor

DEFAULT_TARGET_DIM = 512


@dataclass
class DecoderSpec:
    """Fully connected map d → target_dim with parameters ``decode.weight``/``decode.bias``."""
    descriptor_dim: int
    target_dim: int
    params: ParamStore

    @property
    def weight(self) -> Tensor:
        return self.params["decode.weight"]

    @property
    def bias(self) -> Tensor:
        return self.params["decode.bias"]


def build_decoder(descriptor_dim: int, target_dim: int = DEFAULT_TARGET_DIM, seed: Optional[int] = 0) -> DecoderSpec:
    rng = np.random.default_rng(seed)
    bound = np.sqrt(1.0 / descriptor_dim)
    params = ParamStore()
    params.add("decode.weight", rng.uniform(-bound, bound, size=(target_dim, descriptor_dim)).astype(np.float32))
    params.add("decode.bias", rng.uniform(-bound, bound, size=(target_dim,)).astype(np.float32))
    return DecoderSpec(descriptor_dim=descriptor_dim, target_dim=target_dim, params=params)


def decode(dec: DecoderSpec, y) -> Tensor:
    """Apply the decoder to one descriptor (d,) or a batch (N, d)."""
    y = as_tensor(y)
    if y.shape[-1] != dec.descriptor_dim:
        raise ShapeError(f"Decoder expects descriptors of dim {dec.descriptor_dim}, got {y.shape}")
    return F.fully_connected(y, dec.weight, dec.bias)
