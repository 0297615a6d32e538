"""Named parameter tensors with matching gradient buffers."""

from collections import OrderedDict
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from ..core.exceptions import ShapeError
from .tensor import Tensor


class ParamStore:
    """Ordered mapping of unique names to trainable tensors."""

    def __init__(self):
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"Duplicate parameter name: {name}")
        tensor = Tensor(value, requires_grad=True, name=name)
        tensor.zero_grad()
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._params.items())

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.zero_grad()

    def num_parameters(self) -> int:
        return sum(t.size for t in self._params.values())

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self._params.items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], prefix: str = "") -> None:
        """Copy values in place; every parameter must be present with its shape."""
        for name, tensor in self._params.items():
            key = prefix + name
            if key not in state:
                raise KeyError(f"Missing parameter: {key}")
            value = np.asarray(state[key], dtype=np.float32)
            if value.shape != tensor.shape:
                raise ShapeError(f"{key}: expected {tensor.shape}, got {value.shape}")
            tensor.data = value.copy()

    def clone(self) -> "ParamStore":
        copy = ParamStore()
        for name, tensor in self._params.items():
            copy.add(name, tensor.data.copy())
        return copy

    def get(self, name: str) -> Optional[Tensor]:
        return self._params.get(name)
