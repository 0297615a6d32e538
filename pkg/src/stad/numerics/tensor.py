"""Float32 tensor carrying an optional gradient buffer and its producing graph node."""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..core.exceptions import NumericError

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]


class Tensor:
    """
    Dense N-dimensional float32 array.

    Images and feature maps use the channels-first layout (C, H, W), optionally with a
    leading batch dimension. ``grad`` is only populated for leaves that require
    gradients (network parameters, or inputs under a gradient check).
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_node")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        array = np.asarray(data, dtype=np.float32)
        if not np.all(np.isfinite(array)):
            raise NumericError(f"Non-finite values in tensor {name or ''}".strip())
        self.data = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._node = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise NumericError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name)

    # Arithmetic sugar routed through the recorded ops
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    def __radd__(self, other):
        from . import functional as F
        return F.add(other, self)

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    def __rmul__(self, other):
        from . import functional as F
        return F.mul(other, self)

    def __truediv__(self, other):
        from . import functional as F
        return F.div(self, other)

    def __neg__(self):
        from . import functional as F
        return F.mul(self, -1.0)

    def __matmul__(self, other):
        from . import functional as F
        return F.matmul(self, other)

    def __getitem__(self, index):
        from . import functional as F
        return F.slice_(self, index)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    """Wrap arrays and scalars as constant tensors; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
