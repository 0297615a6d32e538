"""
Differentiable ops on ``Tensor``.

Each op computes its forward result with numpy, rejects non-finite output and, when
a ``ComputeGraph`` is active and an input requires a gradient, records a closure
computing the vector-Jacobian product. Convolution and pooling loop over kernel
offsets (shift-and-accumulate) so memory stays proportional to one feature map and
the summation order is fixed.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..core.exceptions import DataError, NumericError, ShapeError
from .graph import maybe_record
from .tensor import Tensor, as_tensor

Operand = Union[Tensor, np.ndarray, float, int]

LEAKY_RELU_SLOPE = 5e-3


def _checked(out: np.ndarray, op: str) -> Tensor:
    out = np.asarray(out, dtype=np.float32)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{op}: non-finite output")
    tensor = Tensor.__new__(Tensor)
    tensor.data = out
    tensor.grad = None
    tensor.requires_grad = False
    tensor.name = None
    tensor._node = None
    return tensor


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Elementwise and reductions
# ---------------------------------------------------------------------------

def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _checked(a.data + b.data, "add")
    return maybe_record("add", (a, b), out, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _checked(a.data - b.data, "sub")
    return maybe_record("sub", (a, b), out, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _checked(a.data * b.data, "mul")
    return maybe_record(
        "mul", (a, b), out,
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if np.any(b.data == 0):
        raise NumericError("div: division by zero")
    out = _checked(a.data / b.data, "div")
    return maybe_record(
        "div", (a, b), out,
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * a.data / (b.data * b.data), b.shape)),
    )


def square(x: Operand) -> Tensor:
    x = as_tensor(x)
    out = _checked(x.data * x.data, "square")
    return maybe_record("square", (x,), out, lambda g: (2.0 * x.data * g,))


def sqrt(x: Operand) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data < 0):
        raise NumericError("sqrt: negative input")
    out = _checked(np.sqrt(x.data), "sqrt")

    def _backward(g):
        with np.errstate(divide="raise", invalid="raise"):
            try:
                return (g / (2.0 * out.data),)
            except FloatingPointError as exc:
                raise NumericError("sqrt: gradient at zero") from exc

    return maybe_record("sqrt", (x,), out, _backward)


def sum_(x: Operand, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = _checked(np.sum(x.data, axis=axis, keepdims=keepdims), "sum")

    def _backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).astype(np.float32),)

    return maybe_record("sum", (x,), out, _backward)


def mean(x: Operand, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        count = x.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([x.shape[a] for a in axes]))
    return mul(sum_(x, axis=axis, keepdims=keepdims), 1.0 / count)


def minimum(a: Operand, b: Operand) -> Tensor:
    """Elementwise minimum; ties route the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    out = _checked(np.where(take_a, a.data, b.data), "minimum")
    return maybe_record(
        "minimum", (a, b), out,
        lambda g: (_unbroadcast(np.where(take_a, g, 0.0), a.shape), _unbroadcast(np.where(take_a, 0.0, g), b.shape)),
    )


def clamp_min(x: Operand, low: float = 0.0) -> Tensor:
    x = as_tensor(x)
    keep = x.data > low
    out = _checked(np.where(keep, x.data, np.float32(low)), "clamp_min")
    return maybe_record("clamp_min", (x,), out, lambda g: (np.where(keep, g, 0.0),))


def matmul(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    out = _checked(a.data @ b.data, "matmul")
    return maybe_record("matmul", (a, b), out, lambda g: (g @ b.data.T, a.data.T @ g))


def reshape(x: Operand, shape: Tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    out = _checked(x.data.reshape(shape), "reshape")
    return maybe_record("reshape", (x,), out, lambda g: (g.reshape(x.shape),))


def transpose(x: Operand, axes: Optional[Sequence[int]] = None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = _checked(np.transpose(x.data, axes), "transpose")
    return maybe_record("transpose", (x,), out, lambda g: (np.transpose(g, inverse),))


def concat(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    out = _checked(np.concatenate([t.data for t in parts], axis=axis), "concat")
    bounds = np.cumsum([t.shape[axis] for t in parts])[:-1]
    return maybe_record("concat", parts, out, lambda g: tuple(np.split(g, bounds, axis=axis)))


def slice_(x: Operand, index) -> Tensor:
    x = as_tensor(x)
    out = _checked(np.array(x.data[index], copy=True), "slice")

    def _backward(g):
        grad = np.zeros_like(x.data)
        grad[index] += g
        return (grad,)

    return maybe_record("slice", (x,), out, _backward)


# ---------------------------------------------------------------------------
# Layer primitives
# ---------------------------------------------------------------------------

def leaky_relu(x: Operand, slope: float = LEAKY_RELU_SLOPE) -> Tensor:
    x = as_tensor(x)
    positive = x.data >= 0
    out = _checked(np.where(positive, x.data, np.float32(slope) * x.data), "leaky_relu")
    return maybe_record(
        "leaky_relu", (x,), out,
        lambda g: (np.where(positive, g, np.float32(slope) * g),),
    )


def fully_connected(x: Operand, weights: Operand, bias: Operand) -> Tensor:
    """y = W·x + b for a vector ``x`` (n,) or a batch (N, n)."""
    x, weights, bias = as_tensor(x), as_tensor(weights), as_tensor(bias)
    if weights.ndim != 2 or x.shape[-1] != weights.shape[1] or bias.shape != (weights.shape[0],):
        raise ShapeError(f"fully_connected: x {x.shape}, W {weights.shape}, b {bias.shape}")
    out = _checked(x.data @ weights.data.T + bias.data, "fully_connected")

    def _backward(g):
        batch_g = g.reshape(-1, weights.shape[0])
        batch_x = x.data.reshape(-1, weights.shape[1])
        return (
            (g @ weights.data).reshape(x.shape),
            batch_g.T @ batch_x,
            batch_g.sum(axis=0),
        )

    return maybe_record("fully_connected", (x, weights, bias), out, _backward)


def output_extent(size: int, kernel: int, stride: int = 1, dilation: int = 1) -> int:
    """Valid output length: floor((size - k_eff) / stride) + 1."""
    effective = kernel + (kernel - 1) * (dilation - 1)
    return (size - effective) // stride + 1


def _as_batch(x: Tensor, op: str) -> Tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x.data[None], True
    if x.ndim == 4:
        return x.data, False
    raise ShapeError(f"{op}: expected C×H×W or N×C×H×W input, got {x.shape}")


def _offset_view(x: np.ndarray, i: int, j: int, out_h: int, out_w: int, stride: int, dilation: int) -> np.ndarray:
    top, left = i * dilation, j * dilation
    return x[:, :, top:top + stride * (out_h - 1) + 1:stride, left:left + stride * (out_w - 1) + 1:stride]


def conv2d(
    x: Operand,
    weights: Operand,
    bias: Operand,
    stride: int = 1,
    dilation: int = 1,
    padding: int = 0,
) -> Tensor:
    """Valid cross-correlation of C×H×W (or N×C×H×W) input with O×C×k×k weights."""
    x, weights, bias = as_tensor(x), as_tensor(weights), as_tensor(bias)
    data, squeeze = _as_batch(x, "conv2d")
    if stride < 1 or dilation < 1 or padding < 0:
        raise ShapeError(f"conv2d: stride={stride}, dilation={dilation}, padding={padding}")
    if weights.ndim != 4 or weights.shape[1] != data.shape[1] or bias.shape != (weights.shape[0],):
        raise ShapeError(f"conv2d: input {x.shape}, weights {weights.shape}, bias {bias.shape}")
    if padding:
        data = np.pad(data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

    n, c, h, w = data.shape
    o, _, kh, kw = weights.shape
    out_h = output_extent(h, kh, stride, dilation)
    out_w = output_extent(w, kw, stride, dilation)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"conv2d: input {h}×{w} smaller than kernel {kh}×{kw} (dilation {dilation})")

    out = np.zeros((n, o, out_h * out_w), dtype=np.float32)
    for i in range(kh):
        for j in range(kw):
            window = _offset_view(data, i, j, out_h, out_w, stride, dilation).reshape(n, c, -1)
            out += np.matmul(weights.data[:, :, i, j], window)
    out += bias.data[None, :, None]
    out = out.reshape(n, o, out_h, out_w)
    result = _checked(out[0] if squeeze else out, "conv2d")

    def _backward(g):
        g = g.reshape(n, o, out_h * out_w)
        grad_x = np.zeros_like(data)
        grad_w = np.zeros_like(weights.data)
        for i in range(kh):
            for j in range(kw):
                view = _offset_view(data, i, j, out_h, out_w, stride, dilation)
                window = view.reshape(n, c, -1)
                grad_w[:, :, i, j] = np.tensordot(g, window, axes=([0, 2], [0, 2]))
                target = _offset_view(grad_x, i, j, out_h, out_w, stride, dilation)
                target += np.matmul(weights.data[:, :, i, j].T, g).reshape(n, c, out_h, out_w)
        if padding:
            grad_x = grad_x[:, :, padding:-padding, padding:-padding]
        grad_b = g.sum(axis=(0, 2))
        return (grad_x[0] if squeeze else grad_x, grad_w, grad_b)

    return maybe_record("conv2d", (x, weights, bias), result, _backward)


def maxpool2d(x: Operand, kernel: int = 2, stride: int = 2, dilation: int = 1) -> Tensor:
    """Max over k×k windows; trailing rows/cols not covered by a window are dropped."""
    x = as_tensor(x)
    data, squeeze = _as_batch(x, "maxpool2d")
    n, c, h, w = data.shape
    out_h = output_extent(h, kernel, stride, dilation)
    out_w = output_extent(w, kernel, stride, dilation)
    if kernel < 1 or stride < 1 or out_h < 1 or out_w < 1:
        raise DataError(f"maxpool2d: input {h}×{w} smaller than kernel {kernel} (dilation {dilation})")

    best = None
    winner = np.zeros((n, c, out_h, out_w), dtype=np.int32)
    for i in range(kernel):
        for j in range(kernel):
            view = _offset_view(data, i, j, out_h, out_w, stride, dilation)
            if best is None:
                best = view.copy()
                continue
            larger = view > best
            best = np.where(larger, view, best)
            winner[larger] = i * kernel + j
    result = _checked(best[0] if squeeze else best, "maxpool2d")

    def _backward(g):
        g = g[None] if squeeze else g
        grad_x = np.zeros_like(data)
        for i in range(kernel):
            for j in range(kernel):
                target = _offset_view(grad_x, i, j, out_h, out_w, stride, dilation)
                target += np.where(winner == i * kernel + j, g, 0.0)
        return (grad_x[0] if squeeze else grad_x,)

    return maybe_record("maxpool2d", (x,), result, _backward)
