"""Central finite-difference check of analytic gradients."""

from typing import Callable, List, Sequence

import numpy as np

from .graph import ComputeGraph, backward
from .tensor import Tensor


def numeric_gradient(fn: Callable[[List[Tensor]], Tensor], inputs: Sequence[np.ndarray], index: int, h: float) -> np.ndarray:
    base = [np.array(x, dtype=np.float32) for x in inputs]
    grad = np.zeros_like(base[index], dtype=np.float64)
    flat = base[index].reshape(-1)
    for k in range(flat.size):
        original = flat[k]
        flat[k] = original + h
        plus = fn([Tensor(x) for x in base]).item()
        flat[k] = original - h
        minus = fn([Tensor(x) for x in base]).item()
        flat[k] = original
        grad.reshape(-1)[k] = (plus - minus) / (2.0 * h)
    return grad


def gradcheck(fn: Callable[[List[Tensor]], Tensor], inputs: Sequence[np.ndarray], h: float = 1e-3) -> float:
    """
    Largest relative error between analytic and central-difference gradients.

    The error of one input is ||g_analytic − g_numeric|| / max(||g_analytic|| + ||g_numeric||, 1e-8).
    """
    tensors = [Tensor(np.array(x, dtype=np.float32), requires_grad=True) for x in inputs]
    with ComputeGraph() as graph:
        loss = fn(tensors)
    backward(graph, loss)

    worst = 0.0
    for index, tensor in enumerate(tensors):
        analytic = tensor.grad.astype(np.float64) if tensor.grad is not None else np.zeros(tensor.shape)
        numeric = numeric_gradient(fn, inputs, index, h)
        denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-8)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / denom))
    return worst
