"""Adam with L2 weight decay."""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..core.exceptions import NumericError
from .params import ParamStore


@dataclass
class AdamState:
    """Per-parameter moments plus the optimizer hyperparameters."""
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-5
    # False: decay enters the gradient (coupled L2); True: θ ← θ − lr·wd·θ
    decoupled: bool = False
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: ParamStore, state: AdamState) -> None:
    """Apply one Adam update in place using the gradients stored on ``params``."""
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for name, tensor in params.items():
        grad = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        if state.weight_decay and not state.decoupled:
            grad = grad + np.float32(state.weight_decay) * tensor.data
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(tensor.data)
            v = np.zeros_like(tensor.data)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.first_moment[name] = m.astype(np.float32)
        state.second_moment[name] = v.astype(np.float32)
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        if state.weight_decay and state.decoupled:
            update = update + state.lr * state.weight_decay * tensor.data
        new_value = (tensor.data - update).astype(np.float32)
        if not np.all(np.isfinite(new_value)):
            raise NumericError(f"adam_step produced non-finite values for {name}")
        tensor.data = new_value
