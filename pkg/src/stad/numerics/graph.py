"""Operation recording and reverse-mode gradient propagation."""

import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import GraphError, NumericError
from .tensor import Tensor

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_state = threading.local()


@dataclass
class Node:
    """One executed op: its inputs, its output and the vector-Jacobian product."""
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward_fn: BackwardFn
    graph: "ComputeGraph"


class ComputeGraph:
    """
    Records ops executed inside ``with ComputeGraph() as graph:``.

    Nodes are appended in execution order, which is a topological order, so the
    backward pass walks them once in reverse.
    """

    def __init__(self):
        self.nodes: List[Node] = []

    def __enter__(self) -> "ComputeGraph":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, backward_fn: BackwardFn) -> None:
        node = Node(op=op, inputs=tuple(inputs), output=output, backward_fn=backward_fn, graph=self)
        output._node = node
        output.requires_grad = True
        self.nodes.append(node)

    def backward(self, loss: Tensor) -> None:
        backward(self, loss)


def _stack() -> List[ComputeGraph]:
    stack = getattr(_state, "stack", None)
    if stack is None:
        stack = []
        _state.stack = stack
    return stack


def current_graph() -> Optional[ComputeGraph]:
    """The innermost active graph of this thread, if any."""
    stack = _stack()
    return stack[-1] if stack else None


def maybe_record(op: str, inputs: Sequence[Tensor], output: Tensor, backward_fn: BackwardFn) -> Tensor:
    """Record ``output`` when a graph is active and any input needs a gradient."""
    graph = current_graph()
    if graph is not None and any(t.requires_grad for t in inputs):
        graph.record(op, inputs, output, backward_fn)
    return output


def backward(graph: ComputeGraph, loss: Tensor) -> None:
    """
    Propagate d(loss)/d(.) to every leaf tensor that requires a gradient.

    Leaf gradients are accumulated into ``tensor.grad`` so several losses may be
    back-propagated before an optimizer step.
    """
    if loss.size != 1:
        raise GraphError(f"Loss must be a scalar, got shape {loss.shape}")
    if not np.isfinite(loss.data).all():
        raise NumericError("Loss is not finite")
    if loss._node is None or loss._node.graph is not graph:
        raise GraphError("Loss tensor was not recorded in this graph")

    pending: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        upstream = pending.pop(id(node.output), None)
        if upstream is None:
            continue
        input_grads = node.backward_fn(upstream)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if grad.shape != tensor.shape:
                raise GraphError(f"{node.op}: gradient shape {grad.shape} != input shape {tensor.shape}")
            if tensor._node is None:
                if tensor.grad is None:
                    tensor.grad = np.zeros_like(tensor.data)
                tensor.grad += grad.astype(np.float32, copy=False)
            elif tensor._node.graph is not graph:
                raise GraphError(f"{node.op}: input produced by a different graph")
            else:
                key = id(tensor)
                if key in pending:
                    pending[key] = pending[key] + grad
                else:
                    pending[key] = grad
