"""Reverse-mode automatic differentiation on numpy arrays with an explicit tape.

Each operation appends a node to the tape in creation order, which is by
construction a topological order (operands always precede consumers). A node
stores its primal value, a forward closure (so the tape can be replayed) and a
backward closure (reverse accumulation).

Nested differentiation is obtained structurally: derivative computations that
must themselves be differentiated (e.g. input tangents of a network output)
are expressed with these same tape operations, so one reverse sweep through
the tape yields exact parameter gradients of losses containing derivative
terms.

All values are float64.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting expanded."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(grad.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tape:
    """Ordered, replayable record of elementary operations."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def _register(self, tensor: "Tensor"):
        tensor.index = len(self.nodes)
        self.nodes.append(tensor)

    def leaf(self, value, requires_grad: bool = False) -> "Tensor":
        return Tensor(np.asarray(value, dtype=np.float64), self, requires_grad=requires_grad)

    def constant(self, value) -> "Tensor":
        return self.leaf(value, requires_grad=False)

    def replay(self):
        """Recompute every stored primal value in order (bit-exact)."""
        for node in self.nodes:
            if node._forward is not None:
                node.value = node._forward()

    def backward(self, root: "Tensor"):
        """Reverse accumulation from ``root``; grads land on requires_grad leaves.

        ``root`` must be a scalar (0-d or size 1).
        """
        if root.tape is not self:
            raise ContractError("root tensor does not belong to this tape")
        if root.value.size != 1:
            raise ContractError("backward root must be a scalar loss")
        for node in self.nodes:
            node.grad = None
        root.grad = np.ones_like(root.value)
        root._grad_owned = True
        for node in reversed(self.nodes[: root.index + 1]):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)


class Tensor:
    """A tape node: primal value plus forward/backward closures."""

    __slots__ = ("value", "grad", "tape", "index", "_forward", "_backward", "_grad_owned")

    def __init__(self, value: np.ndarray, tape: Tape, requires_grad: bool = False,
                 forward=None, backward=None):
        self.value = value
        self.tape = tape
        self._forward = forward
        # leaves that do not require grad get no backward hook; their grad
        # stays None and backward() skips them.
        self._backward = backward if backward is not None else ((lambda g: None) if requires_grad else None)
        self.grad = None
        self._grad_owned = False
        tape._register(self)

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return self.tape.constant(other)

    # -- elementary operations ------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        out = Tensor(self.value + other.value, self.tape,
                     forward=lambda: self.value + other.value)
        def backward(g):
            ga = _unbroadcast(g, self.value.shape)
            _accumulate(self, ga, fresh=ga is not g)
            gb = _unbroadcast(g, other.value.shape)
            _accumulate(other, gb, fresh=gb is not g)
        out._backward = backward
        return out

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        out = Tensor(self.value - other.value, self.tape,
                     forward=lambda: self.value - other.value)
        def backward(g):
            ga = _unbroadcast(g, self.value.shape)
            _accumulate(self, ga, fresh=ga is not g)
            _accumulate(other, _unbroadcast(-g, other.value.shape), fresh=True)
        out._backward = backward
        return out

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __neg__(self):
        out = Tensor(-self.value, self.tape, forward=lambda: -self.value)
        def backward(g):
            _accumulate(self, -g)
        out._backward = backward
        return out

    def __mul__(self, other):
        other = self._coerce(other)
        out = Tensor(self.value * other.value, self.tape,
                     forward=lambda: self.value * other.value)
        def backward(g):
            _accumulate(self, _unbroadcast(g * other.value, self.value.shape), fresh=True)
            _accumulate(other, _unbroadcast(g * self.value, other.value.shape), fresh=True)
        out._backward = backward
        return out

    __rmul__ = __mul__

    def matmul(self, other: "Tensor") -> "Tensor":
        other = self._coerce(other)
        out = Tensor(self.value @ other.value, self.tape,
                     forward=lambda: self.value @ other.value)
        def backward(g):
            _accumulate(self, g @ other.value.T)
            _accumulate(other, self.value.T @ g)
        out._backward = backward
        return out

    __matmul__ = matmul

    def tanh(self) -> "Tensor":
        out = Tensor(np.tanh(self.value), self.tape,
                     forward=lambda: np.tanh(self.value))
        def backward(g):
            _accumulate(self, g * (1.0 - out.value * out.value))
        out._backward = backward
        return out

    def sin(self) -> "Tensor":
        out = Tensor(np.sin(self.value), self.tape,
                     forward=lambda: np.sin(self.value))
        def backward(g):
            _accumulate(self, g * np.cos(self.value))
        out._backward = backward
        return out

    def cos(self) -> "Tensor":
        out = Tensor(np.cos(self.value), self.tape,
                     forward=lambda: np.cos(self.value))
        def backward(g):
            _accumulate(self, g * (-np.sin(self.value)))
        out._backward = backward
        return out

    def square(self) -> "Tensor":
        out = Tensor(self.value * self.value, self.tape,
                     forward=lambda: self.value * self.value)
        def backward(g):
            _accumulate(self, g * (2.0 * self.value))
        out._backward = backward
        return out

    def sum(self) -> "Tensor":
        out = Tensor(np.asarray(self.value.sum()), self.tape,
                     forward=lambda: np.asarray(self.value.sum()))
        def backward(g):
            _accumulate(self, np.broadcast_to(g, self.value.shape), fresh=False)
        out._backward = backward
        return out

    def mean(self) -> "Tensor":
        n = self.value.size
        out = Tensor(np.asarray(self.value.mean()), self.tape,
                     forward=lambda: np.asarray(self.value.mean()))
        def backward(g):
            _accumulate(self, np.broadcast_to(g / n, self.value.shape), fresh=False)
        out._backward = backward
        return out


def _accumulate(tensor: Tensor, g: np.ndarray, fresh: bool = True):
    """Add a gradient contribution.

    ``fresh`` marks arrays allocated by the caller for this contribution
    alone; they may be adopted (and later mutated in place) without copying.
    Pass fresh=False when ``g`` aliases another node's gradient.
    """
    if tensor._backward is None and tensor.grad is None and tensor._forward is None:
        # constant leaf: gradient is never consumed
        return
    if tensor.grad is None:
        tensor.grad = g
        tensor._grad_owned = fresh
    elif tensor._grad_owned:
        tensor.grad += g
    else:
        tensor.grad = tensor.grad + g
        tensor._grad_owned = True
