"""Dense float64 tensors with a recorded reverse-mode tape."""
from __future__ import annotations

import itertools

import numpy as np


class ShapeError(ValueError):
    pass


class ContractError(ValueError):
    pass


_ids = itertools.count()


class Tensor:
    """A float64 array plus the information needed to backpropagate through it.

    ``parents`` and ``backward_fn`` form the tape entry for the op that produced
    this tensor. Leaves have neither.
    """

    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "id")
    # make numpy hand mixed expressions (ndarray * Tensor) to our reflected operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self, seed=None):
        if seed is None:
            if self.data.size != 1:
                raise ContractError(f"backward() needs a scalar, got shape {self.shape}")
            seed = np.ones_like(self.data)
        # Collect every ancestor that needs a gradient; creation order is a valid
        # topological order, so replay it newest-first.
        nodes = {}
        stack = [self]
        while stack:
            node = stack.pop()
            if node.id in nodes or not node.requires_grad:
                continue
            nodes[node.id] = node
            stack.extend(node.parents)
        for node in nodes.values():
            node.grad = None
        self.grad = np.asarray(seed, dtype=np.float64)
        for node_id in sorted(nodes, reverse=True):
            node = nodes[node_id]
            if node.backward_fn is None or node.grad is None:
                continue
            grads = node.backward_fn(node.grad)
            for parent, g in zip(node.parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __pow__(self, exponent):
        from . import ops
        return ops.power(self, exponent)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from . import ops
        return ops.matmul(other, self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)
