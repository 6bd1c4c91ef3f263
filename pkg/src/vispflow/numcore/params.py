from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ContractError, Tensor


class ParamSet:
    """Named float64 parameters, each trainable or frozen.

    Paths are dotted strings (``blocks.0.attn.wq``); insertion order is kept so
    iteration, checkpoints and optimizer updates are deterministic.
    """

    def __init__(self):
        self._values: dict[str, np.ndarray] = {}
        self._trainable: dict[str, bool] = {}

    def add(self, path: str, value, trainable: bool = True):
        if path in self._values:
            raise KeyError(f"duplicate parameter path {path!r}")
        self._values[path] = np.array(value, dtype=np.float64)
        self._trainable[path] = trainable

    def __getitem__(self, path):
        return self._values[path]

    def __setitem__(self, path, value):
        if path not in self._values:
            raise KeyError(path)
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._values[path].shape:
            raise ValueError(f"shape change for {path}: {self._values[path].shape} -> {value.shape}")
        self._values[path] = value

    def __contains__(self, path):
        return path in self._values

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def items(self):
        return self._values.items()

    def is_trainable(self, path):
        return self._trainable[path]

    def set_trainable(self, path, flag: bool):
        self._trainable[path] = flag

    def trainable_paths(self):
        return [p for p in self._values if self._trainable[p]]

    def count(self, trainable_only=True):
        return sum(v.size for p, v in self._values.items() if self._trainable[p] or not trainable_only)

    def copy(self):
        out = ParamSet()
        for p, v in self._values.items():
            out.add(p, v.copy(), self._trainable[p])
        return out

    def leaves(self, requires_grad=True):
        """Fresh leaf tensors: trainable ones record gradients, frozen ones are constants."""
        return {p: Tensor(v, requires_grad=requires_grad and self._trainable[p])
                for p, v in self._values.items()}


def grad(loss_fn, params: ParamSet):
    """Gradient of a scalar ``loss_fn(leaves)`` with respect to every trainable parameter."""
    leaves = params.leaves()
    loss = loss_fn(leaves)
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        shape = getattr(loss, "shape", type(loss).__name__)
        raise ContractError(f"loss must be a scalar tensor, got {shape}")
    loss.backward()
    out = {}
    for path in params.trainable_paths():
        g = leaves[path].grad
        out[path] = np.zeros_like(params[path]) if g is None else np.asarray(g).reshape(params[path].shape)
    return out


def value_and_grad(loss_fn, params: ParamSet):
    leaves = params.leaves()
    loss = loss_fn(leaves)
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise ContractError("loss must be a scalar tensor")
    loss.backward()
    grads = {}
    for path in params.trainable_paths():
        g = leaves[path].grad
        grads[path] = np.zeros_like(params[path]) if g is None else np.asarray(g).reshape(params[path].shape)
    return loss, grads


@dataclass
class GradCheckReport:
    epsilon: float
    tolerance: float
    max_rel_error: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self):
        return all(e <= self.tolerance for e in self.max_rel_error.values())

    @property
    def worst(self):
        if not self.max_rel_error:
            return ("", 0.0)
        path = max(self.max_rel_error, key=self.max_rel_error.get)
        return path, self.max_rel_error[path]

    def failures(self):
        return {p: e for p, e in self.max_rel_error.items() if e > self.tolerance}


def relative_error(a, n):
    return np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))


def finite_diff_check(loss_fn, params: ParamSet, epsilon: float = 1e-5, tolerance: float = 1e-4,
                      paths=None) -> GradCheckReport:
    """Compare autodiff gradients with central differences, element by element."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    analytic = grad(loss_fn, params)
    report = GradCheckReport(epsilon, tolerance)
    work = params.copy()

    def evaluate():
        return float(loss_fn(work.leaves(requires_grad=False)).data)

    for path in paths or params.trainable_paths():
        value = work[path]
        numeric = np.zeros_like(value)
        flat = value.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = evaluate()
            flat[i] = orig - epsilon
            down = evaluate()
            flat[i] = orig
            num_flat[i] = (up - down) / (2 * epsilon)
        err = relative_error(analytic[path], numeric)
        report.max_rel_error[path] = float(err.max()) if err.size else 0.0
    return report
