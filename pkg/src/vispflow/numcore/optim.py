from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ParamSet


@dataclass
class AdamWState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adamw_step(params: ParamSet, grads, state: AdamWState, lr=1e-4, beta1=0.9, beta2=0.999,
               eps=1e-8, weight_decay=0.0):
    """One AdamW update in place; returns ``(params, state)``.

    Weight decay is decoupled (applied to the parameter, not folded into the
    gradient). Frozen parameters and paths absent from ``grads`` are left alone.
    """
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    for path in params.trainable_paths():
        if path not in grads:
            continue
        g = grads[path]
        m = state.m.get(path)
        v = state.v.get(path)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        state.m[path], state.v[path] = m, v
        p = params[path]
        if weight_decay:
            p = p * (1.0 - lr * weight_decay)
        params[path] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


def warmup_cosine_lr(step: int, base_lr: float, warmup_steps: int, total_steps: int, min_lr: float = 0.0):
    """Linear warmup from 0 (at step 0) to ``base_lr`` (at ``warmup_steps``), then cosine decay."""
    if warmup_steps > 0 and step < warmup_steps:
        return base_lr * step / warmup_steps
    span = max(1, total_steps - warmup_steps)
    progress = min(1.0, (step - warmup_steps) / span)
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + math.cos(math.pi * progress))
