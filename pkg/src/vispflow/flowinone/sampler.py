"""Classifier-free-guided forward-Euler integration of the learned velocity field."""
from __future__ import annotations

import numpy as np

from ..numcore import ParamSet
from .codec import canvas_array, decode_target, encode_target, normalize, patchify
from .config import ModelConfig
from .model import encode_condition, velocity


def guided_velocity(v_uncond, v_cond, scale):
    if scale == 1:
        return v_cond
    return v_uncond + scale * (v_cond - v_uncond)


def euler_integrate(z0, velocity_fn, steps: int, cfg_scale: float = 1.0):
    """Integrate dz/dt = v from t=0 to t=1 with ``steps`` equal steps.

    ``velocity_fn(z, t, conditional)`` returns an array shaped like ``z``; the
    unconditional call is skipped when ``cfg_scale == 1``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    z = np.array(z0, dtype=np.float64)
    dt = 1.0 / steps
    for k in range(steps):
        t = k * dt
        v_cond = np.asarray(velocity_fn(z, t, True))
        v_uncond = v_cond if cfg_scale == 1 else np.asarray(velocity_fn(z, t, False))
        z = z + dt * guided_velocity(v_uncond, v_cond, cfg_scale)
    return z


def model_velocity_fn(params, cfg: ModelConfig, z_src, i_edit):
    p = params.leaves(requires_grad=False) if isinstance(params, ParamSet) else params
    b = len(i_edit)
    zeros = np.zeros_like(z_src)
    no_edit = np.zeros(b, dtype=np.int64)

    def fn(z, t, conditional):
        if conditional:
            return velocity(p, cfg, z, np.full(b, t), z_src, i_edit).data
        return velocity(p, cfg, z, np.full(b, t), zeros, no_edit).data

    return fn


def sample_latents(params, cfg: ModelConfig, patches, z_src, i_edit, steps=None, cfg_scale=None, rng=None):
    """Batch sampling in latent space; ``rng=None`` starts from the posterior mean."""
    steps = cfg.steps if steps is None else steps
    cfg_scale = cfg.cfg_scale if cfg_scale is None else cfg_scale
    i_edit = np.asarray(i_edit, dtype=np.int64).reshape(-1)
    z_src = np.where(i_edit.reshape(-1, 1, 1) == 1, z_src, 0.0)
    _, z0 = encode_condition(params, cfg, patches, rng=rng)
    return euler_integrate(z0.data, model_velocity_fn(params, cfg, z_src, i_edit), steps, cfg_scale)


def sample(params, cfg: ModelConfig, canvases, i_edit, steps=None, cfg_scale=None, rng=None) -> list:
    """Canvases in, generated canvases out (one per input)."""
    P = params["codec.P"] if isinstance(params, ParamSet) else params["codec.P"].data
    patches = patchify(normalize(canvas_array(canvases, cfg.image_side)), cfg.patch)
    z_src = encode_target(canvases, P, cfg.patch, cfg.image_side)
    z1 = sample_latents(params, cfg, patches, z_src, i_edit, steps, cfg_scale, rng)
    return decode_target(z1, P, cfg.patch, cfg.image_side)
