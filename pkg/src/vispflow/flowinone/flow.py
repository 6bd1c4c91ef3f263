"""Flow-matching path, the three loss terms and their weighted sum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numcore import Tensor, ops
from .config import ModelConfig
from .model import PosteriorParams, _leaves, encode_condition, velocity


def interpolate(z0, z1, t, sigma_min):
    """z_t = t*z1 + (1 - (1 - sigma_min)*t)*z0; ``t`` broadcasts over leading axes."""
    return t * z1 + (1.0 - (1.0 - sigma_min) * t) * z0


def target_velocity(z0, z1, sigma_min):
    return z1 - (1.0 - sigma_min) * z0


def fm_loss(v_pred, v_star) -> Tensor:
    diff = v_pred - v_star
    return ops.mean(diff * diff)


def kld_loss(post: PosteriorParams) -> Tensor:
    """Mean over elements of KL(N(mu, sigma^2) || N(0, 1))."""
    ls = post.log_sigma
    return ops.mean((post.mu * post.mu + ops.exp(ls * 2.0) - 1.0 - ls * 2.0) * 0.5)


def _unit_rows(z) -> Tensor:
    b = z.shape[0]
    flat = ops.reshape(z, (b, -1))
    norms = np.sqrt((flat.data ** 2).sum(axis=1))
    if np.any(norms == 0):
        raise ValueError(f"zero-norm latent in contrastive batch at rows {np.flatnonzero(norms == 0).tolist()}")
    return flat / ops.power(ops.sum(flat * flat, axis=1, keepdims=True), 0.5)


def clip_contrastive_loss(z_a, z_b, tau) -> Tensor:
    """Symmetric InfoNCE over cosine similarities divided by ``tau``.

    ``tau`` is a positive float or a Tensor (so a learnable temperature gets a gradient).
    """
    b = z_a.shape[0]
    if b < 1:
        raise ValueError("contrastive loss needs a batch of at least one")
    z_a = z_a if isinstance(z_a, Tensor) else Tensor(z_a)
    z_b = z_b if isinstance(z_b, Tensor) else Tensor(z_b)
    if isinstance(tau, Tensor):
        if np.any(tau.data <= 0):
            raise ValueError("temperature must be positive")
    elif tau <= 0:
        raise ValueError("temperature must be positive")
    logits = (_unit_rows(z_a) @ ops.transpose(_unit_rows(z_b))) / tau
    eye = np.eye(b)
    rows = ops.sum(ops.log_softmax(logits, axis=1) * eye) * (-1.0 / b)
    cols = ops.sum(ops.log_softmax(logits, axis=0) * eye) * (-1.0 / b)
    return (rows + cols) * 0.5


@dataclass
class LossParts:
    total: Tensor
    fm: float
    kld: float
    clip: float

    def as_row(self):
        return {"fm": self.fm, "kld": self.kld, "clip": self.clip, "total": float(self.total.data)}


@dataclass
class Batch:
    """Model-ready arrays for B examples."""

    patches: np.ndarray   # (B, N, 3*patch^2) normalised input canvases
    z1: np.ndarray        # (B, N, D) target latents
    z_src: np.ndarray     # (B, N, D) source latents; zeros where i_edit is 0
    i_edit: np.ndarray    # (B,) in {0, 1}

    def take(self, idx):
        idx = np.asarray(idx)
        return Batch(self.patches[idx], self.z1[idx], self.z_src[idx], self.i_edit[idx])

    def __len__(self):
        return len(self.i_edit)


def total_loss(p, cfg: ModelConfig, batch: Batch, rng=None, t=None, eps=None) -> LossParts:
    """L = fm + beta1*kld + beta2*clip. Draws t ~ U(0,1) per example, then eps, from ``rng``
    unless they are given."""
    p = _leaves(p)
    b = len(batch)
    if t is None:
        t = rng.uniform(0.0, 1.0, size=b)
    if eps is None and rng is not None:
        eps = rng.standard_normal((b, cfg.tokens, cfg.width))
    post, z0 = encode_condition(p, cfg, batch.patches, eps=eps)
    tt = np.asarray(t, dtype=np.float64).reshape(b, 1, 1)
    z1 = Tensor(batch.z1)
    z_t = interpolate(z0, z1, tt, cfg.sigma_min)
    v_star = target_velocity(z0, z1, cfg.sigma_min)
    v_pred = velocity(p, cfg, z_t, np.asarray(t).reshape(b), batch.z_src, batch.i_edit)
    fm = fm_loss(v_pred, v_star)
    kld = kld_loss(post)
    clip = clip_contrastive_loss(z0, z1, ops.exp(p["clip.log_tau"]))
    total = fm + kld * cfg.beta1 + clip * cfg.beta2
    return LossParts(total, float(fm.data), float(kld.data), float(clip.data))
