"""Frozen orthonormal linear patch codec standing in for the pretrained image VAE."""
from __future__ import annotations

import numpy as np

from ..render import Canvas


def normalize(rgb) -> np.ndarray:
    # 128 is the centre so mid-gray maps to exactly zero
    return (np.asarray(rgb, dtype=np.float64) - 128.0) / 128.0


def denormalize(x) -> np.ndarray:
    x = np.clip(x, -1.0, 1.0)
    return np.clip(np.floor(x * 128.0 + 128.5), 0, 255).astype(np.uint8)


def patchify(images, patch: int) -> np.ndarray:
    """(B, H, W, 3) or (H, W, 3) -> (B, N, 3*patch*patch), row-major patches."""
    x = np.asarray(images)
    single = x.ndim == 3
    if single:
        x = x[None]
    b, h, w, c = x.shape
    gh, gw = h // patch, w // patch
    out = x.reshape(b, gh, patch, gw, patch, c).transpose(0, 1, 3, 2, 4, 5).reshape(b, gh * gw, patch * patch * c)
    return out[0] if single else out


def unpatchify(tokens, patch: int, side: int) -> np.ndarray:
    x = np.asarray(tokens)
    single = x.ndim == 2
    if single:
        x = x[None]
    b = x.shape[0]
    g = side // patch
    out = x.reshape(b, g, g, patch, patch, 3).transpose(0, 1, 3, 2, 4, 5).reshape(b, side, side, 3)
    return out[0] if single else out


def codec_matrix(patch: int, width: int, seed: int = 0) -> np.ndarray:
    """P with orthonormal columns, shape (3*patch^2, width) when width <= 3*patch^2.

    The first three columns are the per-channel constant directions, so images
    that are constant on every patch survive a round trip exactly. When
    ``width`` exceeds the patch dimension the extra columns are zero, giving an
    exact isometric lift.
    """
    dp = 3 * patch * patch
    k = min(width, dp)
    const = np.zeros((dp, 3))
    for c in range(3):
        const[c::3, c] = 1.0 / patch
    rng = np.random.default_rng(seed)
    basis = np.concatenate([const, rng.standard_normal((dp, max(k - 3, 0)))], axis=1)[:, :max(k, 3)]
    q, r = np.linalg.qr(basis)
    q = q * np.sign(np.diag(r))  # fix QR's sign ambiguity so the constant columns stay positive
    q = q[:, :k]
    if width > dp:
        q = np.concatenate([q, np.zeros((dp, width - dp))], axis=1)
    return q


def canvas_array(canvases, side: int) -> np.ndarray:
    if isinstance(canvases, Canvas):
        canvases = [canvases]
    for c in canvases:
        if c.width != side or c.height != side:
            raise ValueError(f"canvas is {c.width}x{c.height}, model expects {side}x{side}")
    return np.stack([c.rgb for c in canvases])


def encode_target(canvases, P, patch: int, side: int) -> np.ndarray:
    """z1 = patchify(normalize(I)) @ P, shape (B, N, D)."""
    return patchify(normalize(canvas_array(canvases, side)), patch) @ P


def decode_target(z, P, patch: int, side: int) -> list:
    x = np.asarray(z) @ P.T
    if x.ndim == 2:
        x = x[None]
    imgs = denormalize(unpatchify(x, patch, side))
    return [Canvas.from_rgb(im) for im in imgs]
