"""The toy network: patch encoder, MLP+MLP compression, Gaussian posterior and the
gated velocity field. Every function takes ``p``, a mapping from parameter
path to Tensor (or a ParamSet, which is turned into constant leaves)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..numcore import ContractError, ParamSet, Tensor, ops
from .codec import codec_matrix
from .config import ModelConfig

# set by the test suite; turns on per-forward invariant assertions
CHECK_INVARIANTS = False


def _leaves(p):
    return p.leaves(requires_grad=False) if isinstance(p, ParamSet) else p


def _normal(rng, shape, scale):
    return rng.standard_normal(shape) * scale


def _add_map(ps, prefix, rng, n_in, n_out, hidden=None, identity=False):
    """A linear map plus a residual GELU refinement whose output layer starts at zero."""
    hidden = hidden or n_out
    if identity and n_in == n_out:
        ps.add(f"{prefix}.w", np.eye(n_in))
    else:
        ps.add(f"{prefix}.w", _normal(rng, (n_in, n_out), 1 / math.sqrt(n_in)))
    ps.add(f"{prefix}.b", np.zeros(n_out))
    ps.add(f"{prefix}.r1", _normal(rng, (n_out, hidden), 1 / math.sqrt(n_out)))
    ps.add(f"{prefix}.c1", np.zeros(hidden))
    ps.add(f"{prefix}.r2", np.zeros((hidden, n_out)))
    ps.add(f"{prefix}.c2", np.zeros(n_out))


def init_params(cfg: ModelConfig, seed: int = 0, identity_compress: bool = True) -> ParamSet:
    rng = np.random.default_rng(seed)
    n, d, de, dp = cfg.tokens, cfg.width, cfg.enc_width, cfg.patch_dim
    ps = ParamSet()
    ps.add("enc.patch.w", _normal(rng, (dp, de), 1 / math.sqrt(dp)))
    ps.add("enc.patch.b", np.zeros(de))
    ps.add("enc.pos", _normal(rng, (n, de), 0.02))
    ps.add("enc.proj.w1", _normal(rng, (de, de), 1 / math.sqrt(de)))
    ps.add("enc.proj.b1", np.zeros(de))
    ps.add("enc.proj.w2", _normal(rng, (de, de), 0.5 / math.sqrt(de)))
    ps.add("enc.proj.b2", np.zeros(de))
    _add_map(ps, "cmp.tok", rng, n, n, identity=identity_compress)
    _add_map(ps, "cmp.feat", rng, de, d, identity=identity_compress)
    ps.add("post.mu.w", _normal(rng, (d, d), 1 / math.sqrt(d)))
    ps.add("post.mu.b", np.zeros(d))
    ps.add("post.logsig.w", _normal(rng, (d, d), 0.1 / math.sqrt(d)))
    ps.add("post.logsig.b", np.zeros(d))
    ps.add("vel.in.w", _normal(rng, (d, d), 1 / math.sqrt(d)))
    ps.add("vel.pos", _normal(rng, (n, d), 0.02))
    ps.add("time.w", _normal(rng, (cfg.time_dim, d), 1 / math.sqrt(cfg.time_dim)))
    ps.add("time.b", np.zeros(d))
    for layer in range(cfg.layers):
        pre = f"blocks.{layer}"
        for name in ("sa.wq", "sa.wk", "sa.wv", "ca.wq", "ca.wk", "ca.wv"):
            ps.add(f"{pre}.{name}", _normal(rng, (d, d), 1 / math.sqrt(d)))
        ps.add(f"{pre}.ln.g", np.ones(d))
        ps.add(f"{pre}.ln.b", np.zeros(d))
        ps.add(f"{pre}.gate.w1", _normal(rng, (2 * d, cfg.gate_hidden), 1 / math.sqrt(2 * d)))
        ps.add(f"{pre}.gate.b1", np.zeros(cfg.gate_hidden))
        ps.add(f"{pre}.gate.w2", _normal(rng, (cfg.gate_hidden, 1), 1 / math.sqrt(cfg.gate_hidden)))
        ps.add(f"{pre}.gate.b2", np.zeros(1))
    ps.add("vel.out.w", _normal(rng, (d, d), 1 / math.sqrt(d)))
    ps.add("vel.out.b", np.zeros(d))
    ps.add("clip.log_tau", np.array(math.log(cfg.tau_init)), trainable=cfg.learn_tau)
    ps.add("codec.P", codec_matrix(cfg.patch, d, cfg.codec_seed), trainable=False)
    return ps


# -- encoder side ----------------------------------------------------------

def mlp_map(p, prefix, x):
    lin = x @ p[f"{prefix}.w"] + p[f"{prefix}.b"]
    return lin + ops.gelu(lin @ p[f"{prefix}.r1"] + p[f"{prefix}.c1"]) @ p[f"{prefix}.r2"] + p[f"{prefix}.c2"]


def encode_visual(p, cfg: ModelConfig, patches) -> Tensor:
    """Normalised patches (B, N_enc, 3*patch^2) -> X_fuse (B, N_enc, D_enc)."""
    p = _leaves(p)
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape[-2:] != (cfg.tokens, cfg.patch_dim):
        raise ValueError(f"expected patches of shape (..., {cfg.tokens}, {cfg.patch_dim}), got {patches.shape}")
    h = Tensor(patches) @ p["enc.patch.w"] + p["enc.patch.b"] + p["enc.pos"]
    return h + ops.gelu(h @ p["enc.proj.w1"] + p["enc.proj.b1"]) @ p["enc.proj.w2"] + p["enc.proj.b2"]


def compress(p, x_fuse) -> Tensor:
    """Token-axis map N_enc -> N, then feature map D_enc -> D."""
    p = _leaves(p)
    xt = ops.swapaxes(x_fuse, -1, -2)
    tok = ops.swapaxes(mlp_map(p, "cmp.tok", xt), -1, -2)
    return mlp_map(p, "cmp.feat", tok)


def truncate_tokens(x_fuse, n_tokens: int, width: int) -> np.ndarray:
    """Baseline alternative to ``compress``: keep the first tokens and channels."""
    x = x_fuse.data if isinstance(x_fuse, Tensor) else np.asarray(x_fuse)
    return x[..., :n_tokens, :width].copy()


@dataclass
class PosteriorParams:
    mu: Tensor
    log_sigma: Tensor

    @property
    def sigma(self):
        return ops.exp(self.log_sigma)


def posterior(p, x_comp) -> PosteriorParams:
    p = _leaves(p)
    return PosteriorParams(x_comp @ p["post.mu.w"] + p["post.mu.b"],
                           x_comp @ p["post.logsig.w"] + p["post.logsig.b"])


def sample_z0(post: PosteriorParams, rng=None, eps=None) -> Tensor:
    """z0 = mu + sigma * eps. ``rng=None`` and ``eps=None`` selects the deterministic mode."""
    if eps is None:
        if rng is None:
            return post.mu
        eps = rng.standard_normal(post.mu.shape)
    return post.mu + post.sigma * Tensor(eps)


# -- velocity field --------------------------------------------------------

def time_features(t, dim: int) -> np.ndarray:
    """Sinusoidal features of 1000*t: first half sines, second half cosines."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    args = 1000.0 * t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


def time_embedding(p, cfg: ModelConfig, t) -> Tensor:
    p = _leaves(p)
    return Tensor(time_features(t, cfg.time_dim)) @ p["time.w"] + p["time.b"]


def attention(q_in, kv_in, wq, wk, wv, heads: int) -> Tensor:
    b, n, d = q_in.shape
    m = kv_in.shape[1]
    dk = d // heads
    q = ops.transpose(ops.reshape(q_in @ wq, (b, n, heads, dk)), (0, 2, 1, 3))
    k = ops.transpose(ops.reshape(kv_in @ wk, (b, m, heads, dk)), (0, 2, 1, 3))
    v = ops.transpose(ops.reshape(kv_in @ wv, (b, m, heads, dk)), (0, 2, 1, 3))
    weights = ops.softmax_lastdim((q @ ops.swapaxes(k, -1, -2)) * (1.0 / math.sqrt(dk)))
    out = ops.transpose(weights @ v, (0, 2, 1, 3))
    return ops.reshape(out, (b, n, d))


def gate(p, prefix, h_tilde, delta) -> Tensor:
    """Per-token weights in [0, 1], shape (B, N, 1)."""
    cat = ops.concat([h_tilde, delta], axis=-1)
    hidden = ops.gelu(cat @ p[f"{prefix}.gate.w1"] + p[f"{prefix}.gate.b1"])
    return ops.sigmoid(hidden @ p[f"{prefix}.gate.w2"] + p[f"{prefix}.gate.b2"])


def sam_block(p, cfg: ModelConfig, layer: int, h, z_src, i_edit, t_emb=None, excise=False) -> Tensor:
    """One modulation block over a batch (B, N, D).

    ``i_edit`` is a 0/1 array of length B. Rows with indicator 0 get H~ exactly;
    ``excise=True`` drops the cross-attention and gate branches altogether.
    """
    p = _leaves(p)
    pre = f"blocks.{layer}"
    b = h.shape[0]
    i_edit = np.broadcast_to(np.asarray(i_edit, dtype=np.int64).reshape(-1), (b,))
    if not np.isin(i_edit, (0, 1)).all():
        raise ContractError("I_edit must be 0 or 1")
    if t_emb is not None:
        h = h + ops.reshape(t_emb, (t_emb.shape[0], 1, t_emb.shape[-1]))
    sa = attention(h, h, p[f"{pre}.sa.wq"], p[f"{pre}.sa.wk"], p[f"{pre}.sa.wv"], cfg.heads)
    h_tilde = ops.layer_norm(h + sa, p[f"{pre}.ln.g"], p[f"{pre}.ln.b"])
    if excise or not i_edit.any():
        return h_tilde
    if z_src is None:
        raise ContractError("I_edit=1 requires a source latent z_src")
    z_src = z_src if isinstance(z_src, Tensor) else Tensor(np.asarray(z_src, dtype=np.float64))
    delta = attention(h_tilde, z_src, p[f"{pre}.ca.wq"], p[f"{pre}.ca.wk"], p[f"{pre}.ca.wv"], cfg.heads)
    lam = gate(p, pre, h_tilde, delta)
    if CHECK_INVARIANTS:
        # NaN is left to the trainer's divergence check
        assert not np.any((lam.data < 0) | (lam.data > 1)), "gate left [0, 1]"
    modulated = h_tilde + lam * delta
    return ops.where(i_edit.reshape(b, 1, 1) == 1, modulated, h_tilde)


def velocity(p, cfg: ModelConfig, z_t, t, z_src=None, i_edit=0, excise=False) -> Tensor:
    """v(z_t, t | z_src, I_edit) for a batch: z_t (B, N, D), t scalar or (B,)."""
    p = _leaves(p)
    z_t = z_t if isinstance(z_t, Tensor) else Tensor(np.asarray(z_t, dtype=np.float64))
    b = z_t.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (b,))
    if np.any((t < 0) | (t > 1)):
        raise ValueError("t must lie in [0, 1]")
    t_emb = time_embedding(p, cfg, t)
    h = z_t @ p["vel.in.w"] + p["vel.pos"]
    for layer in range(cfg.layers):
        h = sam_block(p, cfg, layer, h, z_src, i_edit, t_emb, excise)
    return h @ p["vel.out.w"] + p["vel.out.b"]


def encode_condition(p, cfg: ModelConfig, patches, rng=None, eps=None):
    """Input patches -> (posterior, z0)."""
    post = posterior(p, compress(p, encode_visual(p, cfg, patches)))
    return post, sample_z0(post, rng, eps)
