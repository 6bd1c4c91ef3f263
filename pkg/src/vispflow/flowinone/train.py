from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..dataset import BalancedSampler, load_records
from ..numcore import AdamWState, ParamSet, adamw_step, value_and_grad, warmup_cosine_lr
from ..numcore import checkpoint as ckpt
from .codec import canvas_array, encode_target, normalize, patchify
from .config import ModelConfig
from .flow import Batch, total_loss
from .model import init_params

log = logging.getLogger(__name__)

LOSS_COLUMNS = ("step", "fm", "kld", "clip", "total", "lr")
MODEL_SIDECAR = "model.json"


class TrainingDiverged(ArithmeticError):
    def __init__(self, step, components):
        super().__init__(f"non-finite loss at step {step}: {components}")
        self.step = step
        self.components = components


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_size: int = 64
    lr: float = 1e-3
    warmup_steps: int = 100
    min_lr: float = 0.0
    weight_decay: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    ckpt_every: int = 500


@dataclass
class TrainResult:
    params: ParamSet
    rows: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)


def prepare_batch(records, cfg: ModelConfig, P) -> Batch:
    inputs = [r.input for r in records]
    patches = patchify(normalize(canvas_array(inputs, cfg.image_side)), cfg.patch)
    z1 = encode_target([r.target for r in records], P, cfg.patch, cfg.image_side)
    i_edit = np.array([r.i_edit for r in records], dtype=np.int64)
    z_src = encode_target(inputs, P, cfg.patch, cfg.image_side) * i_edit.reshape(-1, 1, 1)
    return Batch(patches, z1, z_src, i_edit)


def drop_conditions(batch: Batch, p_drop: float, rng) -> Batch:
    """Null (z_src, I_edit) per example with probability ``p_drop``."""
    keep = rng.uniform(size=len(batch)) >= p_drop
    return Batch(batch.patches, batch.z1, batch.z_src * keep.reshape(-1, 1, 1), batch.i_edit * keep)


def trainable_flags(cfg: ModelConfig):
    return {"codec.P": False, "clip.log_tau": cfg.learn_tau}


def save_model(params: ParamSet, cfg: ModelConfig, path):
    path = Path(path)
    ckpt.save(params, path)
    sidecar = path.parent / MODEL_SIDECAR
    if not sidecar.exists():
        sidecar.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def load_model(path, cfg: ModelConfig = None):
    path = Path(path)
    if cfg is None:
        sidecar = path.parent / MODEL_SIDECAR
        if not sidecar.exists():
            raise FileNotFoundError(f"no {MODEL_SIDECAR} next to {path}; pass a model config")
        cfg = ModelConfig.from_dict(json.loads(sidecar.read_text()))
    params = ckpt.load(path, trainable_flags(cfg))
    expected = init_params(cfg, 0)
    for name, value in expected.items():
        if name not in params or params[name].shape != value.shape:
            raise ckpt.CheckpointError(f"checkpoint does not match the model config at {name}")
    return params, cfg


def _format_row(row):
    return ",".join(str(row["step"]) if k == "step" else repr(float(row[k])) for k in LOSS_COLUMNS)


def train(data, cfg: ModelConfig, tcfg: TrainConfig = TrainConfig(), seed: int = 0, out_dir=None,
          params: ParamSet = None, workers: int = 1) -> TrainResult:
    """Balanced batches -> total loss -> gradients -> AdamW, ``tcfg.steps`` times.

    With ``out_dir`` set, writes ``loss.csv``, ``ckpt_000000.vpw`` (the untrained
    weights), a checkpoint every ``ckpt_every`` steps, and ``model.vpw`` at the end.
    """
    records = load_records(data, workers=workers)
    if not records:
        raise ValueError("training needs a non-empty dataset")
    params = params.copy() if params is not None else init_params(cfg, seed)
    data_all = prepare_batch(records, cfg, params["codec.P"])
    sampler = BalancedSampler(records, tcfg.batch_size, seed)
    rng = np.random.default_rng(seed)
    state = AdamWState()
    result = TrainResult(params)

    out = Path(out_dir) if out_dir is not None else None
    csv = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        csv = open(out / "loss.csv", "w", encoding="utf-8", newline="\n")
        csv.write(",".join(LOSS_COLUMNS) + "\n")
        first = out / "ckpt_000000.vpw"
        save_model(params, cfg, first)
        result.checkpoints.append(str(first))
    try:
        for step in range(tcfg.steps):
            lr = warmup_cosine_lr(step, tcfg.lr, tcfg.warmup_steps, tcfg.steps, tcfg.min_lr)
            batch = drop_conditions(data_all.take(sampler.next_indices()), cfg.p_drop, rng)
            t = rng.uniform(0.0, 1.0, size=len(batch))
            eps = rng.standard_normal((len(batch), cfg.tokens, cfg.width))
            parts = {}

            def loss_fn(p):
                lp = total_loss(p, cfg, batch, t=t, eps=eps)
                parts["lp"] = lp
                return lp.total

            _, grads = value_and_grad(loss_fn, params)
            row = {"step": step + 1, **parts["lp"].as_row(), "lr": lr}
            if not all(np.isfinite(row[k]) for k in ("fm", "kld", "clip", "total")):
                raise TrainingDiverged(step + 1, {k: row[k] for k in ("fm", "kld", "clip", "total")})
            adamw_step(params, grads, state, lr, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps,
                       tcfg.weight_decay)
            result.rows.append(row)
            if csv is not None:
                csv.write(_format_row(row) + "\n")
                if tcfg.ckpt_every and (step + 1) % tcfg.ckpt_every == 0:
                    path = out / f"ckpt_{step + 1:06d}.vpw"
                    save_model(params, cfg, path)
                    result.checkpoints.append(str(path))
            if (step + 1) % 100 == 0:
                log.info("step %d total %.4f fm %.4f clip %.4f", step + 1, row["total"], row["fm"], row["clip"])
    finally:
        if csv is not None:
            csv.close()
    if out is not None:
        final = out / "model.vpw"
        save_model(params, cfg, final)
        result.checkpoints.append(str(final))
        (out / "train.json").write_text(json.dumps(
            {"model": cfg.to_dict(), "train": asdict(tcfg), "seed": seed, "records": len(records),
             "epochs": [asdict(e) for e in sampler.epochs[:1000]]}, indent=2, sort_keys=True) + "\n")
    return result


def pixel_mse(a, b) -> float:
    """Mean squared error over RGB channels of two canvas lists, in 0..255 units."""
    x = np.stack([c.rgb for c in a]).astype(np.float64)
    y = np.stack([c.rgb for c in b]).astype(np.float64)
    return float(np.mean((x - y) ** 2))
