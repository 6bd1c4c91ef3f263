"""Run configuration: a flat ``key = value`` text file over every tunable default.

Values are typed by their defaults. Tuples are written comma-separated
(``s_min_range = 8,12``). Unknown keys are an error, never ignored.
"""
from __future__ import annotations

import os
import subprocess
from dataclasses import dataclass
from pathlib import Path

from . import __version__


class RunConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Key:
    name: str
    default: object
    group: str
    help: str


_KEYS = [
    Key("seed", 0, "run", "master seed for every random draw in the run"),
    Key("out_dir", "vispflow-out", "run", "output directory for artifacts and the config snapshot"),
    Key("data", "", "run", "comma-separated shard paths; empty means the generated toy dataset"),
    Key("workers", 1, "run", "shard-reading threads"),
    # render
    Key("canvas_side", 64, "render", "canvas side when a render spec gives no size"),
    Key("s_min_range", (8, 12), "render", "range of the minimum font size"),
    Key("s_max_range", (16, 40), "render", "range of the maximum font size"),
    Key("box_frac_range", (0.3, 1.0), "render", "text box side as a fraction of the canvas"),
    Key("shaft_min", 20, "render", "arrow shaft length at magnitude 0 (pixels)"),
    Key("shaft_max", 100, "render", "arrow shaft length at magnitude 1 (pixels)"),
    Key("marker_width_range", (2, 4), "render", "stroke width range for markers without one"),
    # dataset
    Key("toy_pairs", 512, "dataset", "pairs in the generated toy dataset"),
    Key("toy_categories", ("T2I", "TIE"), "dataset", "categories of the toy dataset"),
    Key("tau_split", 0.92, "dataset", "max train-vs-bench cosine similarity after the split"),
    Key("bench_fraction", 0.1, "dataset", "fraction of roots held out for the benchmark"),
    # qc
    Key("tau_ocr", 0.05, "qc", "max character error rate for a rendered instruction"),
    Key("tau_div", 0.9, "qc", "candidates at or above this similarity to a kept one are dropped"),
    Key("score_threshold", 1.0, "qc", "minimum logit confidence score to retain"),
    # model
    Key("image_side", 64, "model", "canvas side seen by the model"),
    Key("patch", 8, "model", "patch side; one latent token per patch"),
    Key("width", 64, "model", "latent width D"),
    Key("enc_width", 96, "model", "encoder width before compression"),
    Key("layers", 2, "model", "modulation blocks"),
    Key("heads", 4, "model", "attention heads"),
    Key("gate_hidden", 64, "model", "hidden units of the gate MLP"),
    Key("time_dim", 128, "model", "sinusoidal time feature size"),
    Key("sigma_min", 1e-3, "model", "flow path noise floor"),
    Key("beta1", 1e-2, "model", "KL weight"),
    Key("beta2", 1.0, "model", "contrastive weight"),
    Key("p_drop", 0.1, "model", "condition dropout probability during training"),
    Key("tau_init", 0.07, "model", "initial contrastive temperature"),
    Key("learn_tau", True, "model", "train the contrastive temperature"),
    Key("codec_seed", 0, "model", "seed of the frozen pixel codec"),
    # sampling
    Key("steps", 50, "sample", "Euler steps"),
    Key("cfg_scale", 7.0, "sample", "classifier-free guidance scale"),
    # train
    Key("train_steps", 2000, "train", "optimizer steps"),
    Key("batch_size", 64, "train", "balanced batch size"),
    Key("lr", 1e-3, "train", "peak learning rate"),
    Key("warmup_steps", 100, "train", "linear warmup steps"),
    Key("min_lr", 0.0, "train", "cosine floor"),
    Key("weight_decay", 0.0, "train", "decoupled weight decay"),
    Key("adam_beta1", 0.9, "train", "Adam first-moment decay"),
    Key("adam_beta2", 0.999, "train", "Adam second-moment decay"),
    Key("adam_eps", 1e-8, "train", "Adam epsilon"),
    Key("ckpt_every", 500, "train", "checkpoint interval in steps (0 disables)"),
    # eval
    Key("aggregate_mode", "mean", "eval", "mean (category mean) or pooled (sample-weighted)"),
    Key("allow_missing", False, "eval", "exclude absent categories instead of failing"),
]
KEYS = {k.name: k for k in _KEYS}
GROUPS = tuple(dict.fromkeys(k.group for k in _KEYS))

MODEL_KEYS = ("image_side", "patch", "width", "enc_width", "layers", "heads", "gate_hidden", "time_dim",
              "sigma_min", "beta1", "beta2", "p_drop", "cfg_scale", "steps", "tau_init", "learn_tau", "codec_seed")
TRAIN_KEYS = {"train_steps": "steps", "batch_size": "batch_size", "lr": "lr", "warmup_steps": "warmup_steps",
              "min_lr": "min_lr", "weight_decay": "weight_decay", "adam_beta1": "adam_beta1",
              "adam_beta2": "adam_beta2", "adam_eps": "adam_eps", "ckpt_every": "ckpt_every"}


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_value(name: str, text: str):
    default = KEYS[name].default
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {text!r}")
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            kind = type(default[0])
            return tuple(kind(x.strip()) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise RunConfigError(f"{name}: {exc}") from exc
    return text


class RunConfig:
    """Every key of ``KEYS``, defaults overridden by a config file and flags."""

    def __init__(self, values: dict = None):
        self._values = {k.name: k.default for k in _KEYS}
        for name, value in (values or {}).items():
            self[name] = value

    def __getitem__(self, name):
        return self._values[name]

    def __setitem__(self, name, value):
        if name not in KEYS:
            raise RunConfigError(f"unknown config key {name!r}")
        if isinstance(value, str) and not isinstance(KEYS[name].default, str):
            value = parse_value(name, value)
        self._values[name] = value

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self._values == other._values

    def items(self):
        return self._values.items()

    @classmethod
    def parse(cls, text: str, source="<config>") -> "RunConfig":
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise RunConfigError(f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in KEYS:
                raise RunConfigError(f"{source}:{lineno}: unknown config key {key!r}")
            cfg[key] = parse_value(key, value)
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.parse(Path(path).read_text(encoding="utf-8"), str(path))

    def dumps(self) -> str:
        out = []
        for group in GROUPS:
            out.append(f"# {group}")
            out.extend(f"{k.name} = {format_value(self[k.name])}" for k in _KEYS if k.group == group)
        return "\n".join(out) + "\n"

    def model_config(self, **overrides):
        from .flowinone import ModelConfig

        d = {k: self[k] for k in MODEL_KEYS}
        d.update(overrides)
        return ModelConfig(**d)

    def train_config(self):
        from .flowinone import TrainConfig

        return TrainConfig(**{field: self[key] for key, field in TRAIN_KEYS.items()})

    def data_sources(self) -> list:
        return [p.strip() for p in self["data"].split(",") if p.strip()]


def keys_for(groups) -> list:
    return [k for k in _KEYS if k.group in groups]


def version_string() -> str:
    """``git describe`` of the source checkout, or the package version outside one."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5, check=True).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        return f"v{__version__}"
    if not out:
        return f"v{__version__}"
    # no tags yet: describe only yields the commit
    return out if out.startswith("v") else f"v{__version__}-g{out}"


def write_snapshot(cfg: RunConfig, out_dir, command: str) -> Path:
    """Echo the effective config, seed and version into ``out_dir``."""
    import json

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.cfg").write_text(cfg.dumps(), encoding="utf-8")
    (out / "run.json").write_text(json.dumps({"command": command, "seed": cfg["seed"],
                                              "version": version_string()}, indent=2) + "\n",
                                  encoding="utf-8")
    return out


def env_threads():
    raw = os.environ.get("VISPFLOW_THREADS", "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise RunConfigError(f"VISPFLOW_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise RunConfigError("VISPFLOW_THREADS must be >= 1")
    return n
