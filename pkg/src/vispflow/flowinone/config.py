from __future__ import annotations

from dataclasses import asdict, dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    image_side: int = 64
    patch: int = 8
    width: int = 64          # D, latent width
    enc_width: int = 96      # D_enc, encoder width before compression
    layers: int = 2
    heads: int = 4
    gate_hidden: int = 64
    time_dim: int = 128
    sigma_min: float = 1e-3
    beta1: float = 1e-2
    beta2: float = 1.0
    p_drop: float = 0.1
    cfg_scale: float = 7.0
    steps: int = 50
    tau_init: float = 0.07
    learn_tau: bool = True
    codec_seed: int = 0

    def __post_init__(self):
        if self.image_side < 1 or self.patch < 1 or self.image_side % self.patch:
            raise ConfigError(f"patch {self.patch} must divide image side {self.image_side}")
        if self.width < 1 or self.heads < 1 or self.width % self.heads:
            raise ConfigError(f"width {self.width} must be divisible by heads {self.heads}")
        if self.time_dim % 2:
            raise ConfigError("time_dim must be even")
        if not 0.0 <= self.sigma_min < 1.0:
            raise ConfigError("sigma_min must lie in [0, 1)")
        if self.beta1 < 0 or self.beta2 < 0:
            raise ConfigError("loss weights must be non-negative")
        if not 0.0 <= self.p_drop <= 1.0:
            raise ConfigError("p_drop must lie in [0, 1]")
        if self.steps < 1:
            raise ConfigError("sampler steps must be >= 1")
        if self.tau_init <= 0:
            raise ConfigError("tau_init must be positive")

    @property
    def tokens(self) -> int:
        """N: one latent token per patch."""
        return (self.image_side // self.patch) ** 2

    @property
    def patch_dim(self) -> int:
        return 3 * self.patch * self.patch

    @property
    def head_dim(self) -> int:
        return self.width // self.heads

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def miniature_config(**overrides) -> ModelConfig:
    """N=4, D=8, one layer: small enough for element-wise gradient checks."""
    base = dict(image_side=8, patch=4, width=8, enc_width=12, layers=1, heads=2, gate_hidden=6, time_dim=16)
    base.update(overrides)
    return ModelConfig(**base)
