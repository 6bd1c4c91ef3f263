from .codec import codec_matrix, decode_target, denormalize, encode_target, normalize, patchify, unpatchify
from .config import ConfigError, ModelConfig, miniature_config
from .flow import (
    Batch, LossParts, clip_contrastive_loss, fm_loss, interpolate, kld_loss, target_velocity, total_loss,
)
from .model import (
    PosteriorParams, compress, encode_condition, encode_visual, init_params, posterior, sam_block, sample_z0,
    time_embedding, truncate_tokens, velocity,
)
from .sampler import euler_integrate, guided_velocity, sample, sample_latents
from .train import (
    TrainConfig, TrainingDiverged, TrainResult, load_model, pixel_mse, prepare_batch, save_model, train,
)
