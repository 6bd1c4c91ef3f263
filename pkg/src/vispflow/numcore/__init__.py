from . import ops
from .checkpoint import CheckpointError
from .optim import AdamWState, adamw_step, warmup_cosine_lr
from .params import GradCheckReport, ParamSet, finite_diff_check, grad, relative_error, value_and_grad
from .tensor import ContractError, ShapeError, Tensor, as_tensor
from .ops import matmul, softmax_lastdim

__all__ = [
    "AdamWState", "CheckpointError", "ContractError", "GradCheckReport", "ParamSet", "ShapeError",
    "Tensor", "adamw_step", "as_tensor", "finite_diff_check", "grad", "matmul", "ops",
    "relative_error", "softmax_lastdim", "value_and_grad", "warmup_cosine_lr",
]
