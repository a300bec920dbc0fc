"""Minimal dense-tensor compute layer with gradient support.

Everything the fusion and generation stages need and nothing more:
fixed 3x3 convolution, pointwise math, group/average pooling, nearest
upsampling, per-channel normalization, plus a gradient tape whose
backward passes are verified against central finite differences.
"""

from .gradcheck import grad_check, kink_margin
from .ops import (
    ConvParams,
    abs_,
    add,
    add_const,
    avg_downsample,
    channel_normalize,
    concat_channels,
    conv2d,
    elementwise,
    group_mean,
    log,
    mean_all,
    mul,
    nearest_resample,
    nearest_upsample,
    neg,
    relu,
    scale,
    sigmoid,
    stack_group,
    sub,
    sum_all,
    tanh,
)
from .tape import GradTape
from .tensor import Tensor, load_tensor, save_tensor

__all__ = [
    "ConvParams",
    "GradTape",
    "Tensor",
    "abs_",
    "add",
    "add_const",
    "avg_downsample",
    "channel_normalize",
    "concat_channels",
    "conv2d",
    "elementwise",
    "grad_check",
    "group_mean",
    "kink_margin",
    "load_tensor",
    "log",
    "mean_all",
    "mul",
    "nearest_resample",
    "nearest_upsample",
    "neg",
    "relu",
    "save_tensor",
    "scale",
    "sigmoid",
    "stack_group",
    "sub",
    "sum_all",
    "tanh",
]
