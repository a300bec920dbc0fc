"""Spatially-adaptive modulation layer.

The activation is normalized per channel over its spatial positions,
then rescaled and shifted elementwise by modulation maps gamma and beta,
each predicted from the conditioning feature map by its own 3x3 conv.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..kernel import (
    ConvParams,
    Tensor,
    add,
    channel_normalize,
    conv2d,
    mul,
    nearest_resample,
)

DEFAULT_EPSILON = 1e-5


@dataclass(frozen=True)
class SpadeParams:
    """Two independent single-conv modulation nets mapping condition
    channels to the modulated activation's channel count."""

    gamma_net: ConvParams
    beta_net: ConvParams

    def __post_init__(self):
        if (self.gamma_net.cin, self.gamma_net.cout) != (
            self.beta_net.cin, self.beta_net.cout,
        ):
            raise ShapeError("gamma and beta nets must share extents")

    @property
    def condition_channels(self) -> int:
        return self.gamma_net.cin

    @property
    def feature_channels(self) -> int:
        return self.gamma_net.cout

    @classmethod
    def seeded(cls, rng: np.random.Generator, condition_channels: int,
               feature_channels: int, scale: float = 0.05) -> "SpadeParams":
        return cls(
            gamma_net=ConvParams.seeded(rng, condition_channels,
                                        feature_channels, scale),
            beta_net=ConvParams.seeded(rng, condition_channels,
                                       feature_channels, scale),
        )

    @classmethod
    def identity(cls, condition_channels: int, feature_channels: int
                 ) -> "SpadeParams":
        """gamma forced to 1 and beta to 0: the layer reduces to plain
        channel normalization."""
        gamma = ConvParams.zeros(condition_channels, feature_channels)
        gamma.bias.assign(np.ones(feature_channels))
        return cls(gamma_net=gamma,
                   beta_net=ConvParams.zeros(condition_channels,
                                             feature_channels))


def spade_layer(h: Tensor, condition: Tensor, params: SpadeParams,
                epsilon: float = DEFAULT_EPSILON) -> Tensor:
    """normalize(h) * gamma(condition) + beta(condition), elementwise.

    The condition is nearest-resampled to h's spatial extents first.
    """
    if h.ndim != 3:
        raise ShapeError(f"activation must be HxWxC, got shape {h.shape}")
    if h.shape[2] != params.feature_channels:
        raise ShapeError(
            f"modulation nets produce {params.feature_channels} channels, "
            f"activation has {h.shape[2]}"
        )
    if condition.shape[2] != params.condition_channels:
        raise ShapeError(
            f"condition has {condition.shape[2]} channels, modulation nets "
            f"expect {params.condition_channels}"
        )
    cond = nearest_resample(condition, h.shape[0], h.shape[1])
    normalized, _, _ = channel_normalize(h, epsilon)
    gamma = conv2d(cond, params.gamma_net)
    beta = conv2d(cond, params.beta_net)
    return add(mul(normalized, gamma), beta)
