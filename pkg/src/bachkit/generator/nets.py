"""Desk-scale generator and multi-scale discriminator.

Generator: the conditioning feature map is shrunk by the total upsample
factor, projected to the working channel width, then run through
modulated residual blocks with nearest-neighbor upsampling; a final conv
plus tanh produces a 3-channel image in [-1, 1]. No noise enters
anywhere: generation is a pure function of (features, weights).

Discriminator: per scale, the image and its conditioning are channel-
concatenated and pushed through a small conv stack with per-channel
normalization between layers; a terminal sigmoid yields a score map in
(0, 1). Scale s consumes 2^s-times average-downsampled inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..kernel import (
    ConvParams,
    Tensor,
    add,
    avg_downsample,
    channel_normalize,
    concat_channels,
    conv2d,
    nearest_resample,
    nearest_upsample,
    relu,
    sigmoid,
    tanh,
)
from .spade import DEFAULT_EPSILON, SpadeParams, spade_layer

IMAGE_CHANNELS = 3


@dataclass(frozen=True)
class SpadeResBlock:
    """Two modulated convs on the main path plus a skip path; `upsample`
    is applied to the activation before the block runs."""

    spade1: SpadeParams
    conv1: ConvParams
    spade2: SpadeParams
    conv2: ConvParams
    skip: ConvParams | None = None
    upsample: int = 1

    @property
    def in_channels(self) -> int:
        return self.spade1.feature_channels

    @property
    def out_channels(self) -> int:
        return self.conv2.cout

    @classmethod
    def seeded(cls, rng: np.random.Generator, condition_channels: int,
               in_channels: int, out_channels: int, upsample: int = 1,
               scale: float = 0.05) -> "SpadeResBlock":
        return cls(
            spade1=SpadeParams.seeded(rng, condition_channels, in_channels, scale),
            conv1=ConvParams.seeded(rng, in_channels, out_channels, scale),
            spade2=SpadeParams.seeded(rng, condition_channels, out_channels, scale),
            conv2=ConvParams.seeded(rng, out_channels, out_channels, scale),
            skip=None if in_channels == out_channels
            else ConvParams.seeded(rng, in_channels, out_channels, scale),
            upsample=upsample,
        )


@dataclass(frozen=True)
class GeneratorWeights:
    stem: ConvParams  # condition channels -> feature channels
    blocks: tuple[SpadeResBlock, ...]
    head: ConvParams  # feature channels -> 3
    epsilon: float = DEFAULT_EPSILON

    @property
    def condition_channels(self) -> int:
        return self.stem.cin

    @property
    def total_upsample(self) -> int:
        return math.prod(b.upsample for b in self.blocks)

    def tensors(self) -> dict[str, Tensor]:
        out = {"generator.stem.kernel": self.stem.kernel,
               "generator.stem.bias": self.stem.bias}
        for i, blk in enumerate(self.blocks):
            base = f"generator.block{i}"
            parts = {
                f"{base}.spade1.gamma": blk.spade1.gamma_net,
                f"{base}.spade1.beta": blk.spade1.beta_net,
                f"{base}.conv1": blk.conv1,
                f"{base}.spade2.gamma": blk.spade2.gamma_net,
                f"{base}.spade2.beta": blk.spade2.beta_net,
                f"{base}.conv2": blk.conv2,
            }
            if blk.skip is not None:
                parts[f"{base}.skip"] = blk.skip
            for name, cp in parts.items():
                out[f"{name}.kernel"] = cp.kernel
                out[f"{name}.bias"] = cp.bias
        out["generator.head.kernel"] = self.head.kernel
        out["generator.head.bias"] = self.head.bias
        return out


def build_generator(rng: np.random.Generator, condition_channels: int,
                    feature_channels: int = 16,
                    upsample_factors: tuple[int, ...] = (1, 2),
                    scale: float = 0.05) -> GeneratorWeights:
    blocks = tuple(
        SpadeResBlock.seeded(rng, condition_channels, feature_channels,
                             feature_channels, upsample=f, scale=scale)
        for f in upsample_factors
    )
    return GeneratorWeights(
        stem=ConvParams.seeded(rng, condition_channels, feature_channels, scale),
        blocks=blocks,
        head=ConvParams.seeded(rng, feature_channels, IMAGE_CHANNELS, scale),
    )


def _res_block(h: Tensor, condition: Tensor, blk: SpadeResBlock,
               epsilon: float) -> Tensor:
    main = relu(spade_layer(h, condition, blk.spade1, epsilon))
    main = conv2d(main, blk.conv1)
    main = relu(spade_layer(main, condition, blk.spade2, epsilon))
    main = conv2d(main, blk.conv2)
    skip = h if blk.skip is None else conv2d(h, blk.skip)
    return add(main, skip)


def generate(features: Tensor, weights: GeneratorWeights) -> Tensor:
    """Deterministic image in [-1, 1] with features' spatial extents."""
    if features.ndim != 3:
        raise ShapeError(f"features must be HxWxC, got shape {features.shape}")
    if features.shape[2] != weights.condition_channels:
        raise ShapeError(
            f"features have {features.shape[2]} channels, generator expects "
            f"{weights.condition_channels}"
        )
    h_out, w_out = features.shape[0], features.shape[1]
    total = weights.total_upsample
    if h_out % total or w_out % total:
        raise ShapeError(
            f"extents {h_out}x{w_out} not divisible by total upsample {total}"
        )
    h = conv2d(nearest_resample(features, h_out // total, w_out // total),
               weights.stem)
    for blk in weights.blocks:
        if blk.upsample > 1:
            h = nearest_upsample(h, blk.upsample)
        h = _res_block(h, features, blk, weights.epsilon)
    return tanh(conv2d(relu(h), weights.head))


@dataclass(frozen=True)
class DiscriminatorScale:
    convs: tuple[ConvParams, ...]  # first maps image+condition channels


@dataclass(frozen=True)
class DiscriminatorWeights:
    scales: tuple[DiscriminatorScale, ...]
    epsilon: float = DEFAULT_EPSILON

    @property
    def condition_channels(self) -> int:
        return self.scales[0].convs[0].cin - IMAGE_CHANNELS

    def tensors(self) -> dict[str, Tensor]:
        out = {}
        for s, sc in enumerate(self.scales):
            for i, cp in enumerate(sc.convs):
                out[f"discriminator.scale{s}.conv{i}.kernel"] = cp.kernel
                out[f"discriminator.scale{s}.conv{i}.bias"] = cp.bias
        return out


def build_discriminator(rng: np.random.Generator, condition_channels: int,
                        feature_channels: int = 16, n_scales: int = 2,
                        n_layers: int = 3, scale: float = 0.05
                        ) -> DiscriminatorWeights:
    scales = []
    for _ in range(n_scales):
        convs = [ConvParams.seeded(rng, IMAGE_CHANNELS + condition_channels,
                                   feature_channels, scale)]
        for _ in range(n_layers - 2):
            convs.append(ConvParams.seeded(rng, feature_channels,
                                           feature_channels, scale))
        convs.append(ConvParams.seeded(rng, feature_channels, 1, scale))
        scales.append(DiscriminatorScale(tuple(convs)))
    return DiscriminatorWeights(tuple(scales))


def discriminate(image: Tensor, condition: Tensor,
                 weights: DiscriminatorWeights) -> list[Tensor]:
    """Per-scale score maps with values in (0, 1)."""
    if image.ndim != 3 or image.shape[2] != IMAGE_CHANNELS:
        raise ShapeError(f"image must be HxWx3, got shape {image.shape}")
    if image.shape[:2] != condition.shape[:2]:
        raise ShapeError(
            f"image extents {image.shape[:2]} != condition {condition.shape[:2]}"
        )
    score_maps = []
    for s, sc in enumerate(weights.scales):
        factor = 2 ** s
        img_s = image if factor == 1 else avg_downsample(image, factor)
        cond_s = (condition if factor == 1
                  else nearest_resample(condition, condition.shape[0] // factor,
                                        condition.shape[1] // factor))
        x = concat_channels(img_s, cond_s)
        for i, cp in enumerate(sc.convs):
            x = conv2d(x, cp)
            if i < len(sc.convs) - 1:
                x = relu(channel_normalize(x, weights.epsilon)[0])
        score_maps.append(sigmoid(x))
    return score_maps
