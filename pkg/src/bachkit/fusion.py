"""Foreground/background label-map composition and the background
fusion network.

A composed map stacks background channels first, then foreground. The
fusion network encodes the padded query and every retrieved composed map
with one shared 3x3 conv + ReLU, averages the retrieved encodings, adds
the query encoding, and then applies T residual refinement steps with a
second 3x3 conv + ReLU. The output feature map keeps H x W and the full
C_o + C_b channel depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FusionError, ShapeError
from .kernel import (
    ConvParams,
    Tensor,
    add,
    conv2d,
    group_mean,
    relu,
    stack_group,
)
from .layout import LabelMap, Taxonomy

DEFAULT_REFINE_STEPS = 3


@dataclass(frozen=True, eq=False)
class ComposedLabelMap:
    """Channel concatenation [background ; foreground] over one canvas."""

    data: np.ndarray
    background_channels: tuple[int, ...]
    foreground_channels: tuple[int, ...]

    def __post_init__(self):
        arr = np.asarray(self.data)
        expected = len(self.background_channels) + len(self.foreground_channels)
        if arr.ndim != 3 or arr.shape[2] != expected:
            raise ShapeError(
                f"composed map shape {arr.shape} does not hold {expected} channels"
            )
        arr = arr.astype(np.int32, copy=False)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def n_channels(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> tuple[int, ...]:
        return self.background_channels + self.foreground_channels

    def background_block(self) -> LabelMap:
        n_bg = len(self.background_channels)
        return LabelMap(self.data[:, :, :n_bg], self.background_channels)

    def foreground_block(self) -> LabelMap:
        n_bg = len(self.background_channels)
        return LabelMap(self.data[:, :, n_bg:], self.foreground_channels)

    def to_tensor(self, dtype=np.float64) -> Tensor:
        return Tensor(self.data.astype(dtype))


def compose_label_map(background: LabelMap, foreground: LabelMap
                      ) -> ComposedLabelMap:
    """Stack [background ; foreground] along channels."""
    if (background.height, background.width) != (foreground.height,
                                                 foreground.width):
        raise ShapeError(
            f"extent mismatch: background {background.data.shape[:2]} vs "
            f"foreground {foreground.data.shape[:2]}"
        )
    return ComposedLabelMap(
        data=np.concatenate([background.data, foreground.data], axis=2),
        background_channels=background.channels,
        foreground_channels=foreground.channels,
    )


def pad_query(foreground: LabelMap, taxonomy: Taxonomy) -> ComposedLabelMap:
    """Compose the query with an all-zero background block."""
    zeros = LabelMap(
        np.zeros((foreground.height, foreground.width, taxonomy.n_background),
                 dtype=np.int32),
        taxonomy.background_ids,
    )
    return compose_label_map(zeros, foreground)


@dataclass(frozen=True)
class FusionParams:
    """Weights of the fusion network: `encoder` maps composed label maps
    to features, `refiner` runs the residual refinement; both are 3x3
    convs with C_o + C_b filters. `steps` is the refinement count T."""

    encoder: ConvParams
    refiner: ConvParams
    steps: int = DEFAULT_REFINE_STEPS

    def __post_init__(self):
        k = self.encoder.cin
        if self.encoder.cout != k or self.refiner.cin != k or self.refiner.cout != k:
            raise ShapeError(
                "fusion convs must map k->k channels with k = C_o + C_b; got "
                f"encoder {self.encoder.cin}->{self.encoder.cout}, "
                f"refiner {self.refiner.cin}->{self.refiner.cout}"
            )
        if self.steps < 0:
            raise ShapeError(f"refinement step count must be >= 0, got {self.steps}")

    @property
    def channels(self) -> int:
        return self.encoder.cin

    @classmethod
    def seeded(cls, rng: np.random.Generator, channels: int,
               steps: int = DEFAULT_REFINE_STEPS, scale: float = 0.05
               ) -> "FusionParams":
        return cls(
            encoder=ConvParams.seeded(rng, channels, channels, scale),
            refiner=ConvParams.seeded(rng, channels, channels, scale),
            steps=steps,
        )

    def tensors(self) -> dict[str, Tensor]:
        return {
            "fusion.encoder.kernel": self.encoder.kernel,
            "fusion.encoder.bias": self.encoder.bias,
            "fusion.refiner.kernel": self.refiner.kernel,
            "fusion.refiner.bias": self.refiner.bias,
        }


def fuse_feature_tensors(query: Tensor, retrieved: Sequence[Tensor],
                         params: FusionParams) -> Tensor:
    """Fusion on raw tensors: encode everything with the shared conv+ReLU,
    average the retrieved encodings, add the query encoding, then refine
    residually for `params.steps` rounds."""
    if len(retrieved) == 0:
        raise FusionError("fusion needs at least one retrieved map")

    def encode(t: Tensor) -> Tensor:
        return relu(conv2d(t, params.encoder))

    pooled = group_mean(stack_group([encode(r) for r in retrieved]))
    features = add(encode(query), pooled)
    for _ in range(params.steps):
        features = add(features, relu(conv2d(features, params.refiner)))
    return features


def fuse_background(query: ComposedLabelMap,
                    retrieved: Sequence[ComposedLabelMap],
                    params: FusionParams) -> Tensor:
    """Fused feature map from the padded query and m retrieved composed
    maps; keeps H x W and the full C_o + C_b channel depth."""
    if len(retrieved) == 0:
        raise FusionError("fusion needs at least one retrieved map")
    extents = (query.height, query.width)
    for r in retrieved:
        if (r.height, r.width) != extents:
            raise ShapeError(
                f"retrieved map extents {(r.height, r.width)} != query {extents}"
            )
        if r.channels != query.channels:
            raise FusionError("retrieved map channel layout differs from query")
    if query.n_channels != params.channels:
        raise ShapeError(
            f"composed maps have {query.n_channels} channels, fusion params "
            f"expect {params.channels}"
        )
    return fuse_feature_tensors(query.to_tensor(),
                                [r.to_tensor() for r in retrieved], params)
