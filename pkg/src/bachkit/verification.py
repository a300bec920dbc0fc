"""Gradient verification battery over the pipeline's building blocks.

Each check compares an analytic gradient against central finite
differences at a seeded point sampled away from ReLU kinks; shared by
the `gradcheck` CLI command and the acceptance suite.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericError
from .fusion import FusionParams, fuse_feature_tensors
from .generator.nets import build_generator, generate
from .generator.spade import SpadeParams, spade_layer
from .kernel import (
    ConvParams,
    Tensor,
    channel_normalize,
    conv2d,
    grad_check,
    kink_margin,
    mul,
    sum_all,
)

KINK_MARGIN = 1e-4
MAX_SAMPLES = 64


def _sample_point(fn: Callable[[Tensor], Tensor],
                  make_point: Callable[[], Tensor]) -> Tensor:
    for _ in range(MAX_SAMPLES):
        point = make_point()
        if kink_margin(fn, point) >= KINK_MARGIN:
            return point
    raise NumericError("could not sample a point bounded away from relu kinks")


def gradient_battery(seed: int = 0, eps: float = 1e-5) -> dict[str, float]:
    """Max relative finite-difference error per building block."""
    rng = np.random.default_rng(seed)
    results: dict[str, float] = {}

    # 3x3 convolution: input and kernel gradients
    conv_params = ConvParams.seeded(rng, 2, 3, scale=0.5)
    x_fixed = Tensor(rng.normal(size=(4, 5, 2)))

    def conv_input_fn(t: Tensor) -> Tensor:
        return sum_all(conv2d(t, conv_params))

    results["conv2d_input"] = grad_check(
        conv_input_fn, Tensor(rng.normal(size=(4, 5, 2))), eps)

    bias_fixed = Tensor(rng.normal(size=3))

    def conv_kernel_fn(k: Tensor) -> Tensor:
        return sum_all(conv2d(x_fixed, ConvParams(k, bias_fixed)))

    results["conv2d_kernel"] = grad_check(
        conv_kernel_fn, Tensor(rng.normal(size=(3, 3, 2, 3))), eps)

    # per-channel normalization with a weighted readout
    readout = Tensor(rng.normal(size=(5, 4, 3)))

    def norm_fn(t: Tensor) -> Tensor:
        return sum_all(mul(channel_normalize(t)[0], readout))

    results["channel_normalize"] = grad_check(
        norm_fn, Tensor(rng.normal(size=(5, 4, 3)) * 2.0), eps)

    # modulation layer, gradients w.r.t. the activation and the condition
    spade_params = SpadeParams.seeded(rng, 2, 3, scale=0.3)
    cond_fixed = Tensor(rng.normal(size=(4, 4, 2)))

    def spade_h_fn(h: Tensor) -> Tensor:
        return sum_all(spade_layer(h, cond_fixed, spade_params))

    results["spade_layer_activation"] = grad_check(
        spade_h_fn, Tensor(rng.normal(size=(4, 4, 3))), eps)

    h_fixed = Tensor(rng.normal(size=(4, 4, 3)))

    def spade_cond_fn(c: Tensor) -> Tensor:
        return sum_all(spade_layer(h_fixed, c, spade_params))

    results["spade_layer_condition"] = grad_check(
        spade_cond_fn, Tensor(rng.normal(size=(4, 4, 2))), eps)

    # fusion block (encoder + pooled retrieved branch + residual refinement)
    fusion = FusionParams.seeded(rng, 3, steps=2, scale=0.3)
    retrieved_fixed = [Tensor(rng.normal(size=(4, 4, 3))) for _ in range(2)]

    def fusion_fn(q: Tensor) -> Tensor:
        return sum_all(fuse_feature_tensors(q, retrieved_fixed, fusion))

    point = _sample_point(fusion_fn,
                          lambda: Tensor(rng.normal(size=(4, 4, 3))))
    results["fusion_block"] = grad_check(fusion_fn, point, eps)

    # composed toy generator (stem, modulated residual blocks, upsample, head)
    gen = build_generator(rng, 3, feature_channels=4,
                          upsample_factors=(1, 2), scale=0.3)

    def gen_fn(f: Tensor) -> Tensor:
        return sum_all(generate(f, gen))

    point = _sample_point(gen_fn, lambda: Tensor(rng.normal(size=(4, 4, 3))))
    results["toy_generator"] = grad_check(gen_fn, point, eps)

    return results
