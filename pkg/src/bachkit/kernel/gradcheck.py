"""Finite-difference verification of the analytic backward passes."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ParamError, ShapeError
from .tape import GradTape
from .tensor import Tensor

EPS_MIN, EPS_MAX = 1e-7, 1e-3


def grad_check(
    scalar_fn: Callable[[Tensor], Tensor],
    point: Tensor,
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    `scalar_fn` must be composed of kernel ops and return a scalar tensor.
    Per coordinate the error is |analytic - central| / max(|analytic|,
    |central|, 1e-8); the maximum over all coordinates is returned.
    """
    if not (EPS_MIN <= eps <= EPS_MAX):
        raise ParamError(f"eps must lie in [{EPS_MIN}, {EPS_MAX}], got {eps}")

    with GradTape() as tape:
        out = scalar_fn(point)
        if out.size != 1:
            raise ShapeError(f"scalar_fn returned shape {out.shape}")
        analytic = tape.gradients(out, [point])[0]

    flat = point.data.reshape(-1)
    fd = np.empty_like(flat)
    for i in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += eps
        minus[i] -= eps
        f_plus = scalar_fn(Tensor(plus.reshape(point.shape))).item()
        f_minus = scalar_fn(Tensor(minus.reshape(point.shape))).item()
        fd[i] = (f_plus - f_minus) / (2.0 * eps)

    a = analytic.reshape(-1)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(fd)), 1e-8)
    return float(np.max(np.abs(a - fd) / denom))


def kink_margin(scalar_fn: Callable[[Tensor], Tensor], point: Tensor) -> float:
    """Smallest |pre-activation| any kinked op (relu/abs) sees at `point`.

    Sampled test points with a margin below ~1e-4 should be rejected:
    central differences straddle the kink there and disagree with the
    (one-sided) analytic gradient for spurious reasons.
    """
    with GradTape() as tape:
        scalar_fn(point)
        return tape.min_kink_margin()
