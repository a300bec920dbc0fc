"""Kernel ops: 3x3 convolution, pointwise math, pooling, upsampling and
per-channel normalization, each with an analytic backward pass.

Ops are pure functions over immutable tensors; when a GradTape is active
on the calling thread they additionally append a backward record to it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import NumericError, ParamError, ShapeError
from .tape import active_tape
from .tensor import Tensor, _result

KERNEL_SIZE = 3  # fixed 3x3, stride 1, zero padding 1


@dataclass(frozen=True)
class ConvParams:
    """Weights of one 3x3 convolution: kernel (3, 3, cin, cout), bias (cout,)."""

    kernel: Tensor
    bias: Tensor

    def __post_init__(self):
        ks = self.kernel.shape
        if len(ks) != 4 or ks[0] != KERNEL_SIZE or ks[1] != KERNEL_SIZE:
            raise ShapeError(f"kernel must be 3x3xCinxCout, got {ks}")
        if self.bias.shape != (ks[3],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match cout={ks[3]}"
            )

    @property
    def cin(self) -> int:
        return self.kernel.shape[2]

    @property
    def cout(self) -> int:
        return self.kernel.shape[3]

    @classmethod
    def seeded(cls, rng: np.random.Generator, cin: int, cout: int,
               scale: float = 0.05, dtype=np.float64) -> "ConvParams":
        """Deterministic uniform init in [-scale, scale]."""
        k = rng.uniform(-scale, scale, size=(KERNEL_SIZE, KERNEL_SIZE, cin, cout))
        b = rng.uniform(-scale, scale, size=(cout,))
        return cls(Tensor(k, dtype=dtype), Tensor(b, dtype=dtype))

    @classmethod
    def zeros(cls, cin: int, cout: int, dtype=np.float64) -> "ConvParams":
        return cls(
            Tensor(np.zeros((KERNEL_SIZE, KERNEL_SIZE, cin, cout)), dtype=dtype),
            Tensor(np.zeros(cout), dtype=dtype),
        )

    def tensors(self) -> list[Tensor]:
        return [self.kernel, self.bias]


def _emit(op, inputs, out_arr, backward) -> Tensor:
    out = _result(out_arr)
    tape = active_tape()
    if tape is not None:
        tape.record(op, inputs, out, backward)
    return out


def _require_hwc(x: Tensor, op: str) -> None:
    if x.ndim != 3:
        raise ShapeError(f"{op} expects an HxWxC tensor, got shape {x.shape}")


# ---------------------------------------------------------------------------
# convolution


def _windows(xpad: np.ndarray) -> np.ndarray:
    # (H, W, C, 3, 3) view over the zero-padded input
    return sliding_window_view(xpad, (KERNEL_SIZE, KERNEL_SIZE), axis=(0, 1))


def conv2d(x: Tensor, params: ConvParams) -> Tensor:
    """3x3 convolution, stride 1, zero padding 1; output keeps HxW."""
    _require_hwc(x, "conv2d")
    if x.shape[2] != params.cin:
        raise ShapeError(
            f"conv2d input has {x.shape[2]} channels, kernel expects {params.cin}"
        )
    xpad = np.pad(x.data, ((1, 1), (1, 1), (0, 0)))
    win = _windows(xpad)
    k, b = params.kernel, params.bias
    out = np.einsum("hwcuv,uvco->hwo", win, k.data, optimize=True) + b.data

    def backward(g: np.ndarray):
        dk = np.einsum("hwcuv,hwo->uvco", win, g, optimize=True)
        db = g.sum(axis=(0, 1))
        # input gradient = correlation of g with the spatially flipped,
        # channel-transposed kernel
        kt = k.data[::-1, ::-1].transpose(0, 1, 3, 2)
        gpad = np.pad(g, ((1, 1), (1, 1), (0, 0)))
        dx = np.einsum("hwcuv,uvco->hwo", _windows(gpad), kt, optimize=True)
        return dx, dk, db

    return _emit("conv2d", (x, k, b), out, backward)


# ---------------------------------------------------------------------------
# pointwise ops


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _emit("relu", (x,), np.where(mask, x.data, 0.0), lambda g: (g * mask,))


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "add")
    return _emit("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "sub")
    return _emit("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_shapes(a, b, "mul")
    return _emit("mul", (a, b), a.data * b.data, lambda g: (g * b.data, g * a.data))


def neg(x: Tensor) -> Tensor:
    return _emit("neg", (x,), -x.data, lambda g: (-g,))


def abs_(x: Tensor) -> Tensor:
    return _emit("abs", (x,), np.abs(x.data), lambda g: (g * np.sign(x.data),))


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _emit("scale", (x,), x.data * c, lambda g: (g * c,))


def add_const(x: Tensor, c: float) -> Tensor:
    return _emit("add_const", (x,), x.data + float(c), lambda g: (g,))


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))
    return _emit("sigmoid", (x,), s, lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _emit("tanh", (x,), t, lambda g: (g * (1.0 - t * t),))


def log(x: Tensor) -> Tensor:
    if (x.data <= 0).any():
        raise NumericError("log requires strictly positive inputs")
    return _emit("log", (x,), np.log(x.data), lambda g: (g / x.data,))


def elementwise(op: str, a: Tensor, b: Tensor | None = None) -> Tensor:
    """Dispatcher for the basic pointwise ops: relu | add | mul."""
    if op == "relu":
        if b is not None:
            raise ParamError("relu is unary")
        return relu(a)
    if b is None:
        raise ParamError(f"{op} needs two operands")
    if op == "add":
        return add(a, b)
    if op == "mul":
        return mul(a, b)
    raise ParamError(f"unknown elementwise op {op!r}")


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op} operand shapes differ: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# reductions


def sum_all(x: Tensor) -> Tensor:
    def backward(g: np.ndarray):
        return (np.full(x.shape, float(g), dtype=x.dtype),)

    return _emit("sum_all", (x,), np.asarray(x.data.sum()), backward)


def mean_all(x: Tensor) -> Tensor:
    n = x.size

    def backward(g: np.ndarray):
        return (np.full(x.shape, float(g) / n, dtype=x.dtype),)

    return _emit("mean_all", (x,), np.asarray(x.data.mean()), backward)


def stack_group(slices: Sequence[Tensor]) -> Tensor:
    """Stack HxWxC tensors along a new leading group axis."""
    if len(slices) == 0:
        raise ParamError("empty group")
    shapes = {s.shape for s in slices}
    if len(shapes) != 1:
        raise ShapeError(f"group slices disagree on shape: {sorted(shapes)}")
    out = np.stack([s.data for s in slices], axis=0)

    def backward(g: np.ndarray):
        return tuple(g[i] for i in range(len(slices)))

    return _emit("stack_group", tuple(slices), out, backward)


def group_mean(x: Tensor) -> Tensor:
    """Mean across the leading group axis of an m x H x W x C tensor.

    Summation runs in a canonical order (per-element offsets from the
    group minimum, sorted ascending), so the result is exactly invariant
    under permuting the group axis, and a group of m identical slices
    returns that slice bit-for-bit.
    """
    if x.ndim != 4:
        raise ShapeError(f"group_mean expects m x H x W x C, got {x.shape}")
    m = x.shape[0]
    lo = x.data.min(axis=0)
    deltas = np.sort(x.data - lo, axis=0)
    out = lo + deltas.sum(axis=0) / m

    def backward(g: np.ndarray):
        return (np.broadcast_to(g / m, x.shape).copy(),)

    return _emit("group_mean", (x,), out, backward)


# ---------------------------------------------------------------------------
# resampling


def nearest_upsample(x: Tensor, factor: int) -> Tensor:
    """Replicate each source pixel into a factor x factor block."""
    _require_hwc(x, "nearest_upsample")
    if not isinstance(factor, int) or factor < 1:
        raise ParamError(f"upsample factor must be a positive integer, got {factor}")
    f = factor
    out = np.repeat(np.repeat(x.data, f, axis=0), f, axis=1)
    h, w, c = x.shape

    def backward(g: np.ndarray):
        return (g.reshape(h, f, w, f, c).sum(axis=(1, 3)),)

    return _emit("nearest_upsample", (x,), out, backward)


def nearest_resample(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Nearest-neighbor resample to (out_h, out_w); the target extents must
    be integer multiples or divisors of the source (block-origin sampling
    when shrinking, so upsample-then-downsample is the identity)."""
    _require_hwc(x, "nearest_resample")
    h, w, c = x.shape
    if (out_h, out_w) == (h, w):
        return x
    if out_h % h == 0 and out_w % w == 0 and out_h // h == out_w // w:
        return nearest_upsample(x, out_h // h)
    if h % out_h == 0 and w % out_w == 0 and h // out_h == w // out_w:
        f = h // out_h
        out = x.data[::f, ::f, :]

        def backward(g: np.ndarray):
            dx = np.zeros(x.shape, dtype=x.dtype)
            dx[::f, ::f, :] = g
            return (dx,)

        return _emit("nearest_resample", (x,), out, backward)
    raise ShapeError(
        f"nearest_resample {h}x{w} -> {out_h}x{out_w} is not an integer factor"
    )


def avg_downsample(x: Tensor, factor: int = 2) -> Tensor:
    """Average-pool non-overlapping factor x factor blocks."""
    _require_hwc(x, "avg_downsample")
    if not isinstance(factor, int) or factor < 1:
        raise ParamError(f"downsample factor must be a positive integer, got {factor}")
    h, w, c = x.shape
    f = factor
    if h % f or w % f:
        raise ShapeError(f"extents {h}x{w} not divisible by factor {f}")
    out = x.data.reshape(h // f, f, w // f, f, c).mean(axis=(1, 3))

    def backward(g: np.ndarray):
        up = np.repeat(np.repeat(g, f, axis=0), f, axis=1)
        return (up / (f * f),)

    return _emit("avg_downsample", (x,), out, backward)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    _require_hwc(a, "concat_channels")
    _require_hwc(b, "concat_channels")
    if a.shape[:2] != b.shape[:2]:
        raise ShapeError(f"spatial extents differ: {a.shape[:2]} vs {b.shape[:2]}")
    ca = a.shape[2]
    out = np.concatenate([a.data, b.data], axis=2)

    def backward(g: np.ndarray):
        return g[:, :, :ca], g[:, :, ca:]

    return _emit("concat_channels", (a, b), out, backward)


# ---------------------------------------------------------------------------
# normalization


def channel_normalize(
    x: Tensor, epsilon: float = 1e-5
) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Normalize each channel over all its spatial positions.

    Returns (normalized, per-channel mean, per-channel variance); the
    variance is the population variance, and epsilon keeps constant
    channels finite.
    """
    _require_hwc(x, "channel_normalize")
    if epsilon <= 0:
        raise ParamError(f"epsilon must be positive, got {epsilon}")
    n = x.shape[0] * x.shape[1]
    mean = x.data.mean(axis=(0, 1))
    var = x.data.var(axis=(0, 1))
    inv = 1.0 / np.sqrt(var + epsilon)
    xhat = (x.data - mean) * inv

    def backward(g: np.ndarray):
        g_mean = g.mean(axis=(0, 1))
        gx_mean = (g * xhat).mean(axis=(0, 1))
        return (inv * (g - g_mean - xhat * gx_mean),)

    out = _emit("channel_normalize", (x,), xhat, backward)
    return out, mean.copy(), var.copy()
