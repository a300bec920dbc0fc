"""Dense tensor container used by every compute op in the kernel.

Layout is row-major with channels innermost; the same byte order is used
by the on-disk dump format (`save_tensor`), so file caches round-trip
bit-identically. Arrays are frozen after construction: parameter updates
go through :meth:`Tensor.assign`, everything else builds new tensors.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from ..errors import NumericError, ShapeError

MAX_AXES = 4

_HEADER = struct.Struct("<4I")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


class Tensor:
    """Immutable dense array of up to 4 axes (group/batch, height, width,
    channels), 64-bit floats by default, 32-bit opt-in."""

    __slots__ = ("data",)

    def __init__(self, data, dtype=None):
        arr = np.array(data, dtype=dtype if dtype is not None else np.float64)
        if arr.dtype not in (np.float64, np.float32):
            arr = arr.astype(np.float64)
        if arr.ndim > MAX_AXES:
            raise ShapeError(f"tensor rank {arr.ndim} exceeds {MAX_AXES} axes")
        if arr.ndim > 0 and min(arr.shape) == 0:
            raise ShapeError(f"zero-length axis in shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NumericError("tensor holds non-finite values")
        self.data = _freeze(arr)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def assign(self, values) -> None:
        """Replace the stored values in place (same shape). Only intended
        for optimizer parameter updates between forward passes."""
        arr = np.asarray(values, dtype=self.data.dtype)
        if arr.shape != self.data.shape:
            raise ShapeError(f"assign shape {arr.shape} != {self.data.shape}")
        if not np.isfinite(arr).all():
            raise NumericError("assign with non-finite values")
        self.data = _freeze(arr.copy())

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data, dtype=dtype)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype})"


def _result(arr: np.ndarray) -> Tensor:
    """Wrap an op result, enforcing the all-finite invariant."""
    t = Tensor.__new__(Tensor)
    if not np.isfinite(arr).all():
        raise NumericError("kernel op produced non-finite values")
    arr = np.asarray(arr)
    if not arr.flags.c_contiguous:  # 0-d arrays are contiguous, stay 0-d
        arr = np.ascontiguousarray(arr)
    t.data = _freeze(arr)
    return t


def save_tensor(t: Tensor, fp: BinaryIO | str) -> None:
    """Dump format: 4 little-endian uint32 extents (leading zeros pad
    ranks below 4), then float64 values, row-major, channels innermost."""
    extents = (0,) * (MAX_AXES - t.ndim) + t.shape
    payload = _HEADER.pack(*extents) + np.ascontiguousarray(
        t.data, dtype="<f8"
    ).tobytes()
    if isinstance(fp, str):
        with open(fp, "wb") as f:
            f.write(payload)
    else:
        fp.write(payload)


def load_tensor(fp: BinaryIO | str) -> Tensor:
    if isinstance(fp, str):
        with open(fp, "rb") as f:
            raw = f.read()
    else:
        raw = fp.read()
    if len(raw) < _HEADER.size:
        raise ShapeError("tensor dump truncated: missing extent header")
    extents = _HEADER.unpack_from(raw)
    shape = tuple(e for e in extents if e != 0)
    n = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != n:
        raise ShapeError(
            f"tensor dump payload holds {data.size} values, header implies {n}"
        )
    return Tensor(data.reshape(shape))
