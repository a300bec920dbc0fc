"""Run-length-encoded pixel sets over a fixed canvas.

Pixels are indexed in row-major order over H x W; a bitmap is a sorted
list of disjoint half-open runs [start, end). All set arithmetic is
integer-exact, which keeps retrieval scores free of float ties.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

_EMPTY = np.empty(0, dtype=np.int64)


def _as_runs(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=np.int64)
    if out.ndim != 1:
        raise ShapeError("runs must be 1-d arrays")
    return out


@dataclass(frozen=True)
class CategoryBitmap:
    """Pixel set of one category over an H x W canvas."""

    category: int
    height: int
    width: int
    starts: np.ndarray = field(default_factory=lambda: _EMPTY)
    ends: np.ndarray = field(default_factory=lambda: _EMPTY)

    def __post_init__(self):
        starts = _as_runs(self.starts)
        ends = _as_runs(self.ends)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "ends", ends)
        if starts.shape != ends.shape:
            raise ShapeError("starts/ends length mismatch")
        if starts.size:
            if (ends <= starts).any():
                raise ShapeError("empty or inverted run")
            if (starts[1:] < ends[:-1]).any():
                raise ShapeError("runs overlap or are unsorted")
            if starts[0] < 0 or ends[-1] > self.height * self.width:
                raise ShapeError("run outside canvas")

    @property
    def count(self) -> int:
        """Number of pixels in the set."""
        return int((self.ends - self.starts).sum())

    @property
    def n_runs(self) -> int:
        return self.starts.size

    def is_empty(self) -> bool:
        return self.starts.size == 0

    @classmethod
    def from_mask(cls, category: int, mask: np.ndarray) -> "CategoryBitmap":
        """Encode a boolean H x W mask."""
        if mask.ndim != 2:
            raise ShapeError(f"mask must be 2-d, got shape {mask.shape}")
        flat = np.asarray(mask, dtype=bool).ravel()
        edges = np.flatnonzero(np.diff(np.r_[False, flat, False]))
        return cls(category, mask.shape[0], mask.shape[1],
                   edges[::2].astype(np.int64), edges[1::2].astype(np.int64))

    def to_mask(self) -> np.ndarray:
        """Decode back to a boolean H x W mask (exact inverse of from_mask)."""
        flat = np.zeros(self.height * self.width, dtype=bool)
        for s, e in zip(self.starts, self.ends):
            flat[s:e] = True
        return flat.reshape(self.height, self.width)

    def pixel_indices(self) -> np.ndarray:
        """Sorted flat indices of all member pixels."""
        if self.is_empty():
            return _EMPTY
        return np.concatenate(
            [np.arange(s, e, dtype=np.int64) for s, e in zip(self.starts, self.ends)]
        )

    def same_canvas(self, other: "CategoryBitmap") -> bool:
        return (self.height, self.width) == (other.height, other.width)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CategoryBitmap):
            return NotImplemented
        return (
            self.category == other.category
            and self.same_canvas(other)
            and np.array_equal(self.starts, other.starts)
            and np.array_equal(self.ends, other.ends)
        )

    def __hash__(self):
        return hash((self.category, self.height, self.width, self.count))


def _require_same_canvas(a: CategoryBitmap, b: CategoryBitmap) -> None:
    if not a.same_canvas(b):
        raise ShapeError(
            f"canvas mismatch: {a.height}x{a.width} vs {b.height}x{b.width}"
        )


def intersection_size(a: CategoryBitmap, b: CategoryBitmap) -> int:
    """|a ∩ b| in pixels, exact integer arithmetic, no materialization."""
    _require_same_canvas(a, b)
    if a.is_empty() or b.is_empty():
        return 0
    if b.n_runs < a.n_runs:
        a, b = b, a
    # coverage(x) = pixels of b below x, via prefix sums over b's runs
    cum = np.concatenate([[0], np.cumsum(b.ends - b.starts)])

    def coverage(points: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(b.starts, points, side="right") - 1
        safe = np.maximum(idx, 0)
        partial = np.clip(np.minimum(points, b.ends[safe]) - b.starts[safe], 0, None)
        return np.where(idx < 0, 0, cum[safe] + partial)

    return int((coverage(a.ends) - coverage(a.starts)).sum())


def union_size(a: CategoryBitmap, b: CategoryBitmap) -> int:
    """|a ∪ b| in pixels."""
    return a.count + b.count - intersection_size(a, b)


def _sweep(a: CategoryBitmap, b: CategoryBitmap, threshold: int,
           category: int) -> CategoryBitmap:
    """Coverage sweep over both run sets, keeping intervals with coverage
    >= threshold (1 = union, 2 = intersection)."""
    _require_same_canvas(a, b)
    pos = np.concatenate([a.starts, b.starts, a.ends, b.ends])
    delta = np.concatenate(
        [np.ones(a.n_runs + b.n_runs, np.int64), -np.ones(a.n_runs + b.n_runs, np.int64)]
    )
    # starts sort before ends at equal positions so touching runs merge
    order = np.lexsort((-delta, pos))
    pos, delta = pos[order], delta[order]
    cov = np.cumsum(delta)
    above = cov >= threshold
    rise = above & ~np.r_[False, above[:-1]]
    fall = ~above & np.r_[False, above[:-1]]
    starts = pos[rise]
    ends = pos[fall]
    keep = ends > starts
    return CategoryBitmap(category, a.height, a.width, starts[keep], ends[keep])


def union(a: CategoryBitmap, b: CategoryBitmap,
          category: int | None = None) -> CategoryBitmap:
    return _sweep(a, b, 1, a.category if category is None else category)


def intersection(a: CategoryBitmap, b: CategoryBitmap,
                 category: int | None = None) -> CategoryBitmap:
    return _sweep(a, b, 2, a.category if category is None else category)
