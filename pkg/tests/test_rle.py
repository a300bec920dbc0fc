import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bachkit.errors import ShapeError
from bachkit.rle import (
    CategoryBitmap,
    intersection,
    intersection_size,
    union,
    union_size,
)


def mask_from_pixels(pixels, h, w):
    mask = np.zeros((h, w), dtype=bool)
    for r, c in pixels:
        mask[r, c] = True
    return mask


class TestEncodeDecode:
    def test_empty(self):
        bmp = CategoryBitmap.from_mask(1, np.zeros((4, 4), dtype=bool))
        assert bmp.is_empty() and bmp.count == 0
        assert not bmp.to_mask().any()

    def test_full(self):
        bmp = CategoryBitmap.from_mask(1, np.ones((3, 5), dtype=bool))
        assert bmp.count == 15
        assert bmp.n_runs == 1  # row-major full canvas is one run

    def test_row_spanning_runs(self):
        mask = np.zeros((2, 4), dtype=bool)
        mask[0, 2:] = True
        mask[1, :2] = True  # contiguous in flat row-major order
        bmp = CategoryBitmap.from_mask(9, mask)
        assert bmp.n_runs == 1
        assert np.array_equal(bmp.to_mask(), mask)

    def test_malformed_runs_rejected(self):
        with pytest.raises(ShapeError):
            CategoryBitmap(1, 2, 2, np.array([0, 1]), np.array([2, 2]))
        with pytest.raises(ShapeError):
            CategoryBitmap(1, 2, 2, np.array([3]), np.array([2]))
        with pytest.raises(ShapeError):
            CategoryBitmap(1, 2, 2, np.array([0]), np.array([5]))


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=1, max_value=8),
       st.integers(min_value=1, max_value=8),
       st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_encode_decode_identity(h, w, seed):
    mask = np.random.default_rng(seed).random((h, w)) < 0.4
    bmp = CategoryBitmap.from_mask(0, mask)
    assert np.array_equal(bmp.to_mask(), mask)
    assert bmp.count == int(mask.sum())


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_set_ops_match_dense(seed):
    rng = np.random.default_rng(seed)
    a_mask = rng.random((6, 7)) < 0.45
    b_mask = rng.random((6, 7)) < 0.45
    a = CategoryBitmap.from_mask(0, a_mask)
    b = CategoryBitmap.from_mask(0, b_mask)
    assert intersection_size(a, b) == int((a_mask & b_mask).sum())
    assert union_size(a, b) == int((a_mask | b_mask).sum())
    assert np.array_equal(intersection(a, b).to_mask(), a_mask & b_mask)
    assert np.array_equal(union(a, b).to_mask(), a_mask | b_mask)


def test_intersection_is_symmetric_and_bounded():
    rng = np.random.default_rng(0)
    a = CategoryBitmap.from_mask(0, rng.random((16, 16)) < 0.3)
    b = CategoryBitmap.from_mask(0, rng.random((16, 16)) < 0.6)
    assert intersection_size(a, b) == intersection_size(b, a)
    assert intersection_size(a, b) <= min(a.count, b.count)
    assert union_size(a, b) >= max(a.count, b.count)


def test_touching_runs_merge_in_union():
    a = CategoryBitmap(0, 1, 8, np.array([0]), np.array([3]))
    b = CategoryBitmap(0, 1, 8, np.array([3]), np.array([6]))
    u = union(a, b)
    assert u.n_runs == 1
    assert u.count == 6
    assert intersection_size(a, b) == 0


def test_canvas_mismatch_rejected():
    a = CategoryBitmap.from_mask(0, np.ones((2, 2), dtype=bool))
    b = CategoryBitmap.from_mask(0, np.ones((3, 2), dtype=bool))
    with pytest.raises(ShapeError):
        intersection_size(a, b)
