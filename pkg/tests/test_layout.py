import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bachkit.errors import LayoutError, TaxonomyError
from bachkit.layout import (
    BoundingBox,
    LabelMap,
    SalientLayout,
    Taxonomy,
    ade20k_taxonomy,
    boxes_from_segmap,
    category_union,
    cityscapes_taxonomy,
    extract_bbox,
    indexmap_to_labelmap,
    rasterize_layout,
    validate_layout,
)
from bachkit.rle import CategoryBitmap
from bachkit.synthetic import random_layout, toy_taxonomy
from oracles import bbox_from_pixels, containment_counts, flood_fill_components

TAX = toy_taxonomy(3, 2)  # foreground ids 3, 4, 5
FG = TAX.foreground_ids


class TestTaxonomy:
    def test_presets_match_expected_sizes(self):
        city = cityscapes_taxonomy()
        assert (city.n_foreground, city.n_background) == (10, 23)
        ade = ade20k_taxonomy()
        assert (ade.n_foreground, ade.n_background) == (115, 35)
        assert len(set(ade.all_ids)) == 150

    def test_duplicate_ids_rejected(self):
        with pytest.raises(TaxonomyError):
            Taxonomy("bad", ((1, "a"),), ((1, "b"),))

    def test_round_trip(self, tmp_path):
        path = tmp_path / "tax.json"
        TAX.save(path)
        assert Taxonomy.load(path) == TAX


class TestRasterize:
    def test_single_box_pixel_count(self):
        layout = SalientLayout(boxes=(BoundingBox(1, 1, 2, 2, FG[0]),),
                               canvas=(4, 4), taxonomy_name=TAX.name)
        lm = rasterize_layout(layout, TAX)
        assert lm.data.sum() == 4
        channel = lm.data[:, :, 0]
        assert channel[1:3, 1:3].sum() == 4
        assert lm.data[:, :, 1:].sum() == 0

    def test_two_identical_boxes_count_two(self):
        box = BoundingBox(0, 0, 2, 3, FG[1])
        lm = rasterize_layout(SalientLayout(boxes=(box, box), canvas=(4, 4),
                                            taxonomy_name=TAX.name), TAX)
        assert (lm.data[0:2, 0:3, 1] == 2).all()
        assert lm.per_pixel_sums().max() == 2

    def test_matches_containment_oracle(self, rng):
        for _ in range(10):
            layout = random_layout(rng, TAX, (9, 11), min_boxes=5, max_boxes=5)
            lm = rasterize_layout(layout, TAX)
            boxes = [(b.x, b.y, b.h, b.w, b.category) for b in layout.boxes]
            expected = containment_counts(boxes, (9, 11), FG)
            assert np.array_equal(lm.data, expected)

    def test_unknown_category(self):
        layout = SalientLayout(boxes=(BoundingBox(0, 0, 2, 2, 99),),
                               canvas=(4, 4))
        with pytest.raises(TaxonomyError):
            rasterize_layout(layout, TAX)

    def test_out_of_canvas_box(self):
        layout = SalientLayout(boxes=(BoundingBox(10, 10, 2, 2, FG[0]),),
                               canvas=(4, 4))
        with pytest.raises(LayoutError):
            rasterize_layout(layout, TAX)

    def test_partial_boxes_clip(self):
        layout = SalientLayout(boxes=(BoundingBox(-1, -1, 3, 3, FG[0]),),
                               canvas=(4, 4))
        lm = rasterize_layout(layout, TAX)
        assert lm.data[:, :, 0].sum() == 4  # 2x2 survives clipping

    def test_order_invariance(self, rng):
        layout = random_layout(rng, TAX, (8, 8), min_boxes=4, max_boxes=4)
        reversed_layout = SalientLayout(boxes=layout.boxes[::-1],
                                        canvas=layout.canvas,
                                        taxonomy_name=layout.taxonomy_name)
        a = rasterize_layout(layout, TAX)
        b = rasterize_layout(reversed_layout, TAX)
        assert np.array_equal(a.data, b.data)


class TestExtractBbox:
    def test_rectangle_identity(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[2:5, 3:7] = True
        box = extract_bbox(CategoryBitmap.from_mask(FG[0], mask))
        assert (box.x, box.y, box.h, box.w) == (3, 2, 3, 4)

    def test_single_pixel(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[3, 5] = True
        box = extract_bbox(CategoryBitmap.from_mask(FG[0], mask))
        assert (box.x, box.y, box.h, box.w) == (5, 3, 1, 1)

    def test_l_shape(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[2:7, 1] = True
        mask[6, 1:5] = True
        box = extract_bbox(CategoryBitmap.from_mask(FG[0], mask))
        pixels = [(r, c) for r in range(10) for c in range(10) if mask[r, c]]
        assert (box.x, box.y, box.h, box.w) == bbox_from_pixels(pixels)
        assert (box.x, box.y, box.h, box.w) == (1, 2, 5, 4)

    def test_empty_rejected(self):
        with pytest.raises(LayoutError):
            extract_bbox(CategoryBitmap.from_mask(FG[0],
                                                  np.zeros((3, 3), dtype=bool)))


class TestCategoryUnion:
    def test_overlapping_boxes_union(self):
        boxes = (BoundingBox(0, 0, 4, 4, FG[0]), BoundingBox(2, 0, 4, 4, FG[0]))
        layout = SalientLayout(boxes=boxes, canvas=(8, 8),
                               taxonomy_name=TAX.name)
        bmp = category_union(layout, FG[0], TAX)
        assert bmp.count == 24  # 16 + 16 - 8 overlap

    def test_absent_category_empty(self):
        layout = SalientLayout(boxes=(BoundingBox(0, 0, 2, 2, FG[0]),),
                               canvas=(4, 4))
        assert category_union(layout, FG[1], TAX).is_empty()

    def test_one_hot_map_channel_support(self, rng):
        index_map = np.full((6, 6), TAX.background_ids[0], dtype=np.uint8)
        index_map[1:4, 2:5] = FG[0]
        lm = indexmap_to_labelmap(index_map, TAX)
        bmp = category_union(lm, FG[0], TAX)
        assert np.array_equal(bmp.to_mask(), index_map == FG[0])

    def test_multiplicity_collapses(self):
        box = BoundingBox(0, 0, 2, 2, FG[0])
        layout = SalientLayout(boxes=(box, box), canvas=(4, 4),
                               taxonomy_name=TAX.name)
        assert category_union(layout, FG[0], TAX).count == 4

    def test_unknown_category(self):
        layout = SalientLayout(boxes=(BoundingBox(0, 0, 2, 2, FG[0]),),
                               canvas=(4, 4))
        with pytest.raises(TaxonomyError):
            category_union(layout, 999, TAX)


class TestBoxesFromSegmap:
    def _segmap(self, paint):
        index_map = np.full((12, 12), TAX.background_ids[0], dtype=np.uint8)
        paint(index_map)
        return indexmap_to_labelmap(index_map, TAX)

    def test_single_rectangle(self):
        segmap = self._segmap(lambda m: m.__setitem__(
            (slice(2, 7), slice(3, 9)), FG[0]))
        layout = boxes_from_segmap(segmap, TAX, min_area=4)
        assert len(layout.boxes) == 1
        box = layout.boxes[0]
        assert (box.x, box.y, box.h, box.w, box.category) == (3, 2, 5, 6, FG[0])

    def test_two_disjoint_blobs(self):
        def paint(m):
            m[1:4, 1:4] = FG[0]
            m[8:11, 8:11] = FG[0]

        layout = boxes_from_segmap(self._segmap(paint), TAX, min_area=4)
        assert len(layout.boxes) == 2

    def test_diagonal_touching_separate_under_4conn(self):
        def paint(m):
            m[1:4, 1:4] = FG[0]
            m[4:7, 4:7] = FG[0]  # corner contact at (4, 4) only

        segmap = self._segmap(paint)
        layout = boxes_from_segmap(segmap, TAX, min_area=4)
        assert len(layout.boxes) == 2
        mask = segmap.data[:, :, segmap.channel_of(FG[0])] >= 1
        assert len(flood_fill_components(mask)) == 2

    def test_min_area_drops_specks(self):
        def paint(m):
            m[0, 0] = FG[0]
            m[5:9, 5:9] = FG[0]

        layout = boxes_from_segmap(self._segmap(paint), TAX, min_area=4)
        assert len(layout.boxes) == 1

    def test_no_foreground_yields_empty_layout(self):
        layout = boxes_from_segmap(self._segmap(lambda m: None), TAX)
        assert layout.boxes == ()
        assert validate_layout(layout, TAX)  # flagged invalid downstream

    def test_recovers_disjoint_rasterized_boxes(self, rng):
        boxes = (BoundingBox(1, 1, 3, 4, FG[0]), BoundingBox(7, 6, 4, 4, FG[0]),
                 BoundingBox(1, 8, 3, 3, FG[1]))
        layout = SalientLayout(boxes=boxes, canvas=(12, 12),
                               taxonomy_name=TAX.name)
        lm = rasterize_layout(layout, TAX)
        # lift the foreground-only raster into a full-taxonomy map
        index_map = np.full((12, 12), TAX.background_ids[0], dtype=np.uint8)
        for channel, cid in enumerate(lm.channels):
            index_map[lm.data[:, :, channel] >= 1] = cid
        recovered = boxes_from_segmap(indexmap_to_labelmap(index_map, TAX),
                                      TAX, min_area=1)
        assert sorted((b.x, b.y, b.h, b.w, b.category) for b in recovered.boxes) \
            == sorted((b.x, b.y, b.h, b.w, b.category) for b in boxes)


class TestValidateLayout:
    def test_well_formed(self):
        layout = SalientLayout(boxes=(BoundingBox(0, 0, 2, 2, FG[0]),),
                               canvas=(4, 4))
        assert validate_layout(layout, TAX) == []

    def test_zero_width(self):
        layout = SalientLayout(boxes=(BoundingBox(0, 0, 2, 0, FG[0]),),
                               canvas=(4, 4))
        codes = [v.code for v in validate_layout(layout, TAX)]
        assert codes == ["non-positive-extent"]

    def test_out_of_canvas(self):
        layout = SalientLayout(boxes=(BoundingBox(9, 9, 2, 2, FG[0]),),
                               canvas=(4, 4))
        codes = [v.code for v in validate_layout(layout, TAX)]
        assert codes == ["out-of-canvas"]

    def test_empty_layout(self):
        codes = [v.code for v in validate_layout(
            SalientLayout(boxes=(), canvas=(4, 4)), TAX)]
        assert codes == ["empty-layout"]

    def test_unknown_category(self):
        layout = SalientLayout(boxes=(BoundingBox(0, 0, 2, 2, 77),),
                               canvas=(4, 4))
        codes = [v.code for v in validate_layout(layout, TAX)]
        assert codes == ["unknown-category"]

    def test_never_raises(self):
        layout = SalientLayout(boxes=(BoundingBox(-5, -5, 0, 0, 999),),
                               canvas=(4, 4))
        findings = validate_layout(layout, TAX)
        assert len(findings) >= 1


class TestRoundTrip:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_rasterize_union_extract_recovers_clipped_box(self, seed):
        rng = np.random.default_rng(seed)
        canvas = (12, 14)
        box = BoundingBox(
            x=int(rng.integers(-3, canvas[1] - 1)),
            y=int(rng.integers(-3, canvas[0] - 1)),
            h=int(rng.integers(1, 8)), w=int(rng.integers(1, 8)),
            category=int(rng.choice(FG)),
        )
        clipped = box.clipped(canvas)
        if clipped is None:
            return
        layout = SalientLayout(boxes=(box,), canvas=canvas,
                               taxonomy_name=TAX.name)
        lm = rasterize_layout(layout, TAX)
        recovered = extract_bbox(category_union(lm, box.category, TAX))
        assert (recovered.x, recovered.y, recovered.h, recovered.w) == \
            (clipped.x, clipped.y, clipped.h, clipped.w)

    def test_layout_payload_round_trip(self, rng):
        layout = random_layout(rng, TAX, (16, 20), min_boxes=3, max_boxes=6)
        assert SalientLayout.from_payload(layout.to_payload()) == layout

    def test_layout_file_round_trip(self, tmp_path, rng):
        layout = random_layout(rng, TAX, (16, 20))
        path = tmp_path / "layout.json"
        layout.save(path)
        assert SalientLayout.load(path) == layout


def test_labelmap_one_hot_checks():
    index_map = np.full((4, 4), TAX.background_ids[0], dtype=np.uint8)
    lm = indexmap_to_labelmap(index_map, TAX)
    assert lm.is_one_hot()
    with pytest.raises(TaxonomyError):
        indexmap_to_labelmap(np.full((2, 2), 200, dtype=np.uint8), TAX)


def test_labelmap_channel_mismatch():
    with pytest.raises(Exception):
        LabelMap(np.zeros((2, 2, 3)), (1, 2))
