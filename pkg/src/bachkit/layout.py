"""Category taxonomy, bounding-box layouts and label-map rasterization.

Coordinate convention, used everywhere: x = column, y = row, origin at
the top-left, half-open extents (a box covers rows y..y+h-1 and columns
x..x+w-1). Canvas extents are (H, W).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import LayoutError, ShapeError, TaxonomyError
from .rle import CategoryBitmap

DEFAULT_CANVAS = (256, 512)  # (H, W)
MIN_COMPONENT_AREA = 16


@dataclass(frozen=True)
class Taxonomy:
    """Fixed category split into salient (foreground) and background
    classes; declaration order defines channel indices."""

    name: str
    foreground: tuple[tuple[int, str], ...]
    background: tuple[tuple[int, str], ...]

    def __post_init__(self):
        ids = [cid for cid, _ in self.foreground] + [cid for cid, _ in self.background]
        if len(set(ids)) != len(ids):
            raise TaxonomyError(f"duplicate category ids in taxonomy {self.name!r}")

    @property
    def foreground_ids(self) -> tuple[int, ...]:
        return tuple(cid for cid, _ in self.foreground)

    @property
    def background_ids(self) -> tuple[int, ...]:
        return tuple(cid for cid, _ in self.background)

    @property
    def n_foreground(self) -> int:
        return len(self.foreground)

    @property
    def n_background(self) -> int:
        return len(self.background)

    def is_foreground(self, category: int) -> bool:
        return category in self._fg_index

    def foreground_channel(self, category: int) -> int:
        try:
            return self._fg_index[category]
        except KeyError:
            raise TaxonomyError(f"unknown foreground category {category}") from None

    def category_name(self, category: int) -> str:
        for cid, name in self.foreground + self.background:
            if cid == category:
                return name
        raise TaxonomyError(f"unknown category {category}")

    @cached_property
    def _fg_index(self) -> dict[int, int]:
        return {cid: i for i, (cid, _) in enumerate(self.foreground)}

    @property
    def all_ids(self) -> tuple[int, ...]:
        return self.background_ids + self.foreground_ids

    def to_payload(self) -> dict:
        return {
            "name": self.name,
            "foreground": [[cid, n] for cid, n in self.foreground],
            "background": [[cid, n] for cid, n in self.background],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Taxonomy":
        return cls(
            name=payload["name"],
            foreground=tuple((int(c), str(n)) for c, n in payload["foreground"]),
            background=tuple((int(c), str(n)) for c, n in payload["background"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_payload(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Taxonomy":
        return cls.from_payload(json.loads(Path(path).read_text()))


_CITYSCAPES_BACKGROUND = (
    "ego vehicle", "rectification border", "out of roi", "static", "dynamic",
    "ground", "road", "sidewalk", "parking", "rail track", "building", "wall",
    "fence", "guard rail", "bridge", "tunnel", "pole", "polegroup",
    "traffic light", "traffic sign", "vegetation", "terrain", "sky",
)
_CITYSCAPES_FOREGROUND = (
    "person", "rider", "car", "truck", "bus", "caravan", "trailer", "train",
    "motorcycle", "bicycle",
)

_ADE20K_CLASSES = (
    "wall", "building", "sky", "floor", "tree", "ceiling", "road", "bed",
    "windowpane", "grass", "cabinet", "sidewalk", "person", "earth", "door",
    "table", "mountain", "plant", "curtain", "chair", "car", "water",
    "painting", "sofa", "shelf", "house", "sea", "mirror", "rug", "field",
    "armchair", "seat", "fence", "desk", "rock", "wardrobe", "lamp",
    "bathtub", "railing", "cushion", "base", "box", "column", "signboard",
    "chest of drawers", "counter", "sand", "sink", "skyscraper", "fireplace",
    "refrigerator", "grandstand", "path", "stairs", "runway", "case",
    "pool table", "pillow", "screen door", "stairway", "river", "bridge",
    "bookcase", "blind", "coffee table", "toilet", "flower", "book", "hill",
    "bench", "countertop", "stove", "palm", "kitchen island", "computer",
    "swivel chair", "boat", "bar", "arcade machine", "hovel", "bus", "towel",
    "light", "truck", "tower", "chandelier", "awning", "streetlight",
    "booth", "television", "airplane", "dirt track", "apparel", "pole",
    "land", "bannister", "escalator", "ottoman", "bottle", "buffet",
    "poster", "stage", "van", "ship", "fountain", "conveyer belt", "canopy",
    "washer", "plaything", "swimming pool", "stool", "barrel", "basket",
    "waterfall", "tent", "bag", "minibike", "cradle", "oven", "ball", "food",
    "step", "tank", "trade name", "microwave", "pot", "animal", "bicycle",
    "lake", "dishwasher", "screen", "blanket", "sculpture", "hood", "sconce",
    "vase", "traffic light", "tray", "ashcan", "fan", "pier", "crt screen",
    "plate", "monitor", "bulletin board", "shower", "radiator", "glass",
    "clock", "flag",
)
# region/surface classes treated as scenery rather than placeable objects
_ADE20K_BACKGROUND_NAMES = frozenset({
    "wall", "building", "sky", "floor", "tree", "ceiling", "road", "grass",
    "sidewalk", "earth", "mountain", "water", "sea", "rug", "field", "sand",
    "skyscraper", "path", "runway", "river", "bridge", "hill", "land",
    "dirt track", "escalator", "stage", "fountain", "swimming pool",
    "waterfall", "lake", "pier", "stairway", "stairs", "step", "grandstand",
})


def cityscapes_taxonomy() -> Taxonomy:
    """10 salient-object classes against 23 background classes (ids follow
    the standard label-id numbering, id 0 'unlabeled' excluded)."""
    background = tuple((i + 1, n) for i, n in enumerate(_CITYSCAPES_BACKGROUND))
    foreground = tuple((i + 24, n) for i, n in enumerate(_CITYSCAPES_FOREGROUND))
    return Taxonomy("cityscapes", foreground, background)


def ade20k_taxonomy() -> Taxonomy:
    """115 salient-object classes against 35 background classes."""
    fg, bg = [], []
    for i, name in enumerate(_ADE20K_CLASSES):
        (bg if name in _ADE20K_BACKGROUND_NAMES else fg).append((i + 1, name))
    return Taxonomy("ade20k", tuple(fg), tuple(bg))


PRESET_TAXONOMIES = {
    "cityscapes": cityscapes_taxonomy,
    "ade20k": ade20k_taxonomy,
}


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: top-left (x, y) plus height and width in pixels."""

    x: int
    y: int
    h: int
    w: int
    category: int

    def clipped(self, canvas: tuple[int, int]) -> "BoundingBox | None":
        """Intersect with the canvas; None when nothing remains."""
        ch, cw = canvas
        x0, y0 = max(self.x, 0), max(self.y, 0)
        x1, y1 = min(self.x + self.w, cw), min(self.y + self.h, ch)
        if x1 <= x0 or y1 <= y0:
            return None
        return BoundingBox(x0, y0, y1 - y0, x1 - x0, self.category)

    def to_payload(self) -> dict:
        return {"category": self.category, "x": self.x, "y": self.y,
                "h": self.h, "w": self.w}

    @classmethod
    def from_payload(cls, payload: dict) -> "BoundingBox":
        return cls(x=int(payload["x"]), y=int(payload["y"]),
                   h=int(payload["h"]), w=int(payload["w"]),
                   category=int(payload["category"]))


@dataclass(frozen=True)
class SalientLayout:
    """Ordered list of category-tagged boxes over a canvas."""

    boxes: tuple[BoundingBox, ...]
    canvas: tuple[int, int] = DEFAULT_CANVAS
    taxonomy_name: str = "cityscapes"

    def to_payload(self) -> dict:
        return {
            "canvas": [self.canvas[0], self.canvas[1]],
            "taxonomy": self.taxonomy_name,
            "boxes": [b.to_payload() for b in self.boxes],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "SalientLayout":
        boxes = tuple(BoundingBox.from_payload(b) for b in payload["boxes"])
        h, w = payload["canvas"]
        return cls(boxes=boxes, canvas=(int(h), int(w)),
                   taxonomy_name=str(payload.get("taxonomy", "cityscapes")))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_payload(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SalientLayout":
        return cls.from_payload(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class LabelMap:
    """H x W x C occupancy raster; `channels` maps channel index to
    category id. Values are per-pixel instance counts (0/1 for
    segmentation-derived channels, up to n under overlapping boxes)."""

    data: np.ndarray
    channels: tuple[int, ...]

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ShapeError(f"label map must be HxWxC, got shape {arr.shape}")
        if arr.shape[2] != len(self.channels):
            raise ShapeError(
                f"{arr.shape[2]} channels vs {len(self.channels)} channel ids"
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

    def channel_of(self, category: int) -> int:
        try:
            return self.channels.index(category)
        except ValueError:
            raise TaxonomyError(f"category {category} not in this map") from None

    def per_pixel_sums(self) -> np.ndarray:
        return self.data.sum(axis=2)

    def is_one_hot(self) -> bool:
        return bool((self.per_pixel_sums() == 1).all()) and bool(
            (self.data <= 1).all()
        )


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    box_index: int | None = None

    def to_payload(self) -> dict:
        return {"code": self.code, "message": self.message,
                "box_index": self.box_index}


def validate_layout(layout: SalientLayout, taxonomy: Taxonomy) -> list[Violation]:
    """Collect violations; an empty list means the layout is usable."""
    findings: list[Violation] = []
    if not layout.boxes:
        findings.append(Violation("empty-layout", "layout has no boxes"))
    for i, box in enumerate(layout.boxes):
        if box.h < 1 or box.w < 1:
            findings.append(Violation(
                "non-positive-extent", f"box {i} has h={box.h}, w={box.w}", i))
            continue
        if not taxonomy.is_foreground(box.category):
            findings.append(Violation(
                "unknown-category",
                f"box {i} category {box.category} is not a foreground id", i))
        if box.clipped(layout.canvas) is None:
            findings.append(Violation(
                "out-of-canvas", f"box {i} lies entirely outside the canvas", i))
    return findings


def rasterize_layout(layout: SalientLayout, taxonomy: Taxonomy) -> LabelMap:
    """Rasterize boxes into an H x W x C_o count map; channel c at (i, j)
    counts the category-c boxes covering that pixel."""
    h, w = layout.canvas
    data = np.zeros((h, w, taxonomy.n_foreground), dtype=np.int32)
    for i, box in enumerate(layout.boxes):
        if box.h < 1 or box.w < 1:
            raise LayoutError(f"box {i} has non-positive extent (h={box.h}, w={box.w})")
        channel = taxonomy.foreground_channel(box.category)
        clipped = box.clipped(layout.canvas)
        if clipped is None:
            raise LayoutError(f"box {i} lies entirely outside the canvas")
        data[clipped.y:clipped.y + clipped.h,
             clipped.x:clipped.x + clipped.w, channel] += 1
    return LabelMap(data, taxonomy.foreground_ids)


def extract_bbox(bitmap: CategoryBitmap) -> BoundingBox:
    """Tightest axis-aligned box around a non-empty pixel set."""
    if bitmap.is_empty():
        raise LayoutError("cannot extract a box from an empty pixel set")
    idx = bitmap.pixel_indices()
    rows = idx // bitmap.width
    cols = idx % bitmap.width
    y0, y1 = int(rows.min()), int(rows.max())
    x0, x1 = int(cols.min()), int(cols.max())
    return BoundingBox(x=x0, y=y0, h=y1 - y0 + 1, w=x1 - x0 + 1,
                       category=bitmap.category)


def category_union(source: SalientLayout | LabelMap, category: int,
                   taxonomy: Taxonomy) -> CategoryBitmap:
    """Pixel set covered by the category, instance multiplicity collapsed."""
    if isinstance(source, SalientLayout):
        if not taxonomy.is_foreground(category):
            raise TaxonomyError(f"category {category} is not a foreground id")
        h, w = source.canvas
        mask = np.zeros((h, w), dtype=bool)
        for box in source.boxes:
            if box.category != category:
                continue
            clipped = box.clipped(source.canvas)
            if clipped is not None:
                mask[clipped.y:clipped.y + clipped.h,
                     clipped.x:clipped.x + clipped.w] = True
        return CategoryBitmap.from_mask(category, mask)
    if category not in taxonomy.all_ids:
        raise TaxonomyError(f"unknown category {category}")
    channel = source.channel_of(category)
    return CategoryBitmap.from_mask(category, source.data[:, :, channel] >= 1)


_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def boxes_from_segmap(segmap: LabelMap, taxonomy: Taxonomy,
                      min_area: int = MIN_COMPONENT_AREA) -> SalientLayout:
    """Extract one box per 4-connected foreground component.

    Components smaller than `min_area` pixels are dropped. A map with no
    foreground yields an empty layout (invalid downstream, by design).
    """
    boxes: list[BoundingBox] = []
    for category in taxonomy.foreground_ids:
        if category not in segmap.channels:
            continue
        mask = segmap.data[:, :, segmap.channel_of(category)] >= 1
        labels, n = ndimage.label(mask, structure=_FOUR_CONNECTED)
        for comp in range(1, n + 1):
            comp_mask = labels == comp
            if int(comp_mask.sum()) < min_area:
                continue
            boxes.append(extract_bbox(CategoryBitmap.from_mask(category, comp_mask)))
    return SalientLayout(boxes=tuple(boxes),
                         canvas=(segmap.height, segmap.width),
                         taxonomy_name=taxonomy.name)


def indexmap_to_labelmap(index_map: np.ndarray, taxonomy: Taxonomy) -> LabelMap:
    """One-hot LabelMap from an id-per-pixel raster; channel order is
    background ids then foreground ids."""
    if index_map.ndim != 2:
        raise ShapeError(f"index map must be HxW, got shape {index_map.shape}")
    order = taxonomy.all_ids
    known = np.isin(index_map, order)
    if not known.all():
        bad = sorted(set(np.unique(index_map[~known]).tolist()))
        raise TaxonomyError(f"index map holds unknown category ids {bad}")
    h, w = index_map.shape
    data = np.zeros((h, w, len(order)), dtype=np.int32)
    for channel, cid in enumerate(order):
        data[:, :, channel] = index_map == cid
    return LabelMap(data, order)
