"""Color-coded rendering of label maps for the service and the UI.

Background channels fill with their palette color, foreground boxes draw
as translucent fills with 1-px outlines, and pixels covered by two or
more foreground instances switch to the overlap accent color. Fill
colors are a pure function of a pixel's channel content; outlines are a
deterministic decoration of the support boundary (4-neighborhood).
"""

from __future__ import annotations

import colorsys
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ConfigError
from .fusion import ComposedLabelMap
from .layout import Taxonomy

VOID_COLOR = (20, 20, 20)
OVERLAP_COLOR = (255, 64, 160)
FOREGROUND_ALPHA = 0.55

# fills for the well-known street-scene classes; everything else gets a
# deterministic golden-angle hue
_NAMED_COLORS = {
    "road": (128, 64, 128), "sidewalk": (244, 35, 232),
    "building": (70, 70, 70), "wall": (102, 102, 156),
    "fence": (190, 153, 153), "pole": (153, 153, 153),
    "traffic light": (250, 170, 30), "traffic sign": (220, 220, 0),
    "vegetation": (107, 142, 35), "terrain": (152, 251, 152),
    "sky": (70, 130, 180), "person": (220, 20, 60), "rider": (255, 0, 0),
    "car": (0, 0, 142), "truck": (0, 0, 70), "bus": (0, 60, 100),
    "train": (0, 80, 100), "motorcycle": (0, 0, 230),
    "bicycle": (119, 11, 32), "ground": (81, 0, 81),
}


def _generated_color(index: int) -> tuple[int, int, int]:
    hue = (index * 0.61803398875) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.65, 0.9)
    return int(r * 255), int(g * 255), int(b * 255)


@dataclass(frozen=True)
class Palette:
    colors: dict[int, tuple[int, int, int]]
    void_color: tuple[int, int, int] = VOID_COLOR
    overlap_color: tuple[int, int, int] = OVERLAP_COLOR

    def color(self, category: int) -> tuple[int, int, int]:
        try:
            return self.colors[category]
        except KeyError:
            raise ConfigError(f"palette has no color for category {category}") from None

    def require_categories(self, categories) -> None:
        missing = [c for c in categories if c not in self.colors]
        if missing:
            raise ConfigError(f"palette misses categories {missing}")

    def to_payload(self) -> dict:
        return {
            "void": list(self.void_color),
            "overlap": list(self.overlap_color),
            "categories": {str(c): list(rgb) for c, rgb in self.colors.items()},
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Palette":
        return cls(
            colors={int(c): tuple(rgb) for c, rgb in payload["categories"].items()},
            void_color=tuple(payload.get("void", VOID_COLOR)),
            overlap_color=tuple(payload.get("overlap", OVERLAP_COLOR)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Palette":
        import json

        return cls.from_payload(json.loads(Path(path).read_text()))


def default_palette(taxonomy: Taxonomy) -> Palette:
    colors = {}
    for i, (cid, name) in enumerate(taxonomy.background + taxonomy.foreground):
        colors[cid] = _NAMED_COLORS.get(name, _generated_color(i))
    return Palette(colors)


@dataclass(frozen=True)
class PreviewImage:
    pixels: np.ndarray  # H x W x 3 uint8

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Image.fromarray(self.pixels, mode="RGB").save(str(path))


_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def render_preview(composed: ComposedLabelMap, palette: Palette) -> PreviewImage:
    """Render a composed label map; see the module docstring for rules."""
    palette.require_categories(composed.channels)
    h, w = composed.height, composed.width
    out = np.empty((h, w, 3), dtype=np.float64)
    out[:] = palette.void_color

    background = composed.background_block()
    for cid in background.channels:
        mask = background.data[:, :, background.channel_of(cid)] >= 1
        out[mask] = palette.color(cid)

    foreground = composed.foreground_block()
    fg_count = foreground.per_pixel_sums()
    for cid in foreground.channels:
        mask = foreground.data[:, :, foreground.channel_of(cid)] >= 1
        single = mask & (fg_count == 1)
        color = np.asarray(palette.color(cid), dtype=np.float64)
        out[single] = (1 - FOREGROUND_ALPHA) * out[single] + FOREGROUND_ALPHA * color

    overlap = fg_count >= 2
    accent = np.asarray(palette.overlap_color, dtype=np.float64)
    out[overlap] = (1 - FOREGROUND_ALPHA) * out[overlap] + FOREGROUND_ALPHA * accent

    # outlines last, in channel order (later channels draw over earlier)
    for cid in foreground.channels:
        mask = foreground.data[:, :, foreground.channel_of(cid)] >= 1
        if not mask.any():
            continue
        eroded = ndimage.binary_erosion(mask, structure=_FOUR_CONNECTED,
                                        border_value=0)
        out[mask & ~eroded] = palette.color(cid)

    return PreviewImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def render_index_map(index_map: np.ndarray, palette: Palette) -> PreviewImage:
    """Direct id-per-pixel coloring of a segmentation raster."""
    palette.require_categories(np.unique(index_map).tolist())
    h, w = index_map.shape
    out = np.empty((h, w, 3), dtype=np.uint8)
    out[:] = palette.void_color
    for cid in np.unique(index_map):
        out[index_map == cid] = palette.color(int(cid))
    return PreviewImage(out)
