"""Seeded synthetic layouts, segmentation maps and banks.

Used by the benchmark harness, the toy training loop and the test suite;
everything is a pure function of the supplied generator, so repeated
builds are identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .bank import MemoryBank, bank_from_entries, entry_from_index_map
from .layout import BoundingBox, SalientLayout, Taxonomy, cityscapes_taxonomy
from .rle import CategoryBitmap


def toy_taxonomy(n_foreground: int = 2, n_background: int = 2) -> Taxonomy:
    """Tiny taxonomy for desk-scale runs: background ids 1..b, foreground
    ids b+1..b+f."""
    background = tuple((i + 1, f"bg{i}") for i in range(n_background))
    foreground = tuple((n_background + i + 1, f"fg{i}")
                       for i in range(n_foreground))
    return Taxonomy(f"toy{n_foreground}x{n_background}", foreground, background)


def random_box(rng: np.random.Generator, taxonomy: Taxonomy,
               canvas: tuple[int, int]) -> BoundingBox:
    h, w = canvas
    bh = int(rng.integers(max(1, h // 8), max(2, h // 2)))
    bw = int(rng.integers(max(1, w // 8), max(2, w // 2)))
    y = int(rng.integers(0, h - bh + 1))
    x = int(rng.integers(0, w - bw + 1))
    category = int(rng.choice(taxonomy.foreground_ids))
    return BoundingBox(x=x, y=y, h=bh, w=bw, category=category)


def random_layout(rng: np.random.Generator, taxonomy: Taxonomy,
                  canvas: tuple[int, int], min_boxes: int = 1,
                  max_boxes: int = 6) -> SalientLayout:
    n = int(rng.integers(min_boxes, max_boxes + 1))
    boxes = tuple(random_box(rng, taxonomy, canvas) for _ in range(n))
    return SalientLayout(boxes=boxes, canvas=canvas,
                         taxonomy_name=taxonomy.name)


def random_index_map(rng: np.random.Generator, taxonomy: Taxonomy,
                     canvas: tuple[int, int], min_boxes: int = 1,
                     max_boxes: int = 6) -> np.ndarray:
    """One-hot segmentation raster: horizontal background bands with
    foreground boxes painted on top."""
    h, w = canvas
    bg_ids = taxonomy.background_ids
    n_bands = int(rng.integers(1, len(bg_ids) + 1))
    cuts = np.sort(rng.choice(np.arange(1, h), size=n_bands - 1, replace=False)) \
        if n_bands > 1 else np.empty(0, dtype=int)
    index_map = np.empty((h, w), dtype=np.uint8)
    bands = np.split(np.arange(h), cuts)
    band_ids = rng.choice(bg_ids, size=len(bands), replace=False)
    for rows, cid in zip(bands, band_ids):
        index_map[rows] = cid
    for box in random_layout(rng, taxonomy, canvas, min_boxes, max_boxes).boxes:
        index_map[box.y:box.y + box.h, box.x:box.x + box.w] = box.category
    return index_map


def _entry_from_layout(entry_id: str, layout: SalientLayout,
                       taxonomy: Taxonomy):
    """Retrieval-only entry: foreground bitmaps straight from box unions,
    no segmentation raster behind it."""
    h, w = layout.canvas
    bitmaps, counts = {}, {}
    for cid in sorted({b.category for b in layout.boxes}):
        mask = np.zeros((h, w), dtype=bool)
        for box in layout.boxes:
            if box.category == cid:
                mask[box.y:box.y + box.h, box.x:box.x + box.w] = True
        bmp = CategoryBitmap.from_mask(cid, mask)
        bitmaps[cid] = bmp
        counts[cid] = bmp.count
    return bitmaps, counts


def make_synthetic_bank(seed: int, n_entries: int,
                        taxonomy: Taxonomy | None = None,
                        canvas: tuple[int, int] = (256, 512),
                        max_boxes: int = 6,
                        with_segmaps: bool = False) -> MemoryBank:
    """In-memory bank of random entries.

    With `with_segmaps` each entry keeps a full index map (needed for
    fusion previews); without, entries carry bitmaps and counts only,
    which is all the retrieval scan and benchmark touch.
    """
    from .bank import BankEntry

    taxonomy = taxonomy or cityscapes_taxonomy()
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_entries):
        entry_id = f"e{i:05d}"
        if with_segmaps:
            index_map = random_index_map(rng, taxonomy, canvas,
                                         max_boxes=max_boxes)
            entries.append(entry_from_index_map(entry_id, index_map, taxonomy,
                                                keep_index_map=True))
        else:
            layout = random_layout(rng, taxonomy, canvas, max_boxes=max_boxes)
            bitmaps, counts = _entry_from_layout(entry_id, layout, taxonomy)
            entries.append(BankEntry(entry_id=entry_id, canvas=canvas,
                                     bitmaps=bitmaps, counts=counts))
    return bank_from_entries(taxonomy, canvas, entries,
                             label=f"synthetic-{seed}-{n_entries}")


def write_synthetic_bank(directory: str | Path, seed: int, n_entries: int,
                         taxonomy: Taxonomy | None = None,
                         canvas: tuple[int, int] = (64, 96),
                         max_boxes: int = 5) -> Path:
    """Write segmap PNGs, a taxonomy file and a manifest; returns the
    manifest path (ready for `ingest`)."""
    taxonomy = taxonomy or cityscapes_taxonomy()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    taxonomy.save(directory / "taxonomy.json")
    entries = []
    for i in range(n_entries):
        entry_id = f"e{i:05d}"
        index_map = random_index_map(rng, taxonomy, canvas, max_boxes=max_boxes)
        name = f"{entry_id}.png"
        Image.fromarray(index_map, mode="L").save(directory / name)
        entries.append({"id": entry_id, "segmap_path": name})
    manifest = {
        "taxonomy_path": "taxonomy.json",
        "canvas": [canvas[0], canvas[1]],
        "entries": entries,
    }
    manifest_path = directory / "bank_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path
