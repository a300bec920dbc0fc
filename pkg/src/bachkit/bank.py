"""Memory bank of segmentation-map entries served to the retrieval scan.

A bank is built once from a manifest and is immutable afterwards; every
entry carries precomputed per-category RLE bitmaps and pixel counts so
the scan never touches image files. Bitmaps are cached next to each
segmentation map in a small binary sidecar keyed by the manifest
checksum.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import BankStateError, IngestError, ShapeError
from .layout import LabelMap, Taxonomy, indexmap_to_labelmap
from .rle import CategoryBitmap

_SIDECAR_MAGIC = b"BKRL"
_SIDECAR_VERSION = 1


@dataclass(frozen=True, eq=False)
class BankEntry:
    """One (image, segmentation map) pair, reduced to what the pipeline
    needs: foreground bitmaps, pixel counts, and file references."""

    entry_id: str
    canvas: tuple[int, int]
    bitmaps: dict[int, CategoryBitmap]
    counts: dict[int, int]
    segmap_path: str | None = None
    image_path: str | None = None
    _index_map: np.ndarray | None = field(default=None, repr=False)

    def index_map(self) -> np.ndarray:
        """The id-per-pixel raster; loaded from disk unless held in memory."""
        if self._index_map is not None:
            return self._index_map
        if self.segmap_path is None:
            raise BankStateError(
                f"entry {self.entry_id!r} has no segmentation map source"
            )
        return load_index_map(self.segmap_path, self.canvas)

    def has_segmap(self) -> bool:
        return self._index_map is not None or self.segmap_path is not None


@dataclass(frozen=True, eq=False)
class MemoryBank:
    taxonomy: Taxonomy
    canvas: tuple[int, int]
    entries: tuple[BankEntry, ...]
    checksum: str
    cache_hits: int = 0
    cache_misses: int = 0

    def __post_init__(self):
        object.__setattr__(self, "_by_id",
                           {e.entry_id: i for i, e in enumerate(self.entries)})
        object.__setattr__(self, "_background_cache", {})

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, entry_id: str) -> BankEntry:
        idx = self._by_id.get(entry_id)
        if idx is None:
            raise KeyError(entry_id)
        return self.entries[idx]

    def entry_index(self, entry_id: str) -> int:
        idx = self._by_id.get(entry_id)
        if idx is None:
            raise KeyError(entry_id)
        return idx

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self._by_id

    def background_map(self, entry_id: str) -> LabelMap:
        """split_background of an entry, memoized (maps are derived on
        demand, the bank itself never changes)."""
        cached = self._background_cache.get(entry_id)
        if cached is None:
            cached = split_background(self.entry(entry_id), self.taxonomy)
            if len(self._background_cache) > 32:
                self._background_cache.clear()
            self._background_cache[entry_id] = cached
        return cached


def load_index_map(path: str | Path, canvas: tuple[int, int] | None = None
                   ) -> np.ndarray:
    """Read an 8-bit single-channel indexed image as an HxW id raster."""
    with Image.open(path) as img:
        if img.mode not in ("L", "P"):
            img = img.convert("L")
        arr = np.asarray(img, dtype=np.uint8)
    if arr.ndim != 2:
        raise IngestError(f"{path}: expected single-channel image, got {arr.shape}")
    if canvas is not None and arr.shape != tuple(canvas):
        raise IngestError(
            f"{path}: extents {arr.shape} do not match bank canvas {tuple(canvas)}"
        )
    return arr


def _foreground_bitmaps(index_map: np.ndarray, taxonomy: Taxonomy
                        ) -> tuple[dict[int, CategoryBitmap], dict[int, int]]:
    bitmaps: dict[int, CategoryBitmap] = {}
    counts: dict[int, int] = {}
    present = set(np.unique(index_map).tolist())
    unknown = sorted(present - set(taxonomy.all_ids))
    if unknown:
        raise IngestError(
            f"pixels hold category ids {unknown} unknown to taxonomy "
            f"{taxonomy.name!r} (map is not one-hot over its channels)"
        )
    for cid in taxonomy.foreground_ids:
        if cid not in present:
            continue
        bmp = CategoryBitmap.from_mask(cid, index_map == cid)
        bitmaps[cid] = bmp
        counts[cid] = bmp.count
    return bitmaps, counts


def entry_from_index_map(entry_id: str, index_map: np.ndarray,
                         taxonomy: Taxonomy,
                         segmap_path: str | None = None,
                         image_path: str | None = None,
                         keep_index_map: bool = False) -> BankEntry:
    bitmaps, counts = _foreground_bitmaps(index_map, taxonomy)
    return BankEntry(
        entry_id=entry_id,
        canvas=index_map.shape,
        bitmaps=bitmaps,
        counts=counts,
        segmap_path=segmap_path,
        image_path=image_path,
        _index_map=index_map if keep_index_map else None,
    )


# ---------------------------------------------------------------------------
# sidecar cache


def _sidecar_path(segmap_path: Path) -> Path:
    return segmap_path.with_name(segmap_path.name + ".rle")


def _write_sidecar(path: Path, checksum: str, canvas: tuple[int, int],
                   bitmaps: dict[int, CategoryBitmap],
                   counts: dict[int, int]) -> None:
    digest = bytes.fromhex(checksum)
    blob = [_SIDECAR_MAGIC, struct.pack("<I", _SIDECAR_VERSION),
            struct.pack("<I", len(digest)), digest,
            struct.pack("<II", canvas[0], canvas[1]),
            struct.pack("<I", len(bitmaps))]
    for cid in sorted(bitmaps):
        bmp = bitmaps[cid]
        blob.append(struct.pack("<IIQ", cid, bmp.n_runs, counts[cid]))
        blob.append(bmp.starts.astype("<i8").tobytes())
        blob.append(bmp.ends.astype("<i8").tobytes())
    path.write_bytes(b"".join(blob))


def _read_sidecar(path: Path, checksum: str, canvas: tuple[int, int]
                  ) -> tuple[dict[int, CategoryBitmap], dict[int, int]] | None:
    try:
        raw = path.read_bytes()
    except OSError:
        return None
    try:
        if raw[:4] != _SIDECAR_MAGIC:
            return None
        off = 4
        (version,) = struct.unpack_from("<I", raw, off); off += 4
        if version != _SIDECAR_VERSION:
            return None
        (dlen,) = struct.unpack_from("<I", raw, off); off += 4
        digest = raw[off:off + dlen]; off += dlen
        if digest.hex() != checksum:
            return None
        h, w, ncat = struct.unpack_from("<III", raw, off); off += 12
        if (h, w) != tuple(canvas):
            return None
        bitmaps: dict[int, CategoryBitmap] = {}
        counts: dict[int, int] = {}
        for _ in range(ncat):
            cid, n_runs, count = struct.unpack_from("<IIQ", raw, off); off += 16
            starts = np.frombuffer(raw, "<i8", n_runs, off).copy(); off += 8 * n_runs
            ends = np.frombuffer(raw, "<i8", n_runs, off).copy(); off += 8 * n_runs
            bitmaps[cid] = CategoryBitmap(cid, h, w, starts, ends)
            counts[cid] = int(count)
        return bitmaps, counts
    except (struct.error, ShapeError, IndexError):
        return None


# ---------------------------------------------------------------------------
# ingestion


def ingest(manifest_path: str | Path, use_cache: bool = True) -> MemoryBank:
    """Build a bank from a manifest file.

    Manifest: JSON with `taxonomy_path`, `canvas: [H, W]` and
    `entries: [{id, segmap_path, image_path?}]`; paths resolve relative
    to the manifest. Entry order in the bank equals manifest order.
    """
    manifest_path = Path(manifest_path)
    try:
        raw = manifest_path.read_bytes()
    except OSError as exc:
        raise IngestError(f"cannot read manifest {manifest_path}: {exc}") from exc
    checksum = hashlib.sha256(raw).hexdigest()
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise IngestError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc

    base = manifest_path.parent
    try:
        taxonomy = Taxonomy.load(base / manifest["taxonomy_path"])
        canvas = (int(manifest["canvas"][0]), int(manifest["canvas"][1]))
        entry_specs = manifest["entries"]
    except (KeyError, IndexError, TypeError) as exc:
        raise IngestError(f"manifest {manifest_path} is missing fields: {exc}") from exc

    entries: list[BankEntry] = []
    seen: set[str] = set()
    hits = misses = 0
    for spec in entry_specs:
        entry_id = str(spec["id"])
        if entry_id in seen:
            raise IngestError(f"duplicate entry id {entry_id!r}")
        seen.add(entry_id)
        segmap_path = base / spec["segmap_path"]
        image_path = spec.get("image_path")
        if image_path is not None:
            image_path = str(base / image_path)

        cached = None
        sidecar = _sidecar_path(segmap_path)
        if use_cache:
            cached = _read_sidecar(sidecar, checksum, canvas)
        if cached is not None:
            bitmaps, counts = cached
            hits += 1
        else:
            try:
                index_map = load_index_map(segmap_path, canvas)
                bitmaps, counts = _foreground_bitmaps(index_map, taxonomy)
            except IngestError as exc:
                raise IngestError(f"entry {entry_id!r}: {exc}") from exc
            except Exception as exc:
                raise IngestError(f"entry {entry_id!r}: {exc}") from exc
            misses += 1
            if use_cache:
                try:
                    _write_sidecar(sidecar, checksum, canvas, bitmaps, counts)
                except OSError:
                    pass  # read-only trees are fine, cache is best-effort

        entries.append(BankEntry(
            entry_id=entry_id, canvas=canvas, bitmaps=bitmaps, counts=counts,
            segmap_path=str(segmap_path), image_path=image_path))

    return MemoryBank(taxonomy=taxonomy, canvas=canvas, entries=tuple(entries),
                      checksum=checksum, cache_hits=hits, cache_misses=misses)


def bank_from_entries(taxonomy: Taxonomy, canvas: tuple[int, int],
                      entries: list[BankEntry], label: str = "synthetic"
                      ) -> MemoryBank:
    """Assemble a bank directly from in-memory entries (synthetic data,
    benchmarks); the checksum covers ids and per-category counts."""
    for e in entries:
        if e.canvas != tuple(canvas):
            raise IngestError(
                f"entry {e.entry_id!r} canvas {e.canvas} != bank canvas {canvas}"
            )
    h = hashlib.sha256(label.encode())
    for e in entries:
        h.update(e.entry_id.encode())
        for cid in sorted(e.counts):
            h.update(struct.pack("<IQ", cid, e.counts[cid]))
    return MemoryBank(taxonomy=taxonomy, canvas=tuple(canvas),
                      entries=tuple(entries), checksum=h.hexdigest())


# ---------------------------------------------------------------------------
# background splitting


def split_background(entry: BankEntry, taxonomy: Taxonomy) -> LabelMap:
    """Background label map of an entry: background pixels keep their
    category; every foreground pixel is reassigned to the category of its
    nearest background pixel (Euclidean; distance ties broken by the
    smaller category id), so the per-pixel channel sum is exactly 1.
    """
    index_map = entry.index_map()
    bg_ids = taxonomy.background_ids
    is_bg = np.isin(index_map, bg_ids)
    if not is_bg.any():
        raise BankStateError(
            f"entry {entry.entry_id!r} has no background pixels to split"
        )

    h, w = index_map.shape
    assigned = index_map.copy()
    if not is_bg.all():
        best_dist = np.full((h, w), np.inf)
        best_cat = np.zeros((h, w), dtype=np.int32)
        for cid in sorted(bg_ids):  # ascending ids + strict < = smaller-id tie-break
            cat_mask = index_map == cid
            if not cat_mask.any():
                continue
            dist = ndimage.distance_transform_edt(~cat_mask)
            closer = dist < best_dist
            best_dist = np.where(closer, dist, best_dist)
            best_cat = np.where(closer, cid, best_cat)
        assigned = np.where(is_bg, index_map, best_cat).astype(index_map.dtype)

    data = np.zeros((h, w, len(bg_ids)), dtype=np.int32)
    for channel, cid in enumerate(bg_ids):
        data[:, :, channel] = assigned == cid
    return LabelMap(data, bg_ids)


def labelmap_for_entry(entry: BankEntry, taxonomy: Taxonomy) -> LabelMap:
    """Full one-hot label map of an entry (background + foreground)."""
    return indexmap_to_labelmap(entry.index_map(), taxonomy)


# ---------------------------------------------------------------------------
# statistics


def bank_stats(bank: MemoryBank) -> dict:
    """Summary report: entry count, per-category frequency and mean area,
    canvas extents, and ingest cache hit info."""
    per_category: dict[str, dict] = {}
    for cid in bank.taxonomy.foreground_ids:
        n_entries = sum(1 for e in bank.entries if cid in e.counts)
        total = sum(e.counts.get(cid, 0) for e in bank.entries)
        per_category[str(cid)] = {
            "name": bank.taxonomy.category_name(cid),
            "entries_with": n_entries,
            "total_pixels": total,
            "mean_area": (total / n_entries) if n_entries else 0.0,
        }
    return {
        "entry_count": len(bank),
        "canvas": [bank.canvas[0], bank.canvas[1]],
        "taxonomy": bank.taxonomy.name,
        "checksum": bank.checksum,
        "cache": {"hits": bank.cache_hits, "misses": bank.cache_misses},
        "per_category": per_category,
    }
