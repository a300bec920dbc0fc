"""bachkit: a salient-object-layout engine.

Rasterize bounding-box layouts into label maps, retrieve best-matching
segmentation backgrounds from a memory bank by layout similarity, fuse
foreground and retrieved backgrounds into a feature map, and run
modulated generation and GAN-objective evaluation on a small numeric
kernel whose backward passes are verified against finite differences.
"""

__version__ = "0.1.0"

from . import errors
from .bank import BankEntry, MemoryBank, bank_stats, ingest, split_background
from .fusion import (
    ComposedLabelMap,
    FusionParams,
    compose_label_map,
    fuse_background,
    pad_query,
)
from .layout import (
    BoundingBox,
    LabelMap,
    SalientLayout,
    Taxonomy,
    ade20k_taxonomy,
    boxes_from_segmap,
    category_union,
    cityscapes_taxonomy,
    extract_bbox,
    rasterize_layout,
    validate_layout,
)
from .retrieval import (
    BankScanner,
    RetrievalResult,
    bench_retrieval,
    iou_r,
    retrieve_top_m,
    score_bound,
)
from .rle import CategoryBitmap

__all__ = [
    "BankEntry",
    "BankScanner",
    "BoundingBox",
    "CategoryBitmap",
    "ComposedLabelMap",
    "FusionParams",
    "LabelMap",
    "MemoryBank",
    "RetrievalResult",
    "SalientLayout",
    "Taxonomy",
    "ade20k_taxonomy",
    "bank_stats",
    "bench_retrieval",
    "boxes_from_segmap",
    "category_union",
    "cityscapes_taxonomy",
    "compose_label_map",
    "errors",
    "extract_bbox",
    "fuse_background",
    "ingest",
    "iou_r",
    "pad_query",
    "rasterize_layout",
    "retrieve_top_m",
    "score_bound",
    "split_background",
    "validate_layout",
]
