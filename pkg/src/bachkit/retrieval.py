"""Layout-similarity retrieval over a memory bank.

Every entry is scored with a pooled intersection-over-union: per-category
pixel intersections and unions are summed across categories *before* the
division, which keeps small objects from dominating the score. Counting
is integer-exact and ranking compares exact rationals, so results carry
no float ties and are independent of worker count: the scan is chunked
contiguously, each chunk keeps a local top-m heap, and chunks merge with
a fixed (score desc, ingest order asc) rule.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import multiprocessing as mp
import os
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .bank import BankEntry, MemoryBank
from .errors import ComparisonError, LayoutError, ParamError, RetrievalError
from .layout import SalientLayout, Taxonomy, category_union, validate_layout
from .rle import CategoryBitmap, intersection_size

DEFAULT_M = 3


@dataclass(frozen=True)
class QueryIndex:
    """Per-category pixel sets of a query layout, precomputed once per scan."""

    canvas: tuple[int, int]
    bitmaps: dict[int, CategoryBitmap]
    counts: dict[int, int]
    total: int
    fingerprint: str


def build_query_index(query: SalientLayout, taxonomy: Taxonomy) -> QueryIndex:
    violations = validate_layout(query, taxonomy)
    if violations:
        raise LayoutError(
            "invalid query layout: " + "; ".join(v.message for v in violations)
        )
    bitmaps: dict[int, CategoryBitmap] = {}
    counts: dict[int, int] = {}
    for cid in sorted({b.category for b in query.boxes}):
        bmp = category_union(query, cid, taxonomy)
        if not bmp.is_empty():
            bitmaps[cid] = bmp
            counts[cid] = bmp.count
    payload = json.dumps(query.to_payload(), sort_keys=True, separators=(",", ":"))
    return QueryIndex(
        canvas=query.canvas,
        bitmaps=bitmaps,
        counts=counts,
        total=sum(counts.values()),
        fingerprint=hashlib.sha256(payload.encode()).hexdigest(),
    )


def _score_entry(q: QueryIndex, entry: BankEntry) -> Fraction:
    inter = 0
    for cid, qbmp in q.bitmaps.items():
        ebmp = entry.bitmaps.get(cid)
        if ebmp is not None:
            inter += intersection_size(qbmp, ebmp)
    union = q.total + sum(entry.counts.values()) - inter
    return Fraction(inter, union) if union else Fraction(0)


def iou_r(query: SalientLayout, entry: BankEntry, taxonomy: Taxonomy) -> Fraction:
    """Pooled-IoU layout similarity in [0, 1], exact rational."""
    if tuple(query.canvas) != tuple(entry.canvas):
        raise ComparisonError(
            f"query canvas {query.canvas} != entry canvas {entry.canvas}"
        )
    return _score_entry(build_query_index(query, taxonomy), entry)


def score_bound(query_counts: Mapping[int, int],
                entry_counts: Mapping[int, int]) -> Fraction:
    """Upper bound on iou_r from per-category pixel counts alone:
    sum of per-category min counts over sum of per-category max counts."""
    num = sum(min(c, entry_counts.get(cid, 0)) for cid, c in query_counts.items())
    den = sum(query_counts.values()) + sum(entry_counts.values()) - num
    return Fraction(num, den) if den else Fraction(0)


# ---------------------------------------------------------------------------
# chunked scan


def _scan_chunk(entries: Sequence[BankEntry], start: int, stop: int,
                q: QueryIndex, m: int, prune: bool
                ) -> tuple[list[tuple[Fraction, int]], int]:
    """Top-m candidates of entries[start:stop] as (score, index); also the
    number of entries skipped by the count bound."""
    heap: list[tuple[Fraction, int, int]] = []  # (score, -index, index)
    pruned = 0
    q_counts, q_total = q.counts, q.total
    for idx in range(start, stop):
        entry = entries[idx]
        if prune and len(heap) == m:
            floor = heap[0][0]
            num = sum(min(c, entry.counts.get(cid, 0))
                      for cid, c in q_counts.items())
            den = q_total + sum(entry.counts.values()) - num
            if den == 0 or num * floor.denominator <= floor.numerator * den:
                pruned += 1
                continue
        score = _score_entry(q, entry)
        if len(heap) < m:
            heapq.heappush(heap, (score, -idx, idx))
        elif score > heap[0][0]:
            heapq.heapreplace(heap, (score, -idx, idx))
    return [(s, i) for s, _, i in heap], pruned


_WORKER_BANK: MemoryBank | None = None


def _worker_init(bank: MemoryBank) -> None:
    global _WORKER_BANK
    _WORKER_BANK = bank
    # touch every entry once so copy-on-write faults from the fork are
    # paid at pool start-up, not inside the first timed scan
    for entry in bank.entries:
        for bmp in entry.bitmaps.values():
            bmp.starts.sum()
            bmp.ends.sum()


def _worker_scan(args) -> tuple[list[tuple[Fraction, int]], int]:
    start, stop, q, m, prune = args
    assert _WORKER_BANK is not None
    return _scan_chunk(_WORKER_BANK.entries, start, stop, q, m, prune)


def _chunk_bounds(n: int, workers: int) -> list[tuple[int, int]]:
    per, extra = divmod(n, workers)
    bounds, start = [], 0
    for i in range(workers):
        stop = start + per + (1 if i < extra else 0)
        if stop > start:
            bounds.append((start, stop))
        start = stop
    return bounds


def _merge_top_m(candidate_lists, m: int) -> list[tuple[Fraction, int]]:
    merged = [c for chunk in candidate_lists for c in chunk]
    merged.sort(key=lambda si: (-si[0], si[1]))
    return merged[:m]


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked (entry id, exact score) pairs, highest first."""

    ranked: tuple[tuple[str, Fraction], ...]
    fingerprint: str
    timing: dict

    def to_payload(self) -> dict:
        return {
            "query_fingerprint": self.fingerprint,
            "results": [
                {
                    "id": eid,
                    "score": f"{s.numerator}/{s.denominator}",
                    "score_decimal": format(float(s), ".6f"),
                }
                for eid, s in self.ranked
            ],
            "timing": dict(self.timing),
        }


class BankScanner:
    """Owns the worker pool for one bank; reuse it across queries so pool
    start-up is paid once. Workers inherit the bank via fork, so per-task
    traffic is just the query bitmaps and the candidate lists."""

    def __init__(self, bank: MemoryBank, workers: int = 1):
        if workers < 1:
            raise ParamError(f"workers must be >= 1, got {workers}")
        self.bank = bank
        self.workers = workers
        self._pool = None
        if workers > 1:
            ctx = mp.get_context("fork")
            self._pool = ctx.Pool(workers, initializer=_worker_init,
                                  initargs=(bank,))

    def __enter__(self) -> "BankScanner":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.terminate()
            self._pool.join()
            self._pool = None

    def scan(self, q: QueryIndex, m: int, prune: bool = True
             ) -> tuple[list[tuple[Fraction, int]], int]:
        n = len(self.bank)
        bounds = _chunk_bounds(n, self.workers)
        if self._pool is None:
            chunks = [_scan_chunk(self.bank.entries, a, b, q, m, prune)
                      for a, b in bounds]
        else:
            chunks = self._pool.map(
                _worker_scan, [(a, b, q, m, prune) for a, b in bounds])
        top = _merge_top_m([c for c, _ in chunks], m)
        return top, sum(p for _, p in chunks)

    def retrieve(self, query: SalientLayout, m: int = DEFAULT_M,
                 prune: bool = True) -> RetrievalResult:
        if len(self.bank) == 0:
            raise RetrievalError("cannot retrieve from an empty bank")
        if m < 1:
            raise ParamError(f"m must be >= 1, got {m}")
        if tuple(query.canvas) != tuple(self.bank.canvas):
            raise ComparisonError(
                f"query canvas {query.canvas} != bank canvas {self.bank.canvas}"
            )
        if query.taxonomy_name != self.bank.taxonomy.name:
            raise ComparisonError(
                f"query taxonomy {query.taxonomy_name!r} != bank taxonomy "
                f"{self.bank.taxonomy.name!r}"
            )
        q = build_query_index(query, self.bank.taxonomy)
        t0 = time.perf_counter()
        top, pruned = self.scan(q, m, prune)
        wall = time.perf_counter() - t0
        ranked = tuple((self.bank.entries[i].entry_id, s) for s, i in top)
        return RetrievalResult(
            ranked=ranked,
            fingerprint=q.fingerprint,
            timing={
                "wall_s": wall,
                "workers": self.workers,
                "entries_scanned": len(self.bank) - pruned,
                "entries_pruned": pruned,
            },
        )


def retrieve_top_m(bank: MemoryBank, query: SalientLayout, m: int = DEFAULT_M,
                   workers: int = 1, prune: bool = True) -> RetrievalResult:
    """Exact top-m entries by iou_r; identical output for any worker count."""
    with BankScanner(bank, workers) as scanner:
        return scanner.retrieve(query, m, prune)


# ---------------------------------------------------------------------------
# benchmark


def bench_retrieval(bank: MemoryBank, queries: Sequence[SalientLayout],
                    workers: int = 4, m: int = DEFAULT_M) -> dict:
    """Measure the scan: per-entry scoring latency (instrumented,
    pruning off), sequential and parallel wall times for full retrievals,
    speedup, and pruning hit rate. All configurations are checked to
    return identical rankings."""
    if len(bank) == 0:
        raise RetrievalError("cannot benchmark an empty bank")
    qs = [build_query_index(query, bank.taxonomy) for query in queries]

    per_entry: list[float] = []
    for q in qs:
        for entry in bank.entries:
            t0 = time.perf_counter_ns()
            _score_entry(q, entry)
            per_entry.append((time.perf_counter_ns() - t0) / 1e9)
    lat = np.asarray(per_entry)

    def run(scanner: BankScanner, prune: bool):
        rankings, per_query, pruned_total = [], [], 0
        for q in qs:
            t0 = time.perf_counter()
            top, pruned = scanner.scan(q, m, prune)
            per_query.append(time.perf_counter() - t0)
            pruned_total += pruned
            rankings.append(tuple(top))
        return rankings, per_query, pruned_total

    with BankScanner(bank, 1) as seq:
        seq.scan(qs[0], m, prune=False)  # warm-up, untimed
        rank_seq, tq_seq, _ = run(seq, prune=False)
        rank_seq_pruned, tq_seq_pruned, pruned_seq = run(seq, prune=True)
    with BankScanner(bank, workers) as par:
        par.scan(qs[0], m, prune=False)  # warm-up, untimed
        rank_par, tq_par, _ = run(par, prune=False)
        rank_par_pruned, tq_par_pruned, _ = run(par, prune=True)

    consistent = rank_seq == rank_seq_pruned == rank_par == rank_par_pruned
    seq_total = sum(tq_seq)
    par_total = sum(tq_par)
    n_scored = len(qs) * len(bank)
    try:
        cores = len(os.sched_getaffinity(0))
    except AttributeError:
        cores = os.cpu_count() or 1
    return {
        "bank_size": len(bank),
        "canvas": [bank.canvas[0], bank.canvas[1]],
        "n_queries": len(qs),
        "m": m,
        "workers": workers,
        "cpu_cores": cores,
        "per_entry_scoring": {
            "mean_ms": float(lat.mean() * 1e3),
            "p50_ms": float(np.percentile(lat, 50) * 1e3),
            "p90_ms": float(np.percentile(lat, 90) * 1e3),
            "p99_ms": float(np.percentile(lat, 99) * 1e3),
        },
        "sequential": {
            "total_s": seq_total,
            "per_query_s": tq_seq,
            "pruned_total_s": sum(tq_seq_pruned),
            "pruning_hit_rate": pruned_seq / n_scored if n_scored else 0.0,
        },
        "parallel": {
            "total_s": par_total,
            "per_query_s": tq_par,
            "pruned_total_s": sum(tq_par_pruned),
            "speedup": seq_total / par_total if par_total > 0 else float("inf"),
        },
        "rankings_consistent": consistent,
        "results": [
            [
                {"id": bank.entries[i].entry_id,
                 "score": f"{s.numerator}/{s.denominator}"}
                for s, i in ranking
            ]
            for ranking in rank_seq
        ],
    }
