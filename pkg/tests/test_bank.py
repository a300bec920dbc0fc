import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from bachkit.bank import (
    bank_from_entries,
    bank_stats,
    entry_from_index_map,
    ingest,
    split_background,
)
from bachkit.errors import BankStateError, IngestError
from bachkit.synthetic import random_index_map, toy_taxonomy, write_synthetic_bank
from oracles import nearest_background_assignment

TAX = toy_taxonomy(2, 3)  # bg ids 1..3, fg ids 4..5


def write_bank(tmp_path, index_maps, canvas=(8, 8), taxonomy=TAX):
    taxonomy.save(tmp_path / "taxonomy.json")
    entries = []
    for i, arr in enumerate(index_maps):
        name = f"m{i}.png"
        Image.fromarray(arr.astype(np.uint8), mode="L").save(tmp_path / name)
        entries.append({"id": f"m{i}", "segmap_path": name})
    manifest = {"taxonomy_path": "taxonomy.json",
                "canvas": list(canvas), "entries": entries}
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


def simple_map(canvas=(8, 8), bg=1, boxes=()):
    arr = np.full(canvas, bg, dtype=np.uint8)
    for (y, x, h, w, cid) in boxes:
        arr[y:y + h, x:x + w] = cid
    return arr


class TestIngest:
    def test_empty_manifest(self, tmp_path):
        path = write_bank(tmp_path, [])
        bank = ingest(path)
        assert len(bank) == 0

    def test_three_entries_counts_match_recount(self, tmp_path):
        maps = [simple_map(boxes=[(1, 1, 2, 3, 4)]),
                simple_map(boxes=[(0, 0, 4, 4, 5), (4, 4, 2, 2, 4)]),
                simple_map()]
        bank = ingest(write_bank(tmp_path, maps))
        assert len(bank) == 3
        for entry, arr in zip(bank.entries, maps):
            for cid in TAX.foreground_ids:
                expected = int((arr == cid).sum())
                assert entry.counts.get(cid, 0) == expected
                if expected:
                    assert entry.bitmaps[cid].count == expected

    def test_extent_mismatch_names_entry(self, tmp_path):
        maps = [simple_map(), simple_map(canvas=(6, 8))]
        path = write_bank(tmp_path, maps)
        with pytest.raises(IngestError, match="m1"):
            ingest(path)

    def test_duplicate_id(self, tmp_path):
        path = write_bank(tmp_path, [simple_map()])
        manifest = json.loads(path.read_text())
        manifest["entries"].append(manifest["entries"][0])
        path.write_text(json.dumps(manifest))
        with pytest.raises(IngestError, match="duplicate"):
            ingest(path)

    def test_unknown_category_names_entry(self, tmp_path):
        path = write_bank(tmp_path, [simple_map(bg=250)])
        with pytest.raises(IngestError, match="m0"):
            ingest(path)

    def test_unreadable_file(self, tmp_path):
        path = write_bank(tmp_path, [simple_map()])
        (tmp_path / "m0.png").unlink()
        with pytest.raises(IngestError, match="m0"):
            ingest(path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(IngestError):
            ingest(tmp_path / "nope.json")

    def test_deterministic_order_and_checksum(self, tmp_path):
        maps = [simple_map(boxes=[(0, 0, 2, 2, 4)]), simple_map()]
        path = write_bank(tmp_path, maps)
        a = ingest(path)
        b = ingest(path)
        assert a.checksum == b.checksum
        assert [e.entry_id for e in a.entries] == [e.entry_id for e in b.entries]
        for ea, eb in zip(a.entries, b.entries):
            assert ea.counts == eb.counts
            assert set(ea.bitmaps) == set(eb.bitmaps)
            for cid in ea.bitmaps:
                assert ea.bitmaps[cid] == eb.bitmaps[cid]


class TestSidecarCache:
    def test_second_ingest_hits_cache(self, tmp_path):
        path = write_bank(tmp_path, [simple_map(boxes=[(1, 1, 3, 3, 4)])])
        first = ingest(path)
        assert (first.cache_hits, first.cache_misses) == (0, 1)
        assert (tmp_path / "m0.png.rle").exists()
        second = ingest(path)
        assert (second.cache_hits, second.cache_misses) == (1, 0)
        assert second.entries[0].bitmaps[4] == first.entries[0].bitmaps[4]

    def test_stale_cache_rebuilt_on_manifest_change(self, tmp_path):
        path = write_bank(tmp_path, [simple_map(boxes=[(1, 1, 3, 3, 4)])])
        ingest(path)
        manifest = json.loads(path.read_text())
        manifest["note"] = "edited"
        path.write_text(json.dumps(manifest))
        rebuilt = ingest(path)
        assert (rebuilt.cache_hits, rebuilt.cache_misses) == (0, 1)

    def test_corrupt_sidecar_ignored(self, tmp_path):
        path = write_bank(tmp_path, [simple_map(boxes=[(1, 1, 3, 3, 4)])])
        ingest(path)
        (tmp_path / "m0.png.rle").write_bytes(b"garbage")
        bank = ingest(path)
        assert bank.cache_misses == 1
        assert bank.entries[0].counts[4] == 9

    def test_cache_disabled(self, tmp_path):
        path = write_bank(tmp_path, [simple_map()])
        bank = ingest(path, use_cache=False)
        assert not (tmp_path / "m0.png.rle").exists()
        assert bank.cache_misses == 1


class TestSplitBackground:
    def test_single_background_category(self):
        entry = entry_from_index_map("e", simple_map(bg=2), TAX,
                                     keep_index_map=True)
        mb = split_background(entry, TAX)
        channel = mb.channel_of(2)
        assert (mb.data[:, :, channel] == 1).all()
        assert mb.is_one_hot()

    def test_surrounded_foreground_becomes_surrounding(self):
        arr = simple_map(bg=3, boxes=[(3, 3, 2, 2, 4)])
        entry = entry_from_index_map("e", arr, TAX, keep_index_map=True)
        mb = split_background(entry, TAX)
        assert (mb.data[:, :, mb.channel_of(3)] == 1).all()
        assert mb.is_one_hot()

    def test_matches_nearest_oracle(self, rng):
        for _ in range(6):
            arr = random_index_map(rng, TAX, (10, 9), max_boxes=3)
            entry = entry_from_index_map("e", arr, TAX, keep_index_map=True)
            mb = split_background(entry, TAX)
            expected = nearest_background_assignment(arr, TAX.background_ids)
            got = np.zeros_like(arr)
            for channel, cid in enumerate(mb.channels):
                got[mb.data[:, :, channel] == 1] = cid
            assert np.array_equal(got, expected)

    def test_no_background_rejected(self):
        arr = simple_map(bg=4)  # entirely foreground
        entry = entry_from_index_map("e", arr, TAX, keep_index_map=True)
        with pytest.raises(BankStateError):
            split_background(entry, TAX)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_one_hot_property(self, seed):
        rng = np.random.default_rng(seed)
        arr = random_index_map(rng, TAX, (7, 8), max_boxes=4)
        entry = entry_from_index_map("e", arr, TAX, keep_index_map=True)
        mb = split_background(entry, TAX)
        assert mb.is_one_hot()


class TestBankStats:
    def test_empty_bank(self, tmp_path):
        stats = bank_stats(ingest(write_bank(tmp_path, [])))
        assert stats["entry_count"] == 0
        assert all(v["entries_with"] == 0
                   for v in stats["per_category"].values())

    def test_known_entries_hand_count(self, tmp_path):
        maps = [simple_map(boxes=[(0, 0, 2, 2, 4)]),
                simple_map(boxes=[(0, 0, 2, 2, 4), (4, 4, 2, 2, 5)]),
                simple_map()]
        bank = ingest(write_bank(tmp_path, maps))
        stats = bank_stats(bank)
        assert stats["per_category"]["4"]["entries_with"] == 2
        assert stats["per_category"]["4"]["total_pixels"] == 8
        assert stats["per_category"]["4"]["mean_area"] == 4.0
        assert stats["per_category"]["5"]["entries_with"] == 1
        assert stats["entry_count"] == 3
        assert stats["canvas"] == [8, 8]

    def test_pure(self, small_bank):
        assert bank_stats(small_bank) == bank_stats(small_bank)


def test_bank_from_entries_validates_canvas():
    entry = entry_from_index_map("a", simple_map(canvas=(4, 4)), TAX)
    with pytest.raises(IngestError):
        bank_from_entries(TAX, (8, 8), [entry])


def test_bank_lookup(small_bank):
    first = small_bank.entries[0]
    assert small_bank.entry(first.entry_id) is first
    assert first.entry_id in small_bank
    assert "missing" not in small_bank
    with pytest.raises(KeyError):
        small_bank.entry("missing")
