import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from bachkit.cli import main
from bachkit.kernel import load_tensor
from bachkit.synthetic import random_layout, toy_taxonomy, write_synthetic_bank

TAX = toy_taxonomy(3, 3)


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workspace(tmp_path):
    bank_dir = tmp_path / "bank"
    manifest = write_synthetic_bank(bank_dir, seed=3, n_entries=8,
                                    taxonomy=TAX, canvas=(24, 32))
    rng = np.random.default_rng(0)
    layout_path = tmp_path / "layout.json"
    random_layout(rng, TAX, (24, 32), min_boxes=2, max_boxes=4).save(layout_path)
    return {"root": tmp_path, "manifest": manifest, "layout": layout_path}


def run_ok(runner, args):
    result = runner.invoke(main, args, obj={})
    assert result.exit_code == 0, result.output
    return result


class TestRetrieveCommand:
    def test_writes_report(self, runner, workspace):
        out = workspace["root"] / "report.json"
        run_ok(runner, ["retrieve", "--bank", str(workspace["manifest"]),
                        "--layout", str(workspace["layout"]),
                        "--m", "3", "--workers", "2", "--out", str(out)])
        report = json.loads(out.read_text())
        assert len(report["results"]) == 3
        assert all("/" in r["score"] for r in report["results"])

    def test_prints_to_stdout_without_out(self, runner, workspace):
        result = run_ok(runner, ["retrieve",
                                 "--bank", str(workspace["manifest"]),
                                 "--layout", str(workspace["layout"])])
        payload = json.loads(result.output)
        assert "results" in payload

    def test_config_supplies_bank(self, runner, workspace):
        config = workspace["root"] / "config.json"
        config.write_text(json.dumps({
            "bank_manifest": str(workspace["manifest"].relative_to(
                workspace["root"])),
            "m": 2,
        }))
        result = run_ok(runner, ["--config", str(config), "retrieve",
                                 "--layout", str(workspace["layout"])])
        assert len(json.loads(result.output)["results"]) == 2

    def test_missing_bank_errors(self, runner, workspace):
        result = runner.invoke(
            main, ["retrieve", "--layout", str(workspace["layout"])], obj={})
        assert result.exit_code != 0


class TestRasterizeCommand:
    def test_dump_and_preview(self, runner, workspace):
        out = workspace["root"] / "labelmap.bin"
        preview = workspace["root"] / "labelmap.png"
        run_ok(runner, ["rasterize", "--layout", str(workspace["layout"]),
                        "--taxonomy", str(workspace["root"] / "bank" /
                                          "taxonomy.json"),
                        "--out", str(out), "--preview", str(preview)])
        tensor = load_tensor(str(out))
        assert tensor.shape == (24, 32, 3)
        assert np.asarray(Image.open(preview)).shape == (24, 32, 3)


class TestFuseGenerateCommands:
    def test_fuse_then_generate(self, runner, workspace):
        feature = workspace["root"] / "features.bin"
        run_ok(runner, ["fuse", "--bank", str(workspace["manifest"]),
                        "--layout", str(workspace["layout"]),
                        "--m", "2", "--out", str(feature)])
        tensor = load_tensor(str(feature))
        assert tensor.shape == (24, 32, 6)

        image_path = workspace["root"] / "image.png"
        run_ok(runner, ["generate", "--feature", str(feature),
                        "--out", str(image_path)])
        img = np.asarray(Image.open(image_path))
        assert img.shape == (24, 32, 3)

    def test_generate_with_trained_params(self, runner, workspace, tmp_path):
        out_dir = tmp_path / "toy"
        run_ok(runner, ["train-toy", "--mode", "recon", "--steps", "3",
                        "--seed", "1", "--out", str(out_dir)])
        feature = workspace["root"] / "features4.bin"
        # toy params use the 4-channel toy taxonomy; craft a feature dump
        from bachkit.kernel import Tensor, save_tensor

        save_tensor(Tensor(np.random.default_rng(0).normal(size=(16, 16, 4))),
                    str(feature))
        image_path = workspace["root"] / "toy_image.png"
        run_ok(runner, ["generate", "--params", str(out_dir / "params"),
                        "--feature", str(feature), "--out", str(image_path)])
        assert image_path.exists()


class TestGradcheckCommand:
    def test_passes(self, runner):
        result = run_ok(runner, ["gradcheck", "--seed", "1"])
        assert "PASS" in result.output
        assert "FAIL" not in result.output


class TestTrainToyCommand:
    def test_report_written(self, runner, tmp_path):
        out_dir = tmp_path / "run"
        result = run_ok(runner, ["train-toy", "--mode", "recon",
                                 "--steps", "4", "--seed", "0",
                                 "--out", str(out_dir)])
        assert "reduction" in result.output
        report = json.loads((out_dir / "report.json").read_text())
        assert report["steps"] == 4


class TestBenchCommand:
    def test_bench_over_query_directory(self, runner, workspace):
        queries_dir = workspace["root"] / "queries"
        queries_dir.mkdir()
        rng = np.random.default_rng(5)
        for i in range(2):
            random_layout(rng, TAX, (24, 32)).save(
                queries_dir / f"q{i}.json")
        out = workspace["root"] / "bench.json"
        run_ok(runner, ["bench", "--bank", str(workspace["manifest"]),
                        "--queries", str(queries_dir), "--workers", "2",
                        "--out", str(out)])
        report = json.loads(out.read_text())
        assert report["n_queries"] == 2
        assert report["rankings_consistent"] is True


def test_cli_smoke_pipeline_stability(runner, workspace):
    """Same inputs, two runs: byte-identical artifacts."""
    root = workspace["root"]
    outputs = []
    for tag in ("a", "b"):
        report = root / f"report_{tag}.json"
        feature = root / f"feature_{tag}.bin"
        image = root / f"image_{tag}.png"
        run_ok(runner, ["retrieve", "--bank", str(workspace["manifest"]),
                        "--layout", str(workspace["layout"]),
                        "--out", str(report)])
        run_ok(runner, ["fuse", "--bank", str(workspace["manifest"]),
                        "--layout", str(workspace["layout"]),
                        "--m", "2", "--out", str(feature)])
        run_ok(runner, ["generate", "--feature", str(feature),
                        "--out", str(image)])
        payload = json.loads(report.read_text())
        payload.pop("timing")
        outputs.append((json.dumps(payload, sort_keys=True),
                        feature.read_bytes(), image.read_bytes()))
    assert outputs[0] == outputs[1]
