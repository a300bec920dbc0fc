"""Umbrella CLI: rasterize | retrieve | bench | fuse | generate |
gradcheck | train-toy | serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .bank import ingest
from .errors import BachkitError, ConfigError
from .fusion import FusionParams, compose_label_map, fuse_background, pad_query
from .generator import ToyTrainConfig, generate as run_generator, toy_train
from .kernel import Tensor, load_tensor, save_tensor
from .layout import (
    PRESET_TAXONOMIES,
    SalientLayout,
    Taxonomy,
    rasterize_layout,
)
from .preview import Palette, default_palette, render_preview
from .retrieval import BankScanner, bench_retrieval
from .verification import gradient_battery
from .weights import default_pipeline_params, load_pipeline_params


_CONFIG_PATH_KEYS = ("bank_manifest", "taxonomy_path", "params_dir",
                     "palette", "ui_dir")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    base = Path(path).parent
    for key in _CONFIG_PATH_KEYS:
        if payload.get(key) is not None:
            payload[key] = str(base / payload[key])
    return payload


def _setting(ctx, key, override, default=None, required=False):
    if override is not None:
        return override
    value = ctx.obj.get(key, default)
    if required and value is None:
        raise ConfigError(f"missing --{key.replace('_', '-')} (or config key "
                          f"{key!r})")
    return value


def _resolve_taxonomy(layout: SalientLayout, taxonomy_path: str | None
                      ) -> Taxonomy:
    if taxonomy_path is not None:
        return Taxonomy.load(taxonomy_path)
    preset = PRESET_TAXONOMIES.get(layout.taxonomy_name)
    if preset is None:
        raise ConfigError(
            f"layout names taxonomy {layout.taxonomy_name!r}; pass --taxonomy"
        )
    return preset()


def _write_json(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if path is None:
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


def _image_from_tensor(t: Tensor) -> np.ndarray:
    return np.clip(np.rint((t.data + 1.0) * 127.5), 0, 255).astype(np.uint8)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON config supplying defaults")
@click.pass_context
def main(ctx, config_path):
    """Salient-object-layout engine: rasterization, background retrieval,
    fusion, generation and the local service."""
    ctx.obj = _load_config(config_path)


@main.command()
@click.option("--layout", "layout_path", required=True,
              type=click.Path(exists=True))
@click.option("--taxonomy", "taxonomy_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--preview", "preview_path", type=click.Path())
@click.pass_context
def rasterize(ctx, layout_path, taxonomy_path, out_path, preview_path):
    """Rasterize a layout file into a label-map tensor dump."""
    layout = SalientLayout.load(layout_path)
    taxonomy = _resolve_taxonomy(
        layout, _setting(ctx, "taxonomy_path", taxonomy_path))
    label_map = rasterize_layout(layout, taxonomy)
    save_tensor(Tensor(label_map.data.astype(np.float64)), out_path)
    click.echo(f"label map {label_map.data.shape} -> {out_path}")
    if preview_path:
        composed = pad_query(label_map, taxonomy)
        render_preview(composed, default_palette(taxonomy)).save(preview_path)
        click.echo(f"preview -> {preview_path}")


@main.command()
@click.option("--bank", "bank_path", type=click.Path(exists=True))
@click.option("--layout", "layout_path", required=True,
              type=click.Path(exists=True))
@click.option("--m", "m", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--out", "out_path", type=click.Path())
@click.pass_context
def retrieve(ctx, bank_path, layout_path, m, workers, out_path):
    """Rank bank entries against a query layout."""
    bank = ingest(_setting(ctx, "bank_manifest", bank_path, required=True))
    layout = SalientLayout.load(layout_path)
    m = int(_setting(ctx, "m", m, default=3))
    workers = int(_setting(ctx, "workers", workers, default=1))
    with BankScanner(bank, workers) as scanner:
        result = scanner.retrieve(layout, m=m)
    _write_json(out_path, result.to_payload())
    if out_path:
        click.echo(f"top-{m} report -> {out_path}")


@main.command()
@click.option("--bank", "bank_path", type=click.Path(exists=True))
@click.option("--queries", "queries_path", required=True,
              type=click.Path(exists=True),
              help="layout file, directory of layout files, or JSON list")
@click.option("--workers", type=int, default=None)
@click.option("--m", "m", type=int, default=None)
@click.option("--out", "out_path", type=click.Path())
@click.pass_context
def bench(ctx, bank_path, queries_path, workers, m, out_path):
    """Benchmark the retrieval scan."""
    bank = ingest(_setting(ctx, "bank_manifest", bank_path, required=True))
    queries_path = Path(queries_path)
    if queries_path.is_dir():
        files = sorted(queries_path.glob("*.json"))
        queries = [SalientLayout.load(f) for f in files]
    else:
        payload = json.loads(queries_path.read_text())
        if isinstance(payload, list):
            queries = [SalientLayout.from_payload(p) for p in payload]
        else:
            queries = [SalientLayout.from_payload(payload)]
    if not queries:
        raise ConfigError(f"no query layouts found at {queries_path}")
    report = bench_retrieval(
        bank, queries,
        workers=int(_setting(ctx, "workers", workers, default=4)),
        m=int(_setting(ctx, "m", m, default=3)))
    _write_json(out_path, report)
    per_entry = report["per_entry_scoring"]
    click.echo(f"mean per-entry scoring: {per_entry['mean_ms']:.3f} ms; "
               f"speedup x{report['parallel']['speedup']:.2f} "
               f"at {report['workers']} workers", err=True)


@main.command()
@click.option("--bank", "bank_path", type=click.Path(exists=True))
@click.option("--layout", "layout_path", required=True,
              type=click.Path(exists=True))
@click.option("--m", "m", type=int, default=None)
@click.option("--params", "params_dir", type=click.Path(exists=True))
@click.option("--workers", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def fuse(ctx, bank_path, layout_path, m, params_dir, workers, out_path):
    """Retrieve top-m backgrounds and fuse them with the query layout."""
    bank = ingest(_setting(ctx, "bank_manifest", bank_path, required=True))
    layout = SalientLayout.load(layout_path)
    m = int(_setting(ctx, "m", m, default=3))
    workers = int(_setting(ctx, "workers", workers, default=1))
    params_dir = _setting(ctx, "params_dir", params_dir)
    channels = bank.taxonomy.n_background + bank.taxonomy.n_foreground
    if params_dir is not None:
        fusion_params, _, _, _ = load_pipeline_params(params_dir)
    else:
        fusion_params = FusionParams.seeded(np.random.default_rng(0), channels)

    with BankScanner(bank, workers) as scanner:
        result = scanner.retrieve(layout, m=m)
    foreground = rasterize_layout(layout, bank.taxonomy)
    query = pad_query(foreground, bank.taxonomy)
    composed = [
        compose_label_map(bank.background_map(eid), foreground)
        for eid, _ in result.ranked
    ]
    features = fuse_background(query, composed, fusion_params)
    save_tensor(features, out_path)
    ids = ", ".join(eid for eid, _ in result.ranked)
    click.echo(f"fused {features.shape} from [{ids}] -> {out_path}")


@main.command()
@click.option("--params", "params_dir", type=click.Path(exists=True))
@click.option("--feature", "feature_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=0,
              help="seed for default weights when --params is omitted")
@click.pass_context
def generate(ctx, params_dir, feature_path, out_path, seed):
    """Generate an image from a fused-feature dump."""
    from PIL import Image

    features = load_tensor(feature_path)
    params_dir = _setting(ctx, "params_dir", params_dir)
    if params_dir is not None:
        _, gen, _, _ = load_pipeline_params(params_dir)
    else:
        _, gen, _ = default_pipeline_params(features.shape[2], seed=seed)
    image = run_generator(features, gen)
    Image.fromarray(_image_from_tensor(image), mode="RGB").save(out_path)
    click.echo(f"image {image.shape} -> {out_path}")


@main.command()
@click.option("--seed", type=int, default=0)
@click.option("--eps", type=float, default=1e-5)
def gradcheck(seed, eps):
    """Verify analytic gradients against central finite differences."""
    results = gradient_battery(seed=seed, eps=eps)
    failed = False
    for name, err in results.items():
        ok = err < 1e-4
        failed |= not ok
        click.echo(f"{name:28s} {err:.3e}  {'PASS' if ok else 'FAIL'}")
    if failed:
        sys.exit(1)


@main.command("train-toy")
@click.option("--mode", type=click.Choice(["recon", "adv"]), default="recon")
@click.option("--steps", type=int, default=500)
@click.option("--seed", type=int, default=0)
@click.option("--lr", type=float, default=None)
@click.option("--out", "out_dir", type=click.Path())
def train_toy(mode, steps, seed, lr, out_dir):
    """Desk-scale training run on one synthetic (layout, image) pair."""
    cfg = ToyTrainConfig(mode=mode, steps=steps, seed=seed, lr=lr,
                         out_dir=out_dir)
    report = toy_train(cfg)
    click.echo(f"{mode}: loss {report.initial_loss:.4f} -> "
               f"{report.final_loss:.4f} "
               f"({report.reduction * 100.0:.1f}% reduction), "
               f"grad check {report.grad_check_error:.2e}")
    if out_dir:
        click.echo(f"report + params -> {out_dir}")


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.pass_context
def serve(ctx, host, port):
    """Run the HTTP service (requires a --config with bank_manifest)."""
    import uvicorn

    from .service import ServiceConfig, create_app

    if not ctx.obj:
        raise ConfigError("serve needs --config pointing at a service config")
    cfg = ServiceConfig(
        bank_manifest=ctx.obj["bank_manifest"],
        taxonomy_path=ctx.obj.get("taxonomy_path"),
        default_m=int(ctx.obj.get("m", 3)),
        workers=int(ctx.obj.get("workers", 1)),
        listen=ctx.obj.get("listen", "127.0.0.1:8423"),
        params_dir=ctx.obj.get("params_dir"),
        palette_path=ctx.obj.get("palette"),
        ui_dir=ctx.obj.get("ui_dir"),
    )
    default_host, default_port = cfg.host_port
    app = create_app(cfg)
    uvicorn.run(app, host=host or default_host, port=port or default_port)


def entrypoint():
    try:
        main(obj={})
    except BachkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    entrypoint()
