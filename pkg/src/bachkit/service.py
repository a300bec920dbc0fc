"""Local HTTP API over one immutable bank: retrieval, fusion previews,
layout validation, bank stats and entry previews.

Responses are pure functions of (bank checksum, request body, config)
apart from the `timing` blocks; scores cross the wire as exact-fraction
strings next to a deterministic decimal rendering.
"""

from __future__ import annotations

import base64
import json
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .bank import MemoryBank, bank_stats, ingest
from .errors import (
    BankStateError,
    ComparisonError,
    ConfigError,
    LayoutError,
    RetrievalError,
)
from .fusion import FusionParams, compose_label_map, fuse_background, pad_query
from .layout import SalientLayout, rasterize_layout, validate_layout
from .preview import Palette, default_palette, render_index_map, render_preview
from .retrieval import DEFAULT_M, BankScanner
from .weights import load_pipeline_params


@dataclass
class ServiceConfig:
    bank_manifest: str
    taxonomy_path: str | None = None
    default_m: int = DEFAULT_M
    workers: int = 1
    listen: str = "127.0.0.1:8423"
    params_dir: str | None = None
    palette_path: str | None = None
    ui_dir: str | None = None

    def __post_init__(self):
        if self.default_m < 1:
            raise ConfigError(f"default m must be >= 1, got {self.default_m}")
        if self.workers < 1:
            raise ConfigError(f"worker count must be >= 1, got {self.workers}")

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        path = Path(path)
        try:
            payload = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = path.parent

        def resolve(key):
            value = payload.get(key)
            return str(base / value) if value is not None else None

        cfg = cls(
            bank_manifest=str(base / payload["bank_manifest"]),
            taxonomy_path=resolve("taxonomy_path"),
            default_m=int(payload.get("m", DEFAULT_M)),
            workers=int(payload.get("workers", 1)),
            listen=str(payload.get("listen", "127.0.0.1:8423")),
            params_dir=resolve("params_dir"),
            palette_path=resolve("palette"),
            ui_dir=resolve("ui_dir"),
        )
        for label, p in (("bank manifest", cfg.bank_manifest),
                         ("taxonomy", cfg.taxonomy_path),
                         ("params dir", cfg.params_dir),
                         ("palette", cfg.palette_path)):
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{label} path does not exist: {p}")
        return cfg

    @property
    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.rpartition(":")
        return host or "127.0.0.1", int(port)


def _error(status: int, message: str, violations=None) -> JSONResponse:
    body = {"error": message}
    if violations is not None:
        body["violations"] = [v.to_payload() for v in violations]
    return JSONResponse(body, status_code=status)


def _parse_layout(body: dict) -> SalientLayout:
    if not isinstance(body, dict) or "layout" not in body:
        raise LayoutError("request body must carry a 'layout' object")
    try:
        return SalientLayout.from_payload(body["layout"])
    except (KeyError, TypeError, ValueError) as exc:
        raise LayoutError(f"malformed layout payload: {exc}") from exc


def create_app(config: ServiceConfig,
               bank: MemoryBank | None = None) -> FastAPI:
    bank = bank if bank is not None else ingest(config.bank_manifest)
    taxonomy = bank.taxonomy
    palette = (Palette.load(config.palette_path) if config.palette_path
               else default_palette(taxonomy))
    palette.require_categories(taxonomy.all_ids)

    channels = taxonomy.n_background + taxonomy.n_foreground
    if config.params_dir is not None:
        fusion_params, _, _, _ = load_pipeline_params(config.params_dir)
        if fusion_params.channels != channels:
            raise ConfigError(
                f"fusion params expect {fusion_params.channels} channels, "
                f"bank taxonomy has {channels}"
            )
    else:
        import numpy as np

        fusion_params = FusionParams.seeded(np.random.default_rng(0), channels)

    scanner = BankScanner(bank, config.workers)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        scanner.close()

    app = FastAPI(title="bachkit service", lifespan=lifespan)
    app.state.bank = bank
    app.state.scanner = scanner
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    def run_retrieval(layout: SalientLayout, m: int):
        violations = validate_layout(layout, taxonomy)
        if violations:
            return None, _error(400, "invalid layout", violations)
        try:
            return scanner.retrieve(layout, m=m), None
        except RetrievalError as exc:
            return None, _error(409, str(exc))
        except (ComparisonError, LayoutError) as exc:
            return None, _error(400, str(exc))

    @app.post("/retrieve")
    async def retrieve(request: Request):
        body = await request.json()
        try:
            layout = _parse_layout(body)
        except LayoutError as exc:
            return _error(400, str(exc))
        m = int(body.get("m", config.default_m))
        result, err = run_retrieval(layout, m)
        if err is not None:
            return err
        payload = result.to_payload()
        for row in payload["results"]:
            row["thumbnail_ref"] = f"/preview/{row['id']}"
        return payload

    @app.post("/fuse-preview")
    async def fuse_preview(request: Request):
        body = await request.json()
        try:
            layout = _parse_layout(body)
        except LayoutError as exc:
            return _error(400, str(exc))
        m = int(body.get("m", config.default_m))
        entry_ids = body.get("entry_ids")

        scores: dict[str, str] = {}
        if entry_ids is None:
            result, err = run_retrieval(layout, m)
            if err is not None:
                return err
            entry_ids = [eid for eid, _ in result.ranked]
            scores = {row["id"]: row["score"]
                      for row in result.to_payload()["results"]}
            fingerprint = result.fingerprint
        else:
            violations = validate_layout(layout, taxonomy)
            if violations:
                return _error(400, "invalid layout", violations)
            unknown = [eid for eid in entry_ids if eid not in bank]
            if unknown:
                return _error(404, f"unknown entry ids {unknown}")
            if not entry_ids:
                return _error(400, "entry_ids must not be empty")
            fingerprint = None

        foreground = rasterize_layout(layout, taxonomy)
        query = pad_query(foreground, taxonomy)
        try:
            composed = [compose_label_map(bank.background_map(eid), foreground)
                        for eid in entry_ids]
        except BankStateError as exc:
            return _error(409, str(exc))
        features = fuse_background(query, composed, fusion_params)

        previews = []
        for eid, comp in zip(entry_ids, composed):
            png = render_preview(comp, palette).to_png_bytes()
            previews.append({
                "entry_id": eid,
                "score": scores.get(eid),
                "png_base64": base64.b64encode(png).decode("ascii"),
            })
        summary = [
            {
                "category": cid,
                "min": float(features.data[:, :, i].min()),
                "mean": float(features.data[:, :, i].mean()),
                "max": float(features.data[:, :, i].max()),
            }
            for i, cid in enumerate(query.channels)
        ]
        return {
            "query_fingerprint": fingerprint,
            "m": len(entry_ids),
            "previews": previews,
            "feature_summary": {"channels": summary},
        }

    @app.post("/layout/validate")
    async def layout_validate(request: Request):
        body = await request.json()
        try:
            layout = _parse_layout(body)
        except LayoutError as exc:
            return _error(400, str(exc))
        violations = validate_layout(layout, taxonomy)
        return {"ok": not violations,
                "violations": [v.to_payload() for v in violations]}

    @app.get("/bank/stats")
    async def stats():
        return bank_stats(bank)

    @app.get("/taxonomy")
    async def get_taxonomy():
        return taxonomy.to_payload()

    @app.get("/preview/{entry_id}")
    async def entry_preview(entry_id: str):
        if entry_id not in bank:
            return _error(404, f"unknown entry id {entry_id!r}")
        entry = bank.entry(entry_id)
        if entry.image_path is not None and Path(entry.image_path).exists():
            return FileResponse(entry.image_path)
        try:
            index_map = entry.index_map()
        except BankStateError as exc:
            return _error(409, str(exc))
        png = render_index_map(index_map, palette).to_png_bytes()
        return Response(content=png, media_type="image/png")

    if config.ui_dir is not None and Path(config.ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True),
                  name="ui")

    return app
