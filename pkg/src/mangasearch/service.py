"""Read-only HTTP search service over prebuilt indexes.

Indexes are built offline by the CLI and loaded once at startup; requests
share them immutably, so any number of searches may run concurrently. The
service adds no ranking logic of its own: /api/search responses are exactly
the library-level search results plus box geometry for overlays.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import vector_index
from .annotations import load_pages
from .embeddings import EmbeddingProviderSpec, make_provider
from .errors import ProviderError, ValidationError
from .retrieval import RetrievalConfig, search

logger = logging.getLogger("mangasearch.service")

PORT_ENV_VAR = "MANGASEARCH_PORT"
MAX_K = 100

_MODE_NAMES = {"dialog": "dialog", "scene": "scene", "page": "page_baseline"}


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8787
    default_k: int = 10
    provider: EmbeddingProviderSpec = field(default_factory=EmbeddingProviderSpec)
    index_paths: dict[str, str] = field(default_factory=dict)
    pages_path: str | None = None
    assets_dir: str | None = None

    def __post_init__(self) -> None:
        if not self.index_paths:
            raise ValidationError("service config must name at least one index")
        unknown = set(self.index_paths) - set(_MODE_NAMES)
        if unknown:
            raise ValidationError(f"unknown index modes in config: {sorted(unknown)}")
        if not (0 < self.port < 65536):
            raise ValidationError(f"port out of range: {self.port}")


def load_service_config(path: str | Path) -> ServiceConfig:
    """Read a JSON config; the port may be overridden via MANGASEARCH_PORT."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    port = int(os.environ.get(PORT_ENV_VAR, raw.get("port", 8787)))
    provider = EmbeddingProviderSpec(**raw.get("provider", {}))
    return ServiceConfig(
        host=raw.get("host", "127.0.0.1"),
        port=port,
        default_k=raw.get("default_k", 10),
        provider=provider,
        index_paths=raw.get("indexes", {}),
        pages_path=raw.get("pages"),
        assets_dir=raw.get("assets_dir"),
    )


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="mangasearch", docs_url=None, redoc_url=None)

    indexes = {mode: vector_index.load(path) for mode, path in config.index_paths.items()}
    provider = make_provider(config.provider)
    started_at = time.monotonic()

    page_dims: dict[int, tuple[int, int]] = {}
    box_geometry: dict[tuple[int, str], tuple[float, float, float, float]] = {}
    book_id = ""
    if config.pages_path:
        pages = load_pages(config.pages_path)
        book_id = pages[0].book_id if pages else ""
        for page in pages:
            page_dims[page.page_index] = (page.width, page.height)
            for item in (*page.frames, *page.texts):
                box_geometry[(page.page_index, item.id)] = item.box.as_tuple()

    @app.get("/api/search")
    def api_search(
        q: str = Query(default=""),
        mode: str = Query(default="dialog"),
        k: int | None = Query(default=None),
    ):
        k = k if k is not None else config.default_k
        if mode not in _MODE_NAMES:
            raise HTTPException(status_code=400, detail=f"unknown mode {mode!r}")
        if not q.strip():
            raise HTTPException(status_code=400, detail="query must be non-empty")
        if not (1 <= k <= MAX_K):
            raise HTTPException(status_code=400, detail=f"k must lie in [1,{MAX_K}]")
        if mode not in indexes:
            raise HTTPException(status_code=404, detail=f"no {mode} index loaded")

        cfg = RetrievalConfig(mode=_MODE_NAMES[mode], k=k, provider=config.provider)
        start = time.perf_counter()
        try:
            result = search(indexes[mode], q, cfg, provider=provider)
        except ProviderError as exc:
            raise HTTPException(status_code=502, detail=f"embedding provider failed: {exc}")
        latency_ms = (time.perf_counter() - start) * 1000
        logger.info("search mode=%s k=%d latency=%.2fms q=%r", mode, k, latency_ms, q)

        page_payload = []
        for hit in result.pages:
            dims = page_dims.get(hit.page_index)
            geometry = (
                box_geometry.get((hit.page_index, hit.box_id)) if hit.box_id is not None else None
            )
            page_payload.append(
                {
                    "page_index": hit.page_index,
                    "score": hit.score,
                    "box_id": hit.box_id,
                    "box": list(geometry) if geometry else None,
                    "page_width": dims[0] if dims else None,
                    "page_height": dims[1] if dims else None,
                    "image_url": (
                        f"/assets/pages/{hit.page_index}.png" if config.assets_dir else None
                    ),
                }
            )
        return {
            "mode": mode,
            "query": q,
            "k": k,
            "book_id": book_id,
            "pages": page_payload,
            "latency_ms": latency_ms,
        }

    @app.get("/api/status")
    def api_status():
        return {
            "indexes": [
                {"mode": mode, "size": len(index), "dim": index.dim}
                for mode, index in sorted(indexes.items())
            ],
            "uptime_seconds": time.monotonic() - started_at,
        }

    if config.assets_dir and Path(config.assets_dir).is_dir():
        app.mount("/assets", StaticFiles(directory=config.assets_dir), name="assets")

        @app.get("/")
        def ui_root():
            index_html = Path(config.assets_dir) / "index.html"
            if index_html.is_file():
                return FileResponse(index_html)
            return JSONResponse({"detail": "UI bundle not built; API at /api/search"})

    else:

        @app.get("/")
        def api_root():
            return JSONResponse({"detail": "mangasearch service; API at /api/search"})

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted."""
    import uvicorn

    logging.basicConfig(level=logging.INFO)
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
