"""HTTP retrieval service over a loaded checkpoint and gallery index.

Read-only: no endpoint mutates the index or checkpoint, so concurrent
queries are safe and return what serial execution would. Every query
response embeds the model fingerprint so clients can detect hot swaps.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse

from oapr.catalog.split import SplitManifest
from oapr.errors import ContextOverflow
from oapr.harness.model import OAPRModel
from oapr.retrieval.index import GalleryIndex, load_index
from oapr.retrieval.scoring import COMBINE_MODES, RetrievalQuery, score_query

MAX_K = 100


@dataclass
class ServiceState:
    index: GalleryIndex
    model: OAPRModel
    manifest: SplitManifest
    model_fingerprint: str

    @classmethod
    def load(cls, index_path: str, checkpoint_path: str, manifest_path: str) -> "ServiceState":
        index = load_index(index_path)
        model = OAPRModel.load_checkpoint(checkpoint_path)
        manifest = SplitManifest.load(manifest_path)
        fingerprint = hashlib.sha256(Path(checkpoint_path).read_bytes()).hexdigest()
        return cls(index=index, model=model, manifest=manifest, model_fingerprint=fingerprint)


def _not_ready() -> JSONResponse:
    return JSONResponse({"error": "not_ready"}, status_code=503)


def create_app(
    state: ServiceState | None = None,
    cors_origin: str | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="oapr retrieval service")
    app.state.oapr = state

    @app.middleware("http")
    async def fingerprint_header(request: Request, call_next):
        response = await call_next(request)
        st: ServiceState | None = app.state.oapr
        if st is not None:
            response.headers["x-model-fingerprint"] = st.model_fingerprint
        return response

    if cors_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.get("/api/attributes")
    def attributes():
        st: ServiceState | None = app.state.oapr
        if st is None:
            return _not_ready()
        listing = []
        for raw_name, phrase in zip(st.index.catalog_names, st.index.catalog_phrases):
            listing.append(
                {"raw_name": raw_name, "phrase": phrase, "split": st.manifest.split_of(raw_name)}
            )
        return listing

    @app.post("/api/query")
    async def query(request: Request):
        st: ServiceState | None = app.state.oapr
        if st is None:
            return _not_ready()
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "invalid_json"}, status_code=400)

        raw_attrs = body.get("attributes")
        if not isinstance(raw_attrs, list):
            return JSONResponse({"error": "attributes must be a list"}, status_code=400)
        attributes = tuple(dict.fromkeys(a.strip() for a in raw_attrs if str(a).strip()))
        if not attributes:
            return JSONResponse({"error": "attributes is empty"}, status_code=400)
        k = body.get("k", 10)
        if not isinstance(k, int) or not (1 <= k <= MAX_K) or k > len(st.index):
            return JSONResponse(
                {"error": f"k must be an integer in [1, {min(MAX_K, len(st.index))}]"},
                status_code=400,
            )
        mode = body.get("mode", "mean")
        if mode not in COMBINE_MODES:
            return JSONResponse(
                {"error": f"mode must be one of {list(COMBINE_MODES)}"}, status_code=400
            )

        start = time.perf_counter()
        try:
            scored = score_query(
                st.index, RetrievalQuery(attributes=attributes, k=k), st.model, mode=mode
            )
        except ContextOverflow as exc:
            return JSONResponse({"error": "phrase_too_long", "detail": str(exc)}, status_code=422)
        latency_ms = (time.perf_counter() - start) * 1000.0
        return {
            "results": [
                {
                    "image_id": s.image_id,
                    "combined_score": s.combined_score,
                    "per_attribute": s.per_attribute,
                    "image_url": f"/api/images/{s.image_id}",
                }
                for s in scored
            ],
            "latency_ms": latency_ms,
            "model_fingerprint": st.model_fingerprint,
        }

    @app.get("/api/images/{image_id}")
    def image(image_id: str):
        st: ServiceState | None = app.state.oapr
        if st is None:
            return _not_ready()
        # ids are opaque keys into the index, never paths
        for entry in st.index.entries:
            if entry.image_id == image_id:
                path = Path(entry.image_uri)
                if not path.is_file():
                    return JSONResponse({"error": "image file missing"}, status_code=404)
                media = "image/png" if path.suffix.lower() == ".png" else "image/jpeg"
                return FileResponse(path, media_type=media)
        return JSONResponse({"error": "unknown image_id"}, status_code=404)

    return app
