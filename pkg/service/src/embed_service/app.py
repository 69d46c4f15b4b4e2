"""HTTP surface: /health, /models, /embed, /summarize.

Status codes: 404 unknown model, 400 malformed body, 413 oversized batch,
422 empty text for summarization, 503 while models are still loading.
Floats travel as plain JSON numbers at full double precision.
"""

from __future__ import annotations

from contextlib import asynccontextmanager
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .manifest import ModelSpec, load_manifest
from .registry import Registry, embed_text, summarize_text

BATCH_LIMIT = 64


class EmbedRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: str
    texts: list[str]
    mode: Literal["tokens", "mean"] = "tokens"


class SummarizeRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: str
    text: str
    max_length: int | None = None


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail})


def create_app(specs: list[ModelSpec]) -> FastAPI:
    registry = Registry(specs)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        registry.start_loading()
        yield

    app = FastAPI(title="embed-service", lifespan=lifespan)
    app.state.registry = registry

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return _error(400, f"malformed body: {exc.errors()[:3]}")

    @app.get("/health")
    def health():
        if registry.error:
            return _error(503, f"model loading failed: {registry.error}")
        if not registry.ready:
            return _error(503, "models are loading")
        return {"status": "ok"}

    @app.get("/models")
    def models():
        if not registry.ready:
            return _error(503, "models are loading")
        return registry.descriptors()

    @app.post("/embed")
    def embed(request: EmbedRequest):
        if not registry.ready:
            return _error(503, "models are loading")
        loaded = registry.get(request.model)
        if loaded is None or loaded.spec.kind != "encoder":
            return _error(404, f"unknown encoder {request.model!r}")
        if len(request.texts) > BATCH_LIMIT:
            return _error(413, f"batch of {len(request.texts)} exceeds limit {BATCH_LIMIT}")
        if not request.texts:
            return _error(400, "texts is empty")
        results = []
        for text in request.texts:
            if not text.strip():
                return _error(400, "texts entries must be non-empty")
            embedded = embed_text(loaded, text, request.mode)
            entry = {"vectors": embedded.vectors, "truncated": embedded.truncated}
            if request.mode == "tokens":
                entry["tokens"] = embedded.tokens
            results.append(entry)
        return {"dim": loaded.dimension, "results": results}

    @app.post("/summarize")
    def summarize(request: SummarizeRequest):
        if not registry.ready:
            return _error(503, "models are loading")
        loaded = registry.get(request.model)
        if loaded is None or loaded.spec.kind != "summarizer":
            return _error(404, f"unknown summarizer {request.model!r}")
        if not request.text.strip():
            return _error(422, "text is empty")
        generated = summarize_text(loaded, request.text, request.max_length)
        return {"summary": generated.summary, "truncated": generated.truncated}

    return app


def create_app_from_manifest(path: str) -> FastAPI:
    return create_app(load_manifest(path))
