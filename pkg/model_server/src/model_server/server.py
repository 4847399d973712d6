"""Protocol v1 inference server.

Endpoints: GET /health, GET /info, POST /classify. Failures come back as
{"error": str}. Request handling is concurrent but inference is
serialized per worker behind a lock; the per-request batch is bounded by
server configuration.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from model_server.artifact import Artifact, load_artifact
from model_server.labels import LABELS

log = logging.getLogger("model_server")

DEFAULT_MAX_BATCH = 64


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(artifact: Artifact | str | Path, max_batch: int = DEFAULT_MAX_BATCH) -> FastAPI:
    """Build the ASGI app around a loaded (or loadable) artifact.

    Raises ArtifactError / LabelMismatch at startup when the artifact is
    unusable, before any socket is bound.
    """
    if not isinstance(artifact, Artifact):
        artifact = load_artifact(artifact)
    if max_batch < 1:
        raise ValueError("max_batch must be positive")

    app = FastAPI(title="model-server", docs_url=None, redoc_url=None)
    lock = threading.Lock()
    model = artifact.model
    tokenizer = artifact.tokenizer

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/info")
    def info():
        return {
            "model_name": artifact.model_id,
            "labels": list(LABELS),
            "max_length": tokenizer.max_length,
        }

    @app.post("/classify")
    async def classify(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict) or "texts" not in body:
            return _error(400, "request body must be an object with a texts field")
        texts = body["texts"]
        if not isinstance(texts, list):
            return _error(400, "texts must be a list of strings")
        if any(not isinstance(t, str) for t in texts):
            return _error(400, "texts must be a list of strings")
        if len(texts) > max_batch:
            return _error(413, f"batch of {len(texts)} exceeds the server limit of {max_batch}")
        if not texts:
            return {"results": []}

        with lock:
            ids = tokenizer.encode_batch(texts)
            scores = model.scores(ids)

        results = []
        for row in scores:
            label_idx = int(row.argmax())  # first maximum: lowest canonical index
            results.append(
                {
                    "label": LABELS[label_idx],
                    "scores": {name: float(row[i]) for i, name in enumerate(LABELS)},
                }
            )
        return {"results": results}

    return app


def serve(artifact_dir: str | Path, host: str = "127.0.0.1", port: int = 8080,
          max_batch: int = DEFAULT_MAX_BATCH) -> None:
    import uvicorn

    app = create_app(artifact_dir, max_batch=max_batch)
    log.info("serving %s on %s:%d", artifact_dir, host, port)
    uvicorn.run(app, host=host, port=port, log_level="warning")
