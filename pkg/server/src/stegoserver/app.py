"""HTTP layer: the four-endpoint wire contract over a model backend.

Probabilities are serialized as decimal strings with 17 significant
digits, enough to reconstruct the exact double on any client.  Requests
are handled sequentially per worker; determinism beats throughput here.
"""

from __future__ import annotations

import hashlib
import json
from typing import List

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .model import Backend, ServerConfig, load_backend


def fingerprint_of(surfaces: List[str], bos_id: int, eos_id: int) -> str:
    blob = json.dumps({"tokens": list(surfaces), "bos": bos_id, "eos": eos_id},
                      ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


class DistributionRequest(BaseModel):
    context: List[int]


class TokenizeRequest(BaseModel):
    text: str


class DetokenizeRequest(BaseModel):
    ids: List[int]


def error(message: str, code: int = 400) -> JSONResponse:
    return JSONResponse(status_code=code, content={"error": message})


def build_app(config: ServerConfig, backend: Backend | None = None) -> FastAPI:
    backend = backend if backend is not None else load_backend(config)
    app = FastAPI(title="stegotext model server")
    app.state.backend = backend
    vocab_response = {
        "tokens": backend.surfaces,
        "bos_id": backend.bos_id,
        "eos_id": backend.eos_id,
        "max_context": backend.max_context,
        "fingerprint": fingerprint_of(backend.surfaces, backend.bos_id,
                                      backend.eos_id),
    }

    @app.get("/vocab")
    def vocab():
        return vocab_response

    @app.post("/distribution")
    def distribution(req: DistributionRequest):
        context = req.context
        if not context:
            return error("context must be non-empty")
        if len(context) > backend.max_context:
            return error("context too long")
        n = len(backend.surfaces)
        if any(not 0 <= t < n for t in context):
            return error("context token out of range")
        probs = backend.distribution(context)
        if config.sparse_top is not None and config.sparse_top < len(probs):
            order = probs.argsort()[::-1][: config.sparse_top]
            keep = sorted(int(i) for i in order)
            rest = 1.0 - float(probs[keep].sum())
            return {
                "top": [[i, f"{probs[i]:.17g}"] for i in keep],
                "rest": f"{max(rest, 0.0):.17g}",
            }
        return {"probs": [f"{p:.17g}" for p in probs]}

    @app.post("/tokenize")
    def tokenize(req: TokenizeRequest):
        try:
            return {"ids": backend.tokenize(req.text)}
        except ValueError as exc:
            return error(str(exc))

    @app.post("/detokenize")
    def detokenize(req: DetokenizeRequest):
        n = len(backend.surfaces)
        if any(not 0 <= t < n for t in req.ids):
            return error("token id out of range")
        return {"text": backend.detokenize(req.ids)}

    return app
