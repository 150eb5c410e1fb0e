"""FastAPI server for the four protocol endpoints plus /v1/health.

Every payload leaving this server satisfies the protocol invariants:
distributions renormalized to unit mass, NLI probabilities summing to one,
batches of exactly n candidates with indices 0..n-1. Batch requests are
idempotent by request id, and oversize batches are refused with 413.
"""

from __future__ import annotations

import threading
from collections import OrderedDict

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import SidecarConfig, builtin_demo_config
from .models import load_model

_CACHE_LIMIT = 256


class NextTokenRequest(BaseModel):
    context_tokens: list[int]


class BatchSampleRequest(BaseModel):
    context: str
    k: int = Field(ge=1)
    n: int = Field(ge=1)
    seed: int = Field(ge=0)
    max_tokens: int = Field(default=32, ge=1)
    request_id: str = ""
    debug: bool = False


class LoglikelihoodRequest(BaseModel):
    context: str
    continuation: str


class NliRequest(BaseModel):
    premise: str
    hypothesis: str


def create_app(config: SidecarConfig | None = None) -> FastAPI:
    config = config or builtin_demo_config()
    app = FastAPI(title="simoap-sidecar")

    models: dict[str, object] = {}
    for binding in config.bindings:
        if binding.model not in models:
            models[binding.model] = load_model(binding.model, binding.device)

    def model_for(endpoint: str):
        binding = config.binding(endpoint)
        return (models[binding.model], binding) if binding else (None, None)

    batch_cache: OrderedDict[str, dict] = OrderedDict()
    cache_lock = threading.Lock()

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    @app.get("/v1/health")
    def health():
        return {"backend_id": config.backend_id, "capabilities": config.capabilities}

    @app.post("/v1/next-token-dist")
    def next_token_dist(request: NextTokenRequest):
        model, _ = model_for("next_token_dist")
        if model is None:
            return error(400, "next_token_dist is not bound")
        try:
            token_ids, logprobs = model.next_token_dist(request.context_tokens)
        except (ValueError, KeyError, IndexError) as exc:
            return error(400, str(exc))
        return {"token_ids": token_ids, "logprobs": logprobs}

    @app.post("/v1/batch-sample")
    def batch_sample(request: BatchSampleRequest):
        model, binding = model_for("batch_sample")
        if model is None:
            return error(400, "batch_sample is not bound")
        if request.n > binding.max_batch:
            return error(
                413, f"batch of {request.n} exceeds max_batch {binding.max_batch}"
            )
        if request.request_id:
            with cache_lock:
                cached = batch_cache.get(request.request_id)
            if cached is not None:
                return cached
        try:
            candidates, sizes, ranks = model.sample_batch(
                request.context,
                request.k,
                request.n,
                request.seed,
                max_tokens=request.max_tokens,
            )
        except ValueError as exc:
            return error(400, str(exc))
        response = {"candidates": candidates}
        if request.debug:
            response["support_sizes"] = sizes
            response["token_ranks"] = ranks
        if request.request_id:
            with cache_lock:
                batch_cache[request.request_id] = response
                while len(batch_cache) > _CACHE_LIMIT:
                    batch_cache.popitem(last=False)
        return response

    @app.post("/v1/loglikelihood")
    def loglikelihood(request: LoglikelihoodRequest):
        model, _ = model_for("loglikelihood")
        if model is None:
            return error(400, "loglikelihood is not bound")
        if not request.continuation.strip():
            return error(400, "continuation must be non-empty")
        try:
            total, count = model.loglikelihood(request.context, request.continuation)
        except ValueError as exc:
            return error(400, str(exc))
        return {"total_loglik": total, "token_count": count}

    @app.post("/v1/nli")
    def nli(request: NliRequest):
        model, _ = model_for("nli")
        if model is None:
            return error(400, "nli is not bound")
        return model.nli(request.premise, request.hypothesis)

    return app


def serve(config: SidecarConfig | None = None, host: str = "127.0.0.1", port: int = 8788):
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="info")
