"""Standard-library HTTP server that exposes the in-process mocks over the
wire protocol, for integration tests and the ``serve-mock`` CLI command.

Batch-sample requests are idempotent: responses are cached by request id, so
a retried request never recomputes (or duplicates) candidates. ``fail_first``
injects transient 503s for exercising client retry logic.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import ValidationError
from .mocks import CharLenScorer, LexicalOverlapNli, MockBigramLM, demo_bigram_table


class _Handler(BaseHTTPRequestHandler):
    server_version = "MockProtocol/0.1"

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        state = self.server.state
        if self.path == "/v1/health":
            self._send(
                200,
                {
                    "backend_id": state.backend_id,
                    "capabilities": sorted(state.capabilities),
                },
            )
        else:
            self._send(404, {"error": f"unknown path {self.path}"})

    def do_POST(self):
        state = self.server.state
        with state.lock:
            state.post_count += 1
            if state.fail_remaining > 0:
                state.fail_remaining -= 1
                self._send(503, {"error": "injected transient failure"})
                return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            request = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            self._send(400, {"error": "malformed JSON body"})
            return
        try:
            if self.path == "/v1/next-token-dist":
                self._send(200, state.next_token_dist(request))
            elif self.path == "/v1/batch-sample":
                self._send(200, state.batch_sample(request))
            elif self.path == "/v1/loglikelihood":
                self._send(200, state.loglikelihood(request))
            elif self.path == "/v1/nli":
                self._send(200, state.nli(request))
            else:
                self._send(404, {"error": f"unknown path {self.path}"})
        except (ValidationError, KeyError, TypeError) as exc:
            self._send(400, {"error": str(exc)})


class _ServerState:
    def __init__(self, generator, nli_scorer, loglik_scorer, backend_id, fail_first=0):
        self.generator = generator
        self.nli_scorer = nli_scorer
        self.loglik_scorer = loglik_scorer
        self.backend_id = backend_id
        self.lock = threading.Lock()
        self.fail_remaining = fail_first
        self.post_count = 0
        self.batch_compute_count = 0
        self._batch_cache: dict[str, dict] = {}

    @property
    def capabilities(self) -> set[str]:
        caps = set()
        if self.generator is not None:
            caps |= {"next_token_dist", "batch_sample"}
        if self.loglik_scorer is not None:
            caps.add("loglikelihood")
        if self.nli_scorer is not None:
            caps.add("nli")
        return caps

    def next_token_dist(self, request: dict) -> dict:
        dist = self.generator.next_token_dist(list(request["context_tokens"]))
        return {"token_ids": list(dist.token_ids), "logprobs": list(dist.logprobs)}

    def batch_sample(self, request: dict) -> dict:
        request_id = request.get("request_id", "")
        with self.lock:
            if request_id and request_id in self._batch_cache:
                return self._batch_cache[request_id]
        debug = bool(request.get("debug", False))
        result = self.generator.batch_sample(
            request["context"],
            int(request["k"]),
            int(request["n"]),
            int(request["seed"]),
            max_tokens=int(request.get("max_tokens", 32)),
            collect_debug=debug,
        )
        if debug:
            candidates, support_sizes, token_ranks = result
            response = {
                "candidates": [c.to_json() for c in candidates],
                "support_sizes": support_sizes,
                "token_ranks": token_ranks,
            }
        else:
            response = {"candidates": [c.to_json() for c in result]}
        with self.lock:
            self.batch_compute_count += 1
            if request_id:
                self._batch_cache[request_id] = response
        return response

    def loglikelihood(self, request: dict) -> dict:
        total, count = self.loglik_scorer.loglikelihood(
            request["context"], request["continuation"]
        )
        return {"total_loglik": total, "token_count": count}

    def nli(self, request: dict) -> dict:
        j = self.nli_scorer.nli(request["premise"], request["hypothesis"])
        return {
            "entailment": j.entailment,
            "neutral": j.neutral,
            "contradiction": j.contradiction,
        }


class MockProtocolServer:
    """In-thread HTTP server wrapping the in-process mocks."""

    def __init__(
        self,
        generator=None,
        nli_scorer=None,
        loglik_scorer=None,
        backend_id: str = "mock-server",
        host: str = "127.0.0.1",
        port: int = 0,
        fail_first: int = 0,
    ):
        if generator is None and nli_scorer is None and loglik_scorer is None:
            generator = MockBigramLM(demo_bigram_table(), backend_id=backend_id)
            nli_scorer = LexicalOverlapNli()
            loglik_scorer = CharLenScorer()
        self.state = _ServerState(
            generator, nli_scorer, loglik_scorer, backend_id, fail_first=fail_first
        )
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.state = self.state
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockProtocolServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._httpd.serve_forever()
