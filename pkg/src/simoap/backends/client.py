"""HTTP transport client for the four protocol endpoints.

Calls are retried on transport failures (connection errors, timeouts, 5xx)
up to the descriptor's retry budget. Batch sampling attaches one request id
per logical call, reused across retries, so a backend can deduplicate
replayed work. Every response body is validated before it is handed to
pipeline code.
"""

from __future__ import annotations

import time
import uuid

import requests

from ..consistency import NliJudgment
from ..core import Candidate
from ..errors import CapabilityError, ProtocolError, TransportError, ValidationError
from ..sampling import TokenDistribution
from . import protocol
from .protocol import BackendDescriptor, BatchDebugInfo


class HttpBackend:
    """Client handle for one remote backend."""

    def __init__(self, descriptor: BackendDescriptor, retry_backoff: float = 0.2):
        self.descriptor = descriptor
        self.backend_id = descriptor.backend_id
        self.capabilities = descriptor.capabilities
        self.retry_backoff = retry_backoff
        self._session = requests.Session()

    @classmethod
    def from_url(
        cls,
        base_url: str,
        timeout: float = 30.0,
        max_retries: int = 2,
        retry_backoff: float = 0.2,
    ) -> "HttpBackend":
        """Build a client by asking the backend's health endpoint what it can do."""
        resp = requests.get(f"{base_url.rstrip('/')}/v1/health", timeout=timeout)
        if resp.status_code != 200:
            raise TransportError(
                f"health probe of {base_url} failed with HTTP {resp.status_code}"
            )
        payload = resp.json()
        descriptor = BackendDescriptor(
            backend_id=payload.get("backend_id", base_url),
            base_url=base_url.rstrip("/"),
            capabilities=frozenset(payload.get("capabilities", [])),
            timeout=timeout,
            max_retries=max_retries,
        )
        return cls(descriptor, retry_backoff=retry_backoff)

    def _require_capability(self, capability: str) -> None:
        if capability not in self.capabilities:
            raise CapabilityError(
                f"backend {self.backend_id!r} lacks capability {capability!r}"
            )

    def _post(self, endpoint: str, payload: dict) -> dict:
        url = f"{self.descriptor.base_url}/v1/{endpoint}"
        attempts = 0
        last_error = None
        while attempts <= self.descriptor.max_retries:
            attempts += 1
            try:
                resp = self._session.post(
                    url, json=payload, timeout=self.descriptor.timeout
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = str(exc)
                time.sleep(self.retry_backoff * attempts)
                continue
            if resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                time.sleep(self.retry_backoff * attempts)
                continue
            if resp.status_code != 200:
                detail = ""
                try:
                    detail = resp.json().get("error", "")
                except Exception:
                    pass
                raise ProtocolError(
                    f"{endpoint} rejected with HTTP {resp.status_code}: {detail}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"{endpoint} returned non-JSON body") from exc
        raise TransportError(
            f"{endpoint} failed after {attempts} attempts: {last_error}",
            attempts=attempts,
        )

    def next_token_dist(self, context_tokens: list[int]) -> TokenDistribution:
        self._require_capability("next_token_dist")
        payload = self._post(
            "next-token-dist", {"context_tokens": list(context_tokens)}
        )
        return protocol.parse_distribution_payload(payload)

    def batch_sample(
        self,
        context: str,
        k: int,
        n: int,
        seed: int,
        max_tokens: int = 32,
        debug: bool = False,
    ) -> list[Candidate] | tuple[list[Candidate], BatchDebugInfo]:
        self._require_capability("batch_sample")
        if n < 1:
            raise ValidationError(f"n must be >= 1, got {n}")
        request = {
            "context": context,
            "k": k,
            "n": n,
            "seed": seed,
            "max_tokens": max_tokens,
            "request_id": str(uuid.uuid4()),
        }
        if debug:
            request["debug"] = True
        payload = self._post("batch-sample", request)
        candidates = protocol.parse_candidates_payload(payload, n)
        if debug:
            info = BatchDebugInfo(
                support_sizes=payload.get("support_sizes", []),
                token_ranks=payload.get("token_ranks", []),
            )
            return candidates, info
        return candidates

    def loglikelihood(self, context: str, continuation: str) -> tuple[float, int]:
        self._require_capability("loglikelihood")
        if not continuation:
            raise ValidationError("continuation must be non-empty")
        payload = self._post(
            "loglikelihood", {"context": context, "continuation": continuation}
        )
        return protocol.parse_loglikelihood_payload(payload)

    def nli(self, premise: str, hypothesis: str) -> NliJudgment:
        self._require_capability("nli")
        payload = self._post("nli", {"premise": premise, "hypothesis": hypothesis})
        return protocol.parse_nli_payload(payload)
