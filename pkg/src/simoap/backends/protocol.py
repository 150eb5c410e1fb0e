"""Wire protocol schemas and payload validation.

Endpoints (JSON over HTTP, request/response fields mirror the operation
signatures):

    POST /v1/next-token-dist   {"context_tokens": [int]}
        -> {"token_ids": [int], "logprobs": [float]}
    POST /v1/batch-sample      {"context": str, "k": int, "n": int,
                                "seed": int, "max_tokens": int,
                                "request_id": str, "debug": bool}
        -> {"candidates": [{"text", "index", "token_count",
                            "token_logprobs", "seed_stream"}],
            "support_sizes": [[int]]?, "token_ranks": [[int]]?}
    POST /v1/loglikelihood     {"context": str, "continuation": str}
        -> {"total_loglik": float, "token_count": int}
    POST /v1/nli               {"premise": str, "hypothesis": str}
        -> {"entailment": float, "neutral": float, "contradiction": float}
    GET  /v1/health            -> {"backend_id": str, "capabilities": [str]}

``debug`` responses additionally report, per candidate and step, the size of
the top-k support that was sampled from and the 1-based probability rank of
the sampled token, so integration checks can confirm the requested k was
honored server-side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..consistency import NliJudgment
from ..core import Candidate
from ..errors import ProtocolError, ValidationError
from ..sampling import TokenDistribution

CAPABILITIES = frozenset({"next_token_dist", "batch_sample", "loglikelihood", "nli"})


@dataclass(frozen=True)
class BackendDescriptor:
    """Where a backend lives and what it can do."""

    backend_id: str
    base_url: str
    capabilities: frozenset[str]
    timeout: float = 30.0
    max_retries: int = 2

    def __post_init__(self):
        object.__setattr__(self, "capabilities", frozenset(self.capabilities))
        if not self.capabilities:
            raise ValidationError("backend must advertise at least one capability")
        unknown = self.capabilities - CAPABILITIES
        if unknown:
            raise ValidationError(f"unknown capabilities: {sorted(unknown)}")
        if self.timeout <= 0:
            raise ValidationError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")


def _require(payload: dict, key: str, kind=None):
    if not isinstance(payload, dict):
        raise ProtocolError(f"expected a JSON object, got {type(payload).__name__}")
    if key not in payload:
        raise ProtocolError(f"payload missing field {key!r}")
    value = payload[key]
    if kind is not None and not isinstance(value, kind):
        raise ProtocolError(f"field {key!r} has type {type(value).__name__}")
    return value


def parse_distribution_payload(payload: dict) -> TokenDistribution:
    """Validate a next-token-dist response; raises ProtocolError on violations."""
    token_ids = _require(payload, "token_ids", list)
    logprobs = _require(payload, "logprobs", list)
    try:
        return TokenDistribution(
            token_ids=tuple(int(t) for t in token_ids),
            logprobs=tuple(float(lp) for lp in logprobs),
        )
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed distribution payload: {exc}") from exc


def parse_nli_payload(payload: dict) -> NliJudgment:
    """Validate an NLI response; raises ProtocolError on violations."""
    try:
        return NliJudgment(
            entailment=float(_require(payload, "entailment")),
            neutral=float(_require(payload, "neutral")),
            contradiction=float(_require(payload, "contradiction")),
        )
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed NLI payload: {exc}") from exc


def parse_loglikelihood_payload(payload: dict) -> tuple[float, int]:
    """Validate a loglikelihood response."""
    total = _require(payload, "total_loglik")
    count = _require(payload, "token_count")
    try:
        total = float(total)
        count = int(count)
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed loglikelihood payload: {exc}") from exc
    if not math.isfinite(total):
        raise ProtocolError(f"non-finite total_loglik {total}")
    if count < 1:
        raise ProtocolError(f"token_count must be >= 1, got {count}")
    return total, count


def parse_candidates_payload(payload: dict, expected_n: int) -> list[Candidate]:
    """Validate a batch-sample response: exactly n candidates, indices 0..n-1."""
    raw = _require(payload, "candidates", list)
    if len(raw) != expected_n:
        raise ProtocolError(
            f"partial batch: got {len(raw)} candidates, expected {expected_n}"
        )
    try:
        candidates = [Candidate.from_json(obj) for obj in raw]
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        raise ProtocolError(f"malformed candidate payload: {exc}") from exc
    indices = sorted(c.index for c in candidates)
    if indices != list(range(expected_n)):
        raise ProtocolError(
            f"candidate indices {indices} are not 0..{expected_n - 1}"
        )
    return sorted(candidates, key=lambda c: c.index)


@dataclass
class BatchDebugInfo:
    """Per-candidate, per-step top-k audit data from a debug batch response."""

    support_sizes: list[list[int]] = field(default_factory=list)
    token_ranks: list[list[int]] = field(default_factory=list)
