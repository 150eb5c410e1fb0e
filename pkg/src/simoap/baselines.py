"""Comparison rerankers: backward mutual-information and length-normalized loglikelihood.

MMI asks a backward model how well the candidate predicts the source
(persona sentences then history utterances, space-joined); LLS divides a
candidate's total natural-log likelihood by its token count so long responses
are not penalized for length alone.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import Candidate, DialogueInstance
from .errors import ProtocolError, TransportError, ValidationError


@dataclass(frozen=True)
class BackwardQuery:
    """Inputs to one backward-likelihood call."""

    response_text: str
    source_text: str


def backward_source(instance: DialogueInstance) -> str:
    """Source text the backward model must predict: persona first, then history."""
    return " ".join(instance.persona) + " " + " ".join(instance.history)


def mmi_rerank(
    backward_scorer,
    instance: DialogueInstance,
    candidates: list[Candidate],
    failures: list[tuple[int, str]] | None = None,
) -> list[tuple[int, float]]:
    """Order candidates by backward loglikelihood of the source, descending.

    The backward score is the unnormalized total loglikelihood (no length
    normalization); ties are broken by ascending candidate index. The first
    entry is the MMI selection.

    Backend failures (transport already retried by the client) drop the
    affected candidate from the ranking and are appended to ``failures``;
    only a fully failed batch raises.
    """
    if not candidates:
        raise ValidationError("candidate list must be non-empty")
    source = backward_source(instance)
    scored = []
    for cand in candidates:
        try:
            loglik, _ = backward_scorer.loglikelihood(cand.text, source)
        except (TransportError, ProtocolError) as exc:
            if failures is not None:
                failures.append((cand.index, str(exc)))
            continue
        scored.append((cand.index, float(loglik)))
    if not scored:
        raise TransportError("backward scoring failed for every candidate")
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored


def lls_score(total_loglik: float, token_count: int) -> float:
    """Length-normalized loglikelihood: total natural-log likelihood over tokens."""
    if token_count < 1:
        raise ValidationError(f"token_count must be >= 1, got {token_count}")
    return total_loglik / token_count


def lls_rerank(candidates: list[Candidate]) -> list[tuple[int, float]]:
    """Order candidates by length-normalized loglikelihood, descending.

    Every candidate must carry per-token logprobs; ties are broken by
    ascending candidate index.
    """
    if not candidates:
        raise ValidationError("candidate list must be non-empty")
    scored = []
    for cand in candidates:
        if cand.token_logprobs is None:
            raise ValidationError(
                f"candidate {cand.index} has no token_logprobs; cannot compute LLS"
            )
        if cand.token_count < 1:
            raise ValidationError(
                f"candidate {cand.index} has zero tokens; LLS undefined"
            )
        scored.append((cand.index, lls_score(sum(cand.token_logprobs), cand.token_count)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored
