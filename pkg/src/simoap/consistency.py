"""Consistency stage: entailment scoring against persona sentences, then argmax.

The premise is always a persona sentence and the hypothesis the candidate
response; consistency asks whether the persona supports the response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ScoreRecord
from .errors import ProtocolError, ValidationError

_NLI_TOL = 1e-6


@dataclass(frozen=True)
class NliJudgment:
    """Class probabilities of one premise/hypothesis pair; must sum to 1."""

    entailment: float
    neutral: float
    contradiction: float

    def __post_init__(self):
        for name, p in (
            ("entailment", self.entailment),
            ("neutral", self.neutral),
            ("contradiction", self.contradiction),
        ):
            if not (math.isfinite(p) and -1e-9 <= p <= 1.0 + 1e-9):
                raise ProtocolError(f"NLI {name} probability {p} outside [0, 1]")
        total = self.entailment + self.neutral + self.contradiction
        if abs(total - 1.0) > _NLI_TOL:
            raise ProtocolError(f"NLI probabilities sum to {total}, expected 1")

    def argmax_label(self) -> str:
        """Most probable label; ties resolve entailment > neutral > contradiction."""
        best = max(
            (("entailment", self.entailment), ("neutral", self.neutral),
             ("contradiction", self.contradiction)),
            key=lambda kv: kv[1],
        )
        return best[0]


def persona_entailment(
    scorer,
    persona: list[str] | tuple[str, ...],
    candidate_text: str,
    aggregation: str = "max",
) -> tuple[float, str]:
    """Score one candidate against every persona sentence.

    Queries the scorer once per sentence (premise = sentence, hypothesis =
    candidate) and aggregates the entailment probabilities by ``max`` or
    ``mean``. The returned label always comes from the sentence with the
    highest entailment probability (first such sentence on ties).
    """
    if not persona:
        raise ValidationError("persona must be non-empty")
    if aggregation not in ("max", "mean"):
        raise ValidationError(f"unknown aggregation {aggregation!r}")
    judgments = [scorer.nli(premise, candidate_text) for premise in persona]
    probs = [j.entailment for j in judgments]
    best_idx = max(range(len(probs)), key=lambda i: (probs[i], -i))
    label = judgments[best_idx].argmax_label()
    if aggregation == "max":
        return probs[best_idx], label
    return sum(probs) / len(probs), label


def select_final(scored: list[ScoreRecord]) -> int:
    """Pick the candidate with the highest entailment probability.

    Ties prefer the higher coherence similarity, then the lower candidate
    index. Records without a coherence score (coherence stage disabled) rank
    below any record that has one.
    """
    if not scored:
        raise ValidationError("cannot select from an empty score list")
    for rec in scored:
        if rec.entailment_prob is None:
            raise ValidationError(
                f"candidate {rec.candidate_index} has no entailment probability"
            )

    def key(rec: ScoreRecord):
        sim = rec.coherence_sim if rec.coherence_sim is not None else float("-inf")
        return (-rec.entailment_prob, -sim, rec.candidate_index)

    return min(scored, key=key).candidate_index
