"""Shared data model: dialogue instances, candidates, scores, run configuration.

All types are frozen dataclasses; instances are safe to share between
concurrent workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

from .errors import DatasetError, ValidationError

COHERENCE_CONTEXT_MODES = ("full_history", "last_two")
PERSONA_AGGREGATIONS = ("max", "mean")


@dataclass(frozen=True)
class DialogueInstance:
    """One persona-dialogue example: persona sentences, history utterances, gold response.

    ``gold`` may be empty only for generation-only runs.
    """

    id: str
    persona: tuple[str, ...]
    history: tuple[str, ...]
    gold: str = ""

    def __post_init__(self):
        object.__setattr__(self, "persona", tuple(self.persona))
        object.__setattr__(self, "history", tuple(self.history))
        if not self.id:
            raise ValidationError("instance id must be non-empty")
        if not self.persona:
            raise ValidationError(f"instance {self.id!r}: persona must be non-empty")
        if not self.history:
            raise ValidationError(f"instance {self.id!r}: history must be non-empty")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "persona": list(self.persona),
            "history": list(self.history),
            "gold": self.gold,
        }


@dataclass(frozen=True)
class Candidate:
    """One sampled response with its sampling provenance.

    ``token_logprobs`` holds natural-log per-token probabilities taken from the
    renormalized top-k distribution at each step, when the backend supplies them.
    """

    text: str
    index: int
    token_count: int
    token_logprobs: tuple[float, ...] | None = None
    seed_stream: int = 0

    def __post_init__(self):
        if self.index < 0:
            raise ValidationError("candidate index must be >= 0")
        if self.token_count < 0:
            raise ValidationError("token_count must be >= 0")
        if self.token_logprobs is not None:
            object.__setattr__(self, "token_logprobs", tuple(self.token_logprobs))
            if len(self.token_logprobs) != self.token_count:
                raise ValidationError(
                    f"candidate {self.index}: token_logprobs length "
                    f"{len(self.token_logprobs)} != token_count {self.token_count}"
                )
            for lp in self.token_logprobs:
                if not (lp <= 1e-9):
                    raise ValidationError(
                        f"candidate {self.index}: token logprob {lp} > 0"
                    )

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "index": self.index,
            "token_count": self.token_count,
            "token_logprobs": None
            if self.token_logprobs is None
            else list(self.token_logprobs),
            "seed_stream": self.seed_stream,
        }

    @staticmethod
    def from_json(obj: dict) -> "Candidate":
        return Candidate(
            text=obj["text"],
            index=obj["index"],
            token_count=obj["token_count"],
            token_logprobs=None
            if obj.get("token_logprobs") is None
            else tuple(obj["token_logprobs"]),
            seed_stream=obj.get("seed_stream", 0),
        )


NLI_LABELS = ("entailment", "neutral", "contradiction")


@dataclass(frozen=True)
class ScoreRecord:
    """Per-candidate stage scores; absent stages stay ``None``."""

    candidate_index: int
    coherence_sim: float | None = None
    entailment_prob: float | None = None
    nli_label: str | None = None
    backward_loglik: float | None = None
    lls: float | None = None

    def __post_init__(self):
        if self.coherence_sim is not None and not -1.0 <= self.coherence_sim <= 1.0:
            raise ValidationError(f"coherence_sim {self.coherence_sim} outside [-1, 1]")
        if self.entailment_prob is not None and not 0.0 <= self.entailment_prob <= 1.0:
            raise ValidationError(
                f"entailment_prob {self.entailment_prob} outside [0, 1]"
            )
        if self.nli_label is not None and self.nli_label not in NLI_LABELS:
            raise ValidationError(f"unknown NLI label {self.nli_label!r}")
        if self.backward_loglik is not None and self.backward_loglik > 1e-9:
            raise ValidationError(
                f"backward_loglik {self.backward_loglik} must be <= 0"
            )

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PipelineConfig:
    """Run configuration for the two-stage pipeline.

    ``k`` is the top-k sampling width, ``s`` the oversample count per instance,
    ``c`` the number of coherence survivors handed to the consistency stage.
    ``use_coherence`` / ``use_consistency`` switch the two stages off for
    ablation runs.
    """

    k: int = 100
    s: int = 2000
    c: int = 100
    coherence_context: str = "full_history"
    master_seed: int = 0
    persona_aggregation: str = "max"
    max_tokens: int = 32
    use_coherence: bool = True
    use_consistency: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.s < 1:
            raise ValidationError(f"s must be >= 1, got {self.s}")
        if not 1 <= self.c <= self.s:
            raise ValidationError(f"c must satisfy 1 <= c <= s, got c={self.c} s={self.s}")
        if self.coherence_context not in COHERENCE_CONTEXT_MODES:
            raise ValidationError(
                f"coherence_context must be one of {COHERENCE_CONTEXT_MODES}"
            )
        if self.persona_aggregation not in PERSONA_AGGREGATIONS:
            raise ValidationError(
                f"persona_aggregation must be one of {PERSONA_AGGREGATIONS}"
            )
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError("master_seed must fit in an unsigned 64-bit integer")
        if self.max_tokens < 1:
            raise ValidationError("max_tokens must be >= 1")

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(obj: dict) -> "PipelineConfig":
        known = {f for f in PipelineConfig.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return PipelineConfig(**obj)


def load_dataset(path: str | Path, format: str = "jsonl") -> list[DialogueInstance]:
    """Load dialogue instances from a JSONL file, one object per line.

    Each line must carry ``id``, ``persona``, ``history`` and ``gold``.
    Rejects duplicate ids; reports malformed lines by line number.
    """
    if format != "jsonl":
        raise ValidationError(f"unsupported dataset format {format!r}")
    path = Path(path)
    instances: list[DialogueInstance] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DatasetError(f"{path}:{lineno}: expected a JSON object")
            missing = {"id", "persona", "history"} - set(obj)
            if missing:
                raise DatasetError(
                    f"{path}:{lineno}: missing fields {sorted(missing)}"
                )
            try:
                inst = DialogueInstance(
                    id=obj["id"],
                    persona=tuple(obj["persona"]),
                    history=tuple(obj["history"]),
                    gold=obj.get("gold", ""),
                )
            except ValidationError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            if inst.id in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate instance id {inst.id!r}")
            seen.add(inst.id)
            instances.append(inst)
    return instances


def save_dataset(instances: list[DialogueInstance], path: str | Path) -> None:
    """Write instances back out in the JSONL interchange format."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_json(), ensure_ascii=False) + "\n")


def coherence_context(instance: DialogueInstance, mode: str = "full_history") -> str:
    """Assemble the history document used by the coherence stage.

    ``full_history`` joins every utterance with single spaces; ``last_two``
    keeps only the final two utterances (clamped when the history is shorter).
    """
    if mode not in COHERENCE_CONTEXT_MODES:
        raise ValidationError(f"unknown coherence context mode {mode!r}")
    if not instance.history:
        raise ValidationError("history must be non-empty")
    utterances = instance.history if mode == "full_history" else instance.history[-2:]
    return " ".join(utterances)
