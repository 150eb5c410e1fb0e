"""Automatic metrics: distinct-n, repetition rate, PPL aggregation, consistency
score, and min-max normalized summary averages.

Distinct-n is corpus-level: unique token n-grams over total n-grams across
all responses. The repetition rate counts a response when its normalized
text duplicates at least one other response while differing from its own
gold. PPL aggregation optionally drops per-response values above a threshold
(the small-vocabulary scorer channel uses 10,000) before averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

from .coherence import tokenize
from .errors import AggregationError, ValidationError

PPL_FILTER_DEFAULT = 10_000.0

# raw metric columns in report order; (name, higher_is_better)
INDICATOR_COLUMNS = (
    ("ppl_a", False),
    ("ppl_b", False),
    ("dis1", True),
    ("dis2", True),
    ("c_score", True),
)
REP_COLUMN = ("rep", False)


@dataclass(frozen=True)
class SystemResults:
    """One system's responses and raw metric values, ready for comparison.

    ``block`` groups systems sharing a generation backbone; per-block
    normalization uses it.
    """

    system_name: str
    responses: tuple[tuple[str, str], ...]  # (instance_id, response_text)
    ppl_a: float
    ppl_b: float
    dis1: float
    dis2: float
    c_score: float
    rep: float
    generation_seconds: float = 0.0
    evaluation_seconds: float = 0.0
    block: str = ""

    def __post_init__(self):
        object.__setattr__(
            self, "responses", tuple((i, r) for i, r in self.responses)
        )
        if not 0.0 <= self.dis1 <= 1.0 or not 0.0 <= self.dis2 <= 1.0:
            raise ValidationError("distinct scores must lie in [0, 1]")
        if not 0.0 <= self.rep <= 1.0:
            raise ValidationError("repetition rate must lie in [0, 1]")
        if not -1.0 <= self.c_score <= 1.0:
            raise ValidationError("consistency score must lie in [-1, 1]")

    def to_json(self) -> dict:
        obj = asdict(self)
        obj["responses"] = [list(pair) for pair in self.responses]
        return obj

    @staticmethod
    def from_json(obj: dict) -> "SystemResults":
        obj = dict(obj)
        obj["responses"] = tuple((i, r) for i, r in obj["responses"])
        return SystemResults(**obj)


def _ngrams(tokens: list[str], n: int):
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def distinct_n(responses: list[str], n: int) -> float:
    """Unique token n-grams over total n-grams across all responses; 0 if none."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    total = 0
    unique = set()
    for text in responses:
        grams = _ngrams(tokenize(text), n)
        total += len(grams)
        unique.update(grams)
    if total == 0:
        return 0.0
    return len(unique) / total


def _normalize_text(text: str) -> str:
    return " ".join(text.split())


def repetition_rate(responses: list[str], golds: list[str]) -> float:
    """Fraction of responses that duplicate another response yet differ from their gold."""
    if len(responses) != len(golds):
        raise ValidationError(
            f"responses ({len(responses)}) and golds ({len(golds)}) length mismatch"
        )
    if not responses:
        raise ValidationError("need at least one response")
    normalized = [_normalize_text(r) for r in responses]
    counts: dict[str, int] = {}
    for text in normalized:
        counts[text] = counts.get(text, 0) + 1
    n_rep = 0
    for text, gold in zip(normalized, golds):
        if counts[text] >= 2 and text != _normalize_text(gold):
            n_rep += 1
    return n_rep / len(responses)


def ppl_aggregate(
    per_response_ppl: list[float], filter_threshold: float | None = None
) -> float:
    """Mean per-response perplexity, after dropping entries above the threshold.

    The threshold exists for scorers with small vocabularies, where
    out-of-vocabulary words blow single responses up to astronomic values.
    """
    if not per_response_ppl:
        raise ValidationError("need at least one perplexity value")
    values = per_response_ppl
    if filter_threshold is not None:
        values = [p for p in per_response_ppl if p <= filter_threshold]
        if not values:
            raise AggregationError(
                f"every perplexity exceeded the filter threshold {filter_threshold}"
            )
    return sum(values) / len(values)


_CONSISTENCY_VALUES = {"entailment": 1, "neutral": 0, "contradiction": -1}


def consistency_score(label: str) -> int:
    """Map an NLI label to its consistency contribution: 1, 0, or -1."""
    try:
        return _CONSISTENCY_VALUES[label]
    except KeyError:
        raise ValidationError(f"unknown NLI label {label!r}") from None


def c_mean(labels: list[str]) -> float:
    """Mean consistency contribution over responses."""
    if not labels:
        raise ValidationError("need at least one label")
    return sum(consistency_score(l) for l in labels) / len(labels)


def _minmax_normalize(values: list[float], higher_is_better: bool) -> list[float]:
    """Min-max to [0, 1]; lower-is-better columns are negated first.

    A constant column carries no ranking information and maps to 0.5.
    """
    oriented = values if higher_is_better else [-v for v in values]
    lo, hi = min(oriented), max(oriented)
    if hi == lo:
        return [0.5] * len(values)
    return [(v - lo) / (hi - lo) for v in oriented]


def normalized_averages(
    table: list[SystemResults], grouping: str = "per_block"
) -> dict[str, tuple[float, float]]:
    """Per-system (avg, avg_r) after within-group min-max normalization.

    ``avg`` averages the normalized {-ppl_a, -ppl_b, dis1, dis2, c_score}
    columns; ``avg_r`` additionally includes normalized -rep. ``per_block``
    normalizes within systems sharing a block; ``global`` over the whole table.
    """
    if grouping not in ("per_block", "global"):
        raise ValidationError(f"unknown grouping {grouping!r}")
    groups: dict[str, list[SystemResults]] = {}
    for row in table:
        key = row.block if grouping == "per_block" else ""
        groups.setdefault(key, []).append(row)

    result: dict[str, tuple[float, float]] = {}
    for rows in groups.values():
        if len(rows) < 2:
            raise ValidationError(
                "min-max normalization needs at least 2 systems per group; "
                f"got {[r.system_name for r in rows]}"
            )
        normalized: dict[str, list[float]] = {}
        for name, higher in INDICATOR_COLUMNS + (REP_COLUMN,):
            normalized[name] = _minmax_normalize(
                [getattr(r, name) for r in rows], higher
            )
        for i, row in enumerate(rows):
            avg_cols = [normalized[name][i] for name, _ in INDICATOR_COLUMNS]
            avg = sum(avg_cols) / len(avg_cols)
            avg_r_cols = avg_cols + [normalized["rep"][i]]
            avg_r = sum(avg_r_cols) / len(avg_r_cols)
            result[row.system_name] = (avg, avg_r)
    return result
