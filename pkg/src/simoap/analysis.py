"""Rank-bucket analyses: where do good responses sit in a perplexity ranking,
and which ranks does the pipeline actually pick?

Candidates are sorted per instance by ascending perplexity (rank 1 = most
fluent under the scoring model), ranks are cut into equal buckets, and each
bucket reports its fraction of "good" candidates: similarity to the gold
above one threshold and persona entailment above another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class CandidateOutcome:
    """Per-candidate measurements feeding the rank analysis."""

    ppl: float
    sim_to_gold: float
    entailment_prob: float

    def __post_init__(self):
        if math.isnan(self.ppl):
            raise ValidationError("candidate PPL is NaN")


@dataclass(frozen=True)
class InstanceOutcomes:
    """All candidate outcomes of one instance plus the pipeline's selection."""

    instance_id: str
    candidates: tuple[CandidateOutcome, ...]
    selected_index: int

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise ValidationError(f"instance {self.instance_id!r} has no candidates")
        if not 0 <= self.selected_index < len(self.candidates):
            raise ValidationError(
                f"instance {self.instance_id!r}: selected index "
                f"{self.selected_index} out of range"
            )


@dataclass(frozen=True)
class RankAnalysis:
    bucket_edges: tuple[int, ...]
    good_ratio_per_bucket: tuple[float, ...]
    selected_rank_histogram: tuple[int, ...]
    mean_selected_rank: float

    def to_json(self) -> dict:
        return {
            "bucket_edges": list(self.bucket_edges),
            "good_ratio_per_bucket": list(self.good_ratio_per_bucket),
            "selected_rank_histogram": list(self.selected_rank_histogram),
            "mean_selected_rank": self.mean_selected_rank,
        }


def _ppl_ranks(candidates: tuple[CandidateOutcome, ...]) -> list[int]:
    """1-based PPL rank per candidate index; ties keep ascending index order."""
    order = sorted(range(len(candidates)), key=lambda i: (candidates[i].ppl, i))
    ranks = [0] * len(candidates)
    for rank, idx in enumerate(order, start=1):
        ranks[idx] = rank
    return ranks


def rank_analysis(
    instances: list[InstanceOutcomes],
    sim_threshold: float,
    entail_threshold: float,
    bucket_count: int,
) -> RankAnalysis:
    """Bucket the PPL ranking and measure good-response density per bucket.

    All instances must have the same candidate count. A candidate is good
    when its similarity to the gold exceeds ``sim_threshold`` and its
    entailment probability exceeds ``entail_threshold`` (both strictly).
    """
    if not instances:
        raise ValidationError("need at least one instance")
    for threshold in (sim_threshold, entail_threshold):
        if not 0.0 < threshold < 1.0:
            raise ValidationError(f"threshold {threshold} must lie in (0, 1)")
    n = len(instances[0].candidates)
    for inst in instances:
        if len(inst.candidates) != n:
            raise ValidationError(
                f"instance {inst.instance_id!r} has {len(inst.candidates)} "
                f"candidates, expected {n}"
            )
    if not 1 <= bucket_count <= n:
        raise ValidationError(f"bucket_count must lie in 1..{n}, got {bucket_count}")

    edges = [(b * n) // bucket_count for b in range(bucket_count + 1)]

    def bucket_of(rank: int) -> int:
        for b in range(bucket_count):
            if edges[b] < rank <= edges[b + 1]:
                return b
        raise AssertionError(f"rank {rank} fell outside the bucket edges {edges}")

    good_counts = [0] * bucket_count
    totals = [0] * bucket_count
    histogram = [0] * bucket_count
    selected_ranks: list[int] = []

    for inst in instances:
        ranks = _ppl_ranks(inst.candidates)
        for idx, cand in enumerate(inst.candidates):
            b = bucket_of(ranks[idx])
            totals[b] += 1
            if cand.sim_to_gold > sim_threshold and cand.entailment_prob > entail_threshold:
                good_counts[b] += 1
        sel_rank = ranks[inst.selected_index]
        selected_ranks.append(sel_rank)
        histogram[bucket_of(sel_rank)] += 1

    ratios = [
        good_counts[b] / totals[b] if totals[b] else 0.0 for b in range(bucket_count)
    ]
    return RankAnalysis(
        bucket_edges=tuple(edges),
        good_ratio_per_bucket=tuple(ratios),
        selected_rank_histogram=tuple(histogram),
        mean_selected_rank=sum(selected_ranks) / len(selected_ranks),
    )
