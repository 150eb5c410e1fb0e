"""Over-sampling stage: large-scale top-k sampling with deterministic RNG streams.

Every candidate draws from its own counter-based Philox stream keyed by
(master seed, instance id, candidate index), so results are identical no
matter how the work is scheduled across workers.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .core import Candidate, DialogueInstance, PipelineConfig
from .errors import ProtocolError, ValidationError

_DIST_TOL = 1e-6


@dataclass(frozen=True)
class TokenDistribution:
    """One next-token distribution: parallel token ids and natural-log probs.

    Probabilities must sum to 1 within 1e-6 after exponentiation; token ids
    must be unique.
    """

    token_ids: tuple[int, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "token_ids", tuple(self.token_ids))
        object.__setattr__(self, "logprobs", tuple(self.logprobs))
        validate_distribution(self.token_ids, self.logprobs)

    def probs(self) -> np.ndarray:
        return np.exp(np.asarray(self.logprobs, dtype=np.float64))


def validate_distribution(token_ids, logprobs) -> None:
    """Reject malformed distributions before they reach pipeline logic."""
    if len(token_ids) != len(logprobs):
        raise ProtocolError(
            f"token_ids length {len(token_ids)} != logprobs length {len(logprobs)}"
        )
    if len(token_ids) == 0:
        raise ProtocolError("empty token distribution")
    if len(set(token_ids)) != len(token_ids):
        raise ProtocolError("duplicate token ids in distribution")
    total = 0.0
    for lp in logprobs:
        if not math.isfinite(lp) and lp != float("-inf"):
            raise ProtocolError(f"non-finite logprob {lp}")
        if lp > 1e-9:
            raise ProtocolError(f"logprob {lp} > 0")
        total += math.exp(lp)
    if abs(total - 1.0) > _DIST_TOL:
        raise ProtocolError(f"distribution sums to {total}, expected 1 within {_DIST_TOL}")


@dataclass(frozen=True)
class SamplingRun:
    """All candidates sampled for one instance, plus provenance and timing.

    ``wall_time_generation`` is process metadata: it is carried in memory and
    in run reports but excluded from the candidate cache serialization so that
    reruns stay byte-identical.
    """

    instance_id: str
    candidates: tuple[Candidate, ...]
    k: int
    s: int
    master_seed: int
    backend_id: str
    wall_time_generation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        indices = sorted(c.index for c in self.candidates)
        if indices != list(range(len(self.candidates))):
            raise ValidationError(
                f"run {self.instance_id!r}: candidate indices must be "
                f"0..{len(self.candidates) - 1} exactly once"
            )

    def cache_key(self) -> tuple:
        return (self.instance_id, self.backend_id, self.k, self.s, self.master_seed)

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "backend_id": self.backend_id,
            "k": self.k,
            "s": self.s,
            "master_seed": self.master_seed,
            "candidates": [c.to_json() for c in sorted(self.candidates, key=lambda c: c.index)],
        }

    @staticmethod
    def from_json(obj: dict) -> "SamplingRun":
        return SamplingRun(
            instance_id=obj["instance_id"],
            candidates=tuple(Candidate.from_json(c) for c in obj["candidates"]),
            k=obj["k"],
            s=obj["s"],
            master_seed=obj["master_seed"],
            backend_id=obj["backend_id"],
        )


def hash64(*parts) -> int:
    """Deterministic 64-bit stream key from heterogeneous parts (SHA-256 based)."""
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def stream_rng(stream_seed: int) -> np.random.Generator:
    """Counter-based generator for one candidate's stream."""
    return np.random.Generator(np.random.Philox(key=stream_seed))


def top_k_filter(dist: TokenDistribution, k: int) -> TokenDistribution:
    """Keep the k most probable entries and renormalize.

    Boundary ties are broken by ascending token id, so permuting
    equal-probability entries of the input never changes the selected set.
    Output entries are in canonical order: probability descending, then token
    id ascending. When k covers the whole distribution the entries are only
    reordered/renormalized, never dropped.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    order = sorted(
        range(len(dist.token_ids)),
        key=lambda i: (-dist.logprobs[i], dist.token_ids[i]),
    )
    keep = order[: min(k, len(order))]
    kept_lps = np.asarray([dist.logprobs[i] for i in keep], dtype=np.float64)
    # renormalize in log space: subtract logsumexp
    m = float(np.max(kept_lps))
    lse = m + math.log(float(np.sum(np.exp(kept_lps - m))))
    return TokenDistribution(
        token_ids=tuple(dist.token_ids[i] for i in keep),
        logprobs=tuple(float(lp - lse) for lp in kept_lps),
    )


def draw_token(dist: TokenDistribution, rng: np.random.Generator) -> tuple[int, float]:
    """Draw one token by inverse CDF over the distribution's entry order."""
    u = rng.random()
    cum = 0.0
    probs = dist.probs()
    for tok, lp, p in zip(dist.token_ids, dist.logprobs, probs):
        cum += p
        if u < cum:
            return tok, float(lp)
    # float underflow at the tail: the total mass is 1 within tolerance
    return dist.token_ids[-1], float(dist.logprobs[-1])


def sample_sequence(
    backend,
    context: str,
    k: int,
    stream_seed: int,
    max_tokens: int = 32,
) -> Candidate:
    """Generate one candidate by step-wise top-k sampling.

    Queries the backend's next-token distribution at every step, filters to
    the top k, and draws from the renormalized distribution using the
    candidate's own Philox stream. Stops at the backend's end-of-sequence
    token or after ``max_tokens`` tokens; the EOS token itself is not recorded.
    """
    if max_tokens < 1:
        raise ValidationError("max_tokens must be >= 1")
    rng = stream_rng(stream_seed)
    context_ids = list(backend.encode(context))
    generated: list[int] = []
    logprobs: list[float] = []
    while len(generated) < max_tokens:
        dist = backend.next_token_dist(context_ids + generated)
        filtered = top_k_filter(dist, k)
        tok, lp = draw_token(filtered, rng)
        if tok == backend.eos_id:
            break
        generated.append(tok)
        logprobs.append(lp)
    return Candidate(
        text=backend.decode(generated),
        index=0,
        token_count=len(generated),
        token_logprobs=tuple(logprobs),
        seed_stream=stream_seed,
    )


def instance_seed(master_seed: int, instance_id: str) -> int:
    """Base seed sent to server-side batch sampling for one instance."""
    return hash64(master_seed, instance_id)


def candidate_stream_seed(master_seed: int, instance_id: str, index: int) -> int:
    """Stream key for step-wise sampling of one candidate."""
    return hash64(master_seed, instance_id, index)


def generation_context(instance: DialogueInstance) -> str:
    """Context string handed to generation backends: persona then history.

    How a backend consumes this (truncation, last-utterance-only policies,
    internal decoding tricks) is the backend's own business.
    """
    return " ".join(instance.persona) + " " + " ".join(instance.history)


def oversample(backend, instance: DialogueInstance, config: PipelineConfig) -> SamplingRun:
    """Produce the full candidate set for one instance.

    Prefers a single server-side batch request when the backend advertises
    batch sampling (provenance then records backend-side seeds); otherwise
    samples step by step with one deterministic stream per candidate.
    """
    context = generation_context(instance)
    start = time.perf_counter()
    if "batch_sample" in getattr(backend, "capabilities", set()):
        seed = instance_seed(config.master_seed, instance.id)
        candidates = backend.batch_sample(
            context, config.k, config.s, seed, max_tokens=config.max_tokens
        )
        if len(candidates) != config.s:
            raise ProtocolError(
                f"batch sampling returned {len(candidates)} candidates, expected {config.s}"
            )
    else:
        candidates = []
        for i in range(config.s):
            stream = candidate_stream_seed(config.master_seed, instance.id, i)
            cand = sample_sequence(
                backend, context, config.k, stream, max_tokens=config.max_tokens
            )
            candidates.append(replace(cand, index=i))
    elapsed = time.perf_counter() - start
    return SamplingRun(
        instance_id=instance.id,
        candidates=tuple(candidates),
        k=config.k,
        s=config.s,
        master_seed=config.master_seed,
        backend_id=getattr(backend, "backend_id", "unknown"),
        wall_time_generation=elapsed,
    )
