"""Deterministic in-process backends: a bigram language model, a lexical NLI
scorer, and a character-length loglikelihood scorer.

These are pure given (inputs, seed) and fast enough to run the whole pipeline
and test suite offline at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import replace

from ..coherence import tokenize
from ..consistency import NliJudgment
from ..core import Candidate
from ..errors import ValidationError
from ..sampling import TokenDistribution, draw_token, sample_sequence, stream_rng, top_k_filter

_ROW_TOL = 1e-9


class MockBigramLM:
    """Word-bigram generator driven by an explicit transition table.

    The next-token distribution depends only on the last token (the start
    symbol when the context is empty). A term without a table row is
    terminal: its distribution is all end-of-sequence. Token ids are the
    sorted-vocabulary positions, so the top-k ascending-id tie-break is the
    alphabetical one.
    """

    capabilities = frozenset({"next_token_dist", "batch_sample"})

    def __init__(
        self,
        table: dict[str, dict[str, float]],
        eos_term: str = "<eos>",
        start_term: str = "<s>",
        backend_id: str = "mock-bigram",
    ):
        if start_term not in table:
            raise ValidationError(f"table must define a row for {start_term!r}")
        for term, row in table.items():
            if not row:
                raise ValidationError(f"row {term!r} is empty")
            total = sum(row.values())
            if abs(total - 1.0) > _ROW_TOL:
                raise ValidationError(
                    f"row {term!r} sums to {total}, expected 1 within {_ROW_TOL}"
                )
            for p in row.values():
                if p <= 0:
                    raise ValidationError(f"row {term!r} has non-positive probability")
        self.table = {term: dict(row) for term, row in table.items()}
        self.eos_term = eos_term
        self.start_term = start_term
        self.backend_id = backend_id

        vocab = set(table) | {eos_term, start_term}
        for row in table.values():
            vocab.update(row)
        self.vocabulary = sorted(vocab)
        self._term_to_id = {t: i for i, t in enumerate(self.vocabulary)}
        self._id_to_term = dict(enumerate(self.vocabulary))

    @property
    def eos_id(self) -> int:
        return self._term_to_id[self.eos_term]

    def encode(self, context: str) -> list[int]:
        ids = [self._term_to_id[t] for t in tokenize(context) if t in self._term_to_id]
        return ids or [self._term_to_id[self.start_term]]

    def decode(self, token_ids: list[int]) -> str:
        return " ".join(self._id_to_term[t] for t in token_ids)

    def next_token_dist(self, context_tokens: list[int]) -> TokenDistribution:
        if context_tokens:
            term = self._id_to_term[context_tokens[-1]]
        else:
            term = self.start_term
        row = self.table.get(term)
        if row is None:
            row = {self.eos_term: 1.0}
        items = sorted(row.items(), key=lambda kv: self._term_to_id[kv[0]])
        return TokenDistribution(
            token_ids=tuple(self._term_to_id[t] for t, _ in items),
            logprobs=tuple(math.log(p) for _, p in items),
        )

    def batch_sample(
        self,
        context: str,
        k: int,
        n: int,
        seed: int,
        max_tokens: int = 32,
        collect_debug: bool = False,
    ):
        """Sample n candidates server-side; candidate i uses stream (seed + i) mod 2^64.

        With ``collect_debug`` the per-step top-k support sizes and sampled
        token ranks are returned alongside the candidates.
        """
        if n < 1:
            raise ValidationError(f"n must be >= 1, got {n}")
        candidates = []
        support_sizes: list[list[int]] = []
        token_ranks: list[list[int]] = []
        for i in range(n):
            stream = (seed + i) % (2**64)
            if collect_debug:
                cand, sizes, ranks = _sample_traced(self, context, k, stream, max_tokens)
                support_sizes.append(sizes)
                token_ranks.append(ranks)
            else:
                cand = sample_sequence(self, context, k, stream, max_tokens=max_tokens)
            candidates.append(replace(cand, index=i))
        if collect_debug:
            return candidates, support_sizes, token_ranks
        return candidates


def _sample_traced(backend, context: str, k: int, stream_seed: int, max_tokens: int):
    """sample_sequence with a per-step audit trail of the top-k support."""
    rng = stream_rng(stream_seed)
    context_ids = list(backend.encode(context))
    generated: list[int] = []
    logprobs: list[float] = []
    sizes: list[int] = []
    ranks: list[int] = []
    while len(generated) < max_tokens:
        dist = backend.next_token_dist(context_ids + generated)
        filtered = top_k_filter(dist, k)
        tok, lp = draw_token(filtered, rng)
        sizes.append(len(filtered.token_ids))
        ranks.append(filtered.token_ids.index(tok) + 1)
        if tok == backend.eos_id:
            break
        generated.append(tok)
        logprobs.append(lp)
    cand = Candidate(
        text=backend.decode(generated),
        index=0,
        token_count=len(generated),
        token_logprobs=tuple(logprobs),
        seed_stream=stream_seed,
    )
    return cand, sizes, ranks


class LexicalOverlapNli:
    """Token-overlap NLI stand-in.

    Entailment is the Jaccard overlap of premise and hypothesis token sets;
    the remaining mass splits 2:1 between neutral and contradiction. Two
    empty texts count as disjoint.
    """

    capabilities = frozenset({"nli"})

    def __init__(self, backend_id: str = "mock-nli-lexical"):
        self.backend_id = backend_id

    def nli(self, premise: str, hypothesis: str) -> NliJudgment:
        a = set(tokenize(premise))
        b = set(tokenize(hypothesis))
        union = a | b
        overlap = len(a & b) / len(union) if union else 0.0
        rest = 1.0 - overlap
        return NliJudgment(
            entailment=overlap,
            neutral=rest * 2.0 / 3.0,
            contradiction=rest / 3.0,
        )


class CharLenScorer:
    """Loglikelihood stand-in: -(continuation characters)/4, word-count tokens."""

    capabilities = frozenset({"loglikelihood"})

    def __init__(self, backend_id: str = "mock-charlen"):
        self.backend_id = backend_id

    def loglikelihood(self, context: str, continuation: str) -> tuple[float, int]:
        if not continuation.strip():
            raise ValidationError("continuation must be non-empty")
        return -len(continuation) / 4.0, len(continuation.split())


def demo_bigram_table() -> dict[str, dict[str, float]]:
    """Small persona-chat-flavored table for demos and tests."""
    return {
        "<s>": {"i": 0.6, "my": 0.25, "yes": 0.15},
        "i": {"play": 0.4, "like": 0.3, "am": 0.2, "sing": 0.1},
        "play": {"piano": 0.5, "guitar": 0.3, "music": 0.2},
        "like": {"music": 0.5, "folk": 0.3, "piano": 0.2},
        "am": {"a": 1.0},
        "a": {"musician": 0.7, "custodian": 0.3},
        "musician": {"<eos>": 1.0},
        "custodian": {"<eos>": 1.0},
        "piano": {"<eos>": 0.7, "and": 0.3},
        "guitar": {"<eos>": 1.0},
        "and": {"guitar": 0.6, "sing": 0.4},
        "sing": {"<eos>": 0.6, "folk": 0.4},
        "folk": {"music": 1.0},
        "music": {"<eos>": 1.0},
        "my": {"favorite": 1.0},
        "favorite": {"music": 0.5, "instrument": 0.5},
        "instrument": {"is": 0.6, "<eos>": 0.4},
        "is": {"piano": 0.5, "guitar": 0.5},
        "yes": {"i": 0.5, "<eos>": 0.5},
        "do": {"you": 1.0},
        "you": {"play": 0.7, "sing": 0.3},
        "what": {"do": 1.0},
        "instruments": {"do": 1.0},
    }


_INPROCESS = {
    "bigram": lambda: MockBigramLM(demo_bigram_table(), backend_id="inprocess:bigram"),
    "nli-lexical": lambda: LexicalOverlapNli(backend_id="inprocess:nli-lexical"),
    "charlen": lambda: CharLenScorer(backend_id="inprocess:charlen"),
}


def resolve_inprocess(name: str):
    """Instantiate a named in-process mock ('bigram', 'nli-lexical', 'charlen')."""
    try:
        factory = _INPROCESS[name]
    except KeyError:
        raise ValidationError(
            f"unknown in-process backend {name!r}; "
            f"known: {sorted(_INPROCESS)}"
        ) from None
    return factory()
