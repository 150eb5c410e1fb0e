"""Coherence stage: TF-IDF document ranking of candidates against the history.

The corpus is the history document plus one document per candidate. Term
frequency is raw count over document length; inverse document frequency is
``log10(doc_count / (1 + docs_containing_term))``. The add-one smoothing in
the denominator means a term occurring in (almost) every document gets a
*negative* idf; that is kept as-is rather than clamped, because clamping
would change rankings of corpora dominated by shared terms.

Rankings are invariant to the logarithm base (a base change rescales every
vector by one positive constant, leaving cosines untouched); ``log_base``
exists so tests can demonstrate that.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass

import numpy as np

from .core import Candidate, ScoreRecord
from .errors import ValidationError

_PUNCT = string.punctuation


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties.

    Deliberately minimal: no stemming, no stop words, so that the same
    tokenizer serves the coherence corpus and the diversity metrics.
    """
    tokens = []
    for raw in text.lower().split():
        tok = raw.strip(_PUNCT)
        if tok:
            tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class TfidfModel:
    """Weighted document vectors for one corpus.

    Document 0 is the history document; documents 1..n are the candidates in
    index order. ``doc_vectors`` has shape (doc_count, vocabulary size); a
    document with zero tokens gets the all-zero row.
    """

    vocabulary: tuple[str, ...]
    idf: np.ndarray
    doc_vectors: np.ndarray
    doc_count: int

    def __post_init__(self):
        if self.doc_vectors.shape != (self.doc_count, len(self.vocabulary)):
            raise ValidationError(
                f"doc_vectors shape {self.doc_vectors.shape} inconsistent with "
                f"{self.doc_count} documents over {len(self.vocabulary)} terms"
            )


def _log(value: float, base: float) -> float:
    if base == 10.0:
        return math.log10(value)
    if base == math.e:
        return math.log(value)
    return math.log(value) / math.log(base)


def build_tfidf(
    h_document: str,
    candidates: list[Candidate] | list[str],
    log_base: float = 10.0,
) -> TfidfModel:
    """Build the corpus model for one instance.

    ``candidates`` may be Candidate objects or plain strings; either way each
    one becomes its own document after the history document.
    """
    if not candidates:
        raise ValidationError("candidate list must be non-empty")
    texts = [h_document] + [
        c.text if isinstance(c, Candidate) else c for c in candidates
    ]
    doc_tokens = [tokenize(t) for t in texts]

    vocabulary: list[str] = []
    term_index: dict[str, int] = {}
    for tokens in doc_tokens:
        for tok in tokens:
            if tok not in term_index:
                term_index[tok] = len(vocabulary)
                vocabulary.append(tok)

    doc_count = len(texts)
    vocab_size = len(vocabulary)

    df = np.zeros(vocab_size, dtype=np.int64)
    for tokens in doc_tokens:
        for idx in {term_index[t] for t in tokens}:
            df[idx] += 1

    idf = np.array(
        [_log(doc_count / (1 + int(d)), log_base) for d in df], dtype=np.float64
    )

    vectors = np.zeros((doc_count, vocab_size), dtype=np.float64)
    for j, tokens in enumerate(doc_tokens):
        if not tokens:
            continue
        length = len(tokens)
        counts: dict[int, int] = {}
        for tok in tokens:
            idx = term_index[tok]
            counts[idx] = counts.get(idx, 0) + 1
        for idx, n in counts.items():
            vectors[j, idx] = (n / length) * idf[idx]

    return TfidfModel(
        vocabulary=tuple(vocabulary),
        idf=idf,
        doc_vectors=vectors,
        doc_count=doc_count,
    )


def cosine(u, v) -> float:
    """Cosine similarity; 0.0 whenever either vector has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValidationError(f"vector length mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    sim = float(np.dot(u, v) / (nu * nv))
    # guard against float drift outside [-1, 1]
    return max(-1.0, min(1.0, sim))


def candidate_similarities(model: TfidfModel) -> list[float]:
    """Cosine of every candidate document against the history document."""
    return [
        cosine(model.doc_vectors[0], model.doc_vectors[j])
        for j in range(1, model.doc_count)
    ]


def coherence_rank(model: TfidfModel, c: int) -> list[tuple[int, float]]:
    """Keep the ``c`` candidates most similar to the history document.

    Returns (candidate_index, similarity) pairs sorted by similarity
    descending, ties broken by ascending candidate index. Candidate indices
    are the 0-based positions in the candidate list passed to build_tfidf.
    """
    n_candidates = model.doc_count - 1
    if not 1 <= c <= n_candidates:
        raise ValidationError(f"c must satisfy 1 <= c <= {n_candidates}, got {c}")
    sims = candidate_similarities(model)
    order = sorted(range(n_candidates), key=lambda i: (-sims[i], i))
    return [(i, sims[i]) for i in order[:c]]


def rank_to_records(ranked: list[tuple[int, float]]) -> list[ScoreRecord]:
    return [
        ScoreRecord(candidate_index=i, coherence_sim=sim) for i, sim in ranked
    ]
