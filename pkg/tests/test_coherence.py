import math
import random

import numpy as np
import pytest

from simoap.coherence import (
    build_tfidf,
    candidate_similarities,
    coherence_rank,
    cosine,
    tokenize,
)
from simoap.errors import ValidationError

LOG10_3_2 = math.log10(3 / 2)


def test_tokenize_strips_case_and_punctuation():
    assert tokenize("I play the Piano!") == ["i", "play", "the", "piano"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_collapses_whitespace():
    assert tokenize("a  b\tb") == ["a", "b", "b"]


def test_build_tfidf_hand_example():
    # corpus: "a b b" (history), "a c", "d d"
    model = build_tfidf("a b b", ["a c", "d d"])
    assert model.vocabulary == ("a", "b", "c", "d")
    assert model.doc_count == 3
    np.testing.assert_allclose(model.idf, [0.0, LOG10_3_2, LOG10_3_2, LOG10_3_2])
    np.testing.assert_allclose(
        model.doc_vectors[0], [0.0, (2 / 3) * LOG10_3_2, 0.0, 0.0], atol=1e-12
    )
    assert abs(model.doc_vectors[0][1] - 0.11740) < 1e-5


def test_build_tfidf_negative_idf_kept():
    # "a" appears in every document, so its idf is negative and stays negative
    model = build_tfidf("a b", ["a c"])
    a = model.vocabulary.index("a")
    assert model.idf[a] == pytest.approx(math.log10(2 / 3))
    assert model.idf[a] < 0
    assert model.doc_vectors[0][a] == pytest.approx(0.5 * math.log10(2 / 3))
    assert abs(model.doc_vectors[0][a] - (-0.08805)) < 5e-6


def test_build_tfidf_zero_token_document():
    model = build_tfidf("", ["only"])
    assert np.all(model.doc_vectors[0] == 0.0)


def test_build_tfidf_requires_candidates():
    with pytest.raises(ValidationError):
        build_tfidf("a", [])


def test_cosine_basics():
    assert cosine((1, 2, 3), (1, 2, 3)) == pytest.approx(1.0)
    assert cosine((1, 0), (0, 1)) == 0.0
    assert cosine((0, 0), (1, 1)) == 0.0
    with pytest.raises(ValidationError):
        cosine((1, 2), (1, 2, 3))


def test_coherence_rank_prefers_matching_tokens():
    # three documents: the shared terms of H and candidate 0 land in 2 of 3
    # docs, idf = log10(3/3) = 0, so H's vector is zero and both sims are 0;
    # candidate 0 still wins through the index tie-break
    model = build_tfidf("a b", ["a b", "c d"])
    kept = coherence_rank(model, 1)
    assert kept[0] == (0, 0.0)

    # with a fourth document the shared terms keep positive idf and the
    # identical-token candidate strictly beats the disjoint one
    model = build_tfidf("a b", ["a b", "c d", "e f"])
    kept = coherence_rank(model, 1)
    assert kept[0][0] == 0
    assert kept[0][1] > 0.99


def test_coherence_rank_tie_break_by_index():
    model = build_tfidf("a b", ["a b", "a b", "a b"])
    kept = coherence_rank(model, 2)
    assert [idx for idx, _ in kept] == [0, 1]


def test_coherence_rank_c_equals_s_keeps_all():
    model = build_tfidf("a b", ["a b", "c d", "b e"])
    kept = coherence_rank(model, 3)
    assert sorted(idx for idx, _ in kept) == [0, 1, 2]
    sims = [s for _, s in kept]
    assert sims == sorted(sims, reverse=True)


def test_coherence_rank_c_out_of_range():
    model = build_tfidf("a", ["b", "c"])
    with pytest.raises(ValidationError):
        coherence_rank(model, 0)
    with pytest.raises(ValidationError):
        coherence_rank(model, 3)


# --- brute-force oracle -----------------------------------------------------

def brute_force_tfidf(docs: list[str], log_base: float = 10.0):
    """Direct transcription of the weighting scheme, kept dict-based on purpose."""
    token_lists = [doc.lower().split() for doc in docs]
    token_lists = [
        [t.strip("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~") for t in toks]
        for toks in token_lists
    ]
    token_lists = [[t for t in toks if t] for toks in token_lists]
    vocab: list[str] = []
    for toks in token_lists:
        for t in toks:
            if t not in vocab:
                vocab.append(t)
    n_docs = len(docs)
    vectors = []
    for toks in token_lists:
        vec = []
        for term in vocab:
            if not toks:
                vec.append(0.0)
                continue
            tf = toks.count(term) / len(toks)
            df = sum(1 for other in token_lists if term in other)
            idf = math.log(n_docs / (1 + df)) / math.log(log_base)
            vec.append(tf * idf)
        vectors.append(vec)
    return vocab, vectors


def random_corpus(rng: random.Random, max_docs=6, max_tokens=25, vocab_size=10):
    words = [f"w{i}" for i in range(vocab_size)]
    n_docs = rng.randint(2, max_docs)
    docs = [
        " ".join(rng.choice(words) for _ in range(rng.randint(0, max_tokens)))
        for _ in range(n_docs)
    ]
    # the history document must have company; candidates are docs[1:]
    return docs


def test_matches_brute_force_oracle():
    rng = random.Random(99)
    for _ in range(100):
        docs = random_corpus(rng)
        model = build_tfidf(docs[0], docs[1:])
        vocab, vectors = brute_force_tfidf(docs)
        assert list(model.vocabulary) == vocab
        np.testing.assert_allclose(model.doc_vectors, vectors, atol=1e-9)


def test_ranking_invariant_to_log_base():
    rng = random.Random(7)
    for _ in range(50):
        docs = random_corpus(rng)
        m10 = build_tfidf(docs[0], docs[1:], log_base=10.0)
        me = build_tfidf(docs[0], docs[1:], log_base=math.e)
        c = len(docs) - 1
        assert [i for i, _ in coherence_rank(m10, c)] == [
            i for i, _ in coherence_rank(me, c)
        ]


def test_permutation_equivariance():
    rng = random.Random(21)
    docs = ["w1 w2 w3", "w1 w2", "w4", "w2 w2 w5", "w1 w4 w4"]
    base = build_tfidf(docs[0], docs[1:])
    base_sims = candidate_similarities(base)
    perm = list(range(len(docs) - 1))
    rng.shuffle(perm)
    permuted = build_tfidf(docs[0], [docs[1:][i] for i in perm])
    permuted_sims = candidate_similarities(permuted)
    for new_pos, old_pos in enumerate(perm):
        assert permuted_sims[new_pos] == pytest.approx(base_sims[old_pos], abs=1e-12)


def test_monotone_containment():
    docs = random_corpus(random.Random(3), max_docs=6)
    model = build_tfidf(docs[0], docs[1:])
    n = len(docs) - 1
    previous: set[int] = set()
    for c in range(1, n + 1):
        current = {i for i, _ in coherence_rank(model, c)}
        assert previous <= current
        previous = current
