import math
import random

import numpy as np
import pytest

from simoap.backends import MockBigramLM
from simoap.core import PipelineConfig
from simoap.errors import ProtocolError, ValidationError
from simoap.sampling import (
    TokenDistribution,
    draw_token,
    hash64,
    oversample,
    sample_sequence,
    stream_rng,
    top_k_filter,
)

from conftest import demo_instances


def dist(pairs):
    return TokenDistribution(
        token_ids=tuple(t for t, _ in pairs),
        logprobs=tuple(math.log(p) for _, p in pairs),
    )


def probs_of(d: TokenDistribution) -> dict[int, float]:
    return {t: math.exp(lp) for t, lp in zip(d.token_ids, d.logprobs)}


def test_top_k_argmax_case():
    out = top_k_filter(dist([(0, 0.5), (1, 0.3), (2, 0.2)]), 1)
    assert probs_of(out) == {0: pytest.approx(1.0)}


def test_top_k_larger_than_vocab_is_identity():
    d = dist([(0, 0.5), (1, 0.3), (2, 0.2)])
    out = top_k_filter(d, 5)
    assert out.token_ids == d.token_ids
    assert probs_of(out) == pytest.approx(probs_of(d))


def test_top_k_renormalizes():
    out = top_k_filter(dist([(0, 0.5), (1, 0.3), (2, 0.2)]), 2)
    assert probs_of(out) == pytest.approx({0: 0.625, 1: 0.375})


def test_top_k_rejects_bad_k():
    with pytest.raises(ValidationError):
        top_k_filter(dist([(0, 1.0)]), 0)


def test_top_k_tie_break_is_permutation_invariant():
    entries = [(0, 0.25), (1, 0.25), (2, 0.25), (3, 0.25)]
    rng = random.Random(5)
    expected = None
    for _ in range(10):
        rng.shuffle(entries)
        out = top_k_filter(dist(entries), 2)
        selected = set(out.token_ids)
        if expected is None:
            expected = selected
        assert selected == expected
    assert expected == {0, 1}  # ascending token id at the boundary


def test_distribution_validation():
    with pytest.raises(ProtocolError):
        TokenDistribution(token_ids=(0, 1), logprobs=(math.log(0.5),))
    with pytest.raises(ProtocolError):
        TokenDistribution(
            token_ids=(0, 1), logprobs=(math.log(0.5), math.log(0.4))
        )
    with pytest.raises(ProtocolError):
        TokenDistribution(token_ids=(0, 0), logprobs=(math.log(0.5), math.log(0.5)))


def test_sample_sequence_degenerate_backend():
    lm = MockBigramLM(
        {"<s>": {"yes": 1.0}, "yes": {"<eos>": 1.0}}, backend_id="forced"
    )
    cand = sample_sequence(lm, "", k=3, stream_seed=0)
    assert cand.text == "yes"
    assert cand.token_count == 1
    assert cand.token_logprobs == (0.0,)


def test_sample_sequence_determinism():
    lm = MockBigramLM(
        {
            "<s>": {"i": 0.6, "yes": 0.4},
            "i": {"sing": 0.5, "play": 0.5},
            "sing": {"<eos>": 1.0},
            "play": {"<eos>": 0.5, "piano": 0.5},
            "piano": {"<eos>": 1.0},
            "yes": {"<eos>": 1.0},
        }
    )
    a = sample_sequence(lm, "", k=2, stream_seed=77)
    b = sample_sequence(lm, "", k=2, stream_seed=77)
    assert a.to_json() == b.to_json()


def test_sample_sequence_matches_hand_replay():
    """Independent replay: renormalized top-k table + the same Philox stream."""
    table = {
        "<s>": {"i": 0.5, "yes": 0.3, "my": 0.2},
        "i": {"play": 0.6, "sing": 0.3, "am": 0.1},
        "play": {"piano": 0.7, "guitar": 0.3},
        "sing": {"<eos>": 1.0},
        "am": {"<eos>": 1.0},
        "piano": {"<eos>": 0.8, "and": 0.2},
        "and": {"sing": 1.0},
        "guitar": {"<eos>": 1.0},
        "yes": {"i": 0.6, "<eos>": 0.4},
        "my": {"piano": 1.0},
    }
    lm = MockBigramLM(table)
    k = 2
    seed = 7

    # --- oracle: dict-based replay, no pipeline code ---
    vocab = sorted(set(table) | {"<eos>"} | {t for row in table.values() for t in row})
    term_id = {t: i for i, t in enumerate(vocab)}
    rng = np.random.Generator(np.random.Philox(key=seed))
    state = "<s>"
    expected_terms = []
    expected_logprobs = []
    for _ in range(32):
        row = table.get(state, {"<eos>": 1.0})
        # top-k: probability descending, token id ascending
        entries = sorted(row.items(), key=lambda kv: (-kv[1], term_id[kv[0]]))[:k]
        total = sum(p for _, p in entries)
        u = rng.random()
        cum = 0.0
        chosen = entries[-1][0]
        chosen_p = entries[-1][1] / total
        for term, p in entries:
            cum += p / total
            if u < cum:
                chosen, chosen_p = term, p / total
                break
        if chosen == "<eos>":
            break
        expected_terms.append(chosen)
        expected_logprobs.append(math.log(chosen_p))
        state = chosen

    cand = sample_sequence(lm, "", k=k, stream_seed=seed)
    assert cand.text == " ".join(expected_terms)
    assert cand.token_count == len(expected_terms)
    assert cand.token_logprobs == pytest.approx(tuple(expected_logprobs))


def test_sampled_tokens_stay_in_top_k_support(bigram_lm):
    """Support property: every sampled word is reachable through the top-k table."""
    k = 2
    table = bigram_lm.table
    term_id = bigram_lm._term_to_id
    allowed = {}
    for term, row in table.items():
        top = sorted(row.items(), key=lambda kv: (-kv[1], term_id[kv[0]]))[:k]
        allowed[term] = {t for t, _ in top}
    config = PipelineConfig(k=k, s=200, c=10, master_seed=5)
    inst = demo_instances(1)[0]
    run = oversample(bigram_lm, inst, config)
    context_last = [t for t in "  ".join(inst.persona + inst.history).lower().split()][-1]
    for cand in run.candidates:
        state = context_last if context_last in table else None
        for word in cand.text.split():
            if state is not None:
                assert word in allowed.get(state, {"<eos>"})
            state = word


def test_oversample_counts_and_indices(bigram_lm):
    config = PipelineConfig(k=3, s=3, c=1, master_seed=1)
    inst = demo_instances(1)[0]
    run = oversample(bigram_lm, inst, config)
    assert len(run.candidates) == 3
    assert sorted(c.index for c in run.candidates) == [0, 1, 2]
    assert run.wall_time_generation >= 0.0


def test_oversample_stepwise_matches_spec_seeding():
    lm = MockBigramLM({"<s>": {"yes": 1.0}, "yes": {"<eos>": 1.0}})
    # no batch capability -> force the step-wise path
    class StepwiseOnly:
        capabilities = frozenset({"next_token_dist"})
        backend_id = "stepwise"
        eos_id = lm.eos_id
        encode = staticmethod(lm.encode)
        decode = staticmethod(lm.decode)
        next_token_dist = staticmethod(lm.next_token_dist)

    config = PipelineConfig(k=1, s=3, c=1, master_seed=9)
    inst = demo_instances(1)[0]
    run = oversample(StepwiseOnly(), inst, config)
    for cand in run.candidates:
        assert cand.seed_stream == hash64(9, inst.id, cand.index)


def test_oversample_seed_changes_output(bigram_lm):
    # a context ending in "play" branches three ways, so different master
    # seeds must disagree somewhere across 20 candidates
    from simoap.core import DialogueInstance

    inst = DialogueInstance(
        id="branchy", persona=["i am a musician"],
        history=["what instruments do you play"],
    )
    run_a = oversample(bigram_lm, inst, PipelineConfig(k=3, s=20, c=5, master_seed=1))
    run_b = oversample(bigram_lm, inst, PipelineConfig(k=3, s=20, c=5, master_seed=2))
    texts_a = [c.text for c in sorted(run_a.candidates, key=lambda c: c.index)]
    texts_b = [c.text for c in sorted(run_b.candidates, key=lambda c: c.index)]
    assert texts_a != texts_b


def test_draw_token_frequencies_track_distribution():
    d = top_k_filter(dist([(0, 0.5), (1, 0.3), (2, 0.2)]), 3)
    rng = stream_rng(123)
    counts = {0: 0, 1: 0, 2: 0}
    n = 10_000
    for _ in range(n):
        tok, _ = draw_token(d, rng)
        counts[tok] += 1
    for tok, p in probs_of(d).items():
        assert counts[tok] / n == pytest.approx(p, abs=0.02)


def test_hash64_is_stable():
    assert hash64(1, "a", 2) == hash64(1, "a", 2)
    assert hash64(1, "a", 2) != hash64(1, "a", 3)
    assert 0 <= hash64(0, "x", 0) < 2**64
