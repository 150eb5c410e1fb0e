import random

import pytest

from simoap.errors import AggregationError, ValidationError
from simoap.metrics import (
    SystemResults,
    c_mean,
    consistency_score,
    distinct_n,
    normalized_averages,
    ppl_aggregate,
    repetition_rate,
)


def test_distinct_unigrams():
    assert distinct_n(["a b", "a b"], 1) == 0.5


def test_distinct_bigrams():
    assert distinct_n(["a b", "a b"], 2) == 0.5


def test_distinct_no_ngrams_is_zero():
    assert distinct_n(["a"], 2) == 0.0


def test_distinct_rejects_bad_n():
    with pytest.raises(ValidationError):
        distinct_n(["a"], 0)


def test_distinct_bounds_and_uniqueness():
    assert distinct_n(["a b c", "d e"], 1) == 1.0
    rng = random.Random(2)
    for _ in range(20):
        responses = [
            " ".join(rng.choice("abc") for _ in range(rng.randint(1, 6)))
            for _ in range(rng.randint(1, 5))
        ]
        value = distinct_n(responses, 1)
        assert 0.0 < value <= 1.0


def test_repetition_rate_gold_exclusion():
    # first response matches its own gold, so only the second duplicate counts
    assert repetition_rate(["x", "x", "y"], ["x", "g", "g"]) == pytest.approx(1 / 3)


def test_repetition_rate_all_distinct():
    assert repetition_rate(["a", "b", "c"], ["g", "g", "g"]) == 0.0


def test_repetition_rate_full_duplication():
    assert repetition_rate(["a", "a"], ["b", "b"]) == 1.0


def test_repetition_rate_normalizes_spacing():
    assert repetition_rate(["a  b", "a b"], ["g", "g"]) == 1.0


def test_repetition_rate_permutation_invariant():
    responses = ["x", "x", "y", "z", "z", "z"]
    golds = ["x", "g", "g", "z", "q", "r"]
    base = repetition_rate(responses, golds)
    rng = random.Random(8)
    pairs = list(zip(responses, golds))
    for _ in range(5):
        rng.shuffle(pairs)
        r, g = zip(*pairs)
        assert repetition_rate(list(r), list(g)) == pytest.approx(base)


def test_repetition_rate_length_mismatch():
    with pytest.raises(ValidationError):
        repetition_rate(["a"], ["g", "g"])


def test_ppl_aggregate_plain_mean():
    assert ppl_aggregate([50.0, 150.0], None) == 100.0


def test_ppl_aggregate_threshold_filter():
    assert ppl_aggregate([50.0, 20000.0], 10000.0) == 50.0


def test_ppl_aggregate_everything_filtered():
    with pytest.raises(AggregationError, match="10000"):
        ppl_aggregate([20000.0], 10000.0)


def test_consistency_score_mapping():
    assert consistency_score("entailment") == 1
    assert consistency_score("neutral") == 0
    assert consistency_score("contradiction") == -1
    with pytest.raises(ValidationError):
        consistency_score("unsure")


def test_c_mean():
    labels = ["entailment", "neutral", "contradiction", "entailment"]
    assert c_mean(labels) == pytest.approx(0.25)
    assert c_mean(["entailment"] * 7) == 1.0


def make_system(name, ppl_a, ppl_b, dis1, dis2, c, rep, block=""):
    return SystemResults(
        system_name=name,
        responses=(("d0", "x"),),
        ppl_a=ppl_a,
        ppl_b=ppl_b,
        dis1=dis1,
        dis2=dis2,
        c_score=c,
        rep=rep,
        block=block,
    )


def test_normalized_averages_endpoints():
    better = make_system("good", 10, 20, 0.9, 0.9, 0.8, 0.01)
    worse = make_system("bad", 100, 200, 0.1, 0.1, -0.5, 0.4)
    result = normalized_averages([better, worse], "global")
    assert result["good"] == (pytest.approx(1.0), pytest.approx(1.0))
    assert result["bad"] == (pytest.approx(0.0), pytest.approx(0.0))


def test_normalized_averages_constant_column_is_half():
    a = make_system("a", 10, 50, 0.5, 0.5, 0.5, 0.1)
    b = make_system("b", 20, 50, 0.7, 0.6, 0.6, 0.2)
    result = normalized_averages([a, b], "global")
    # ppl_b is constant -> both get 0.5 from that column
    a_cols = [1.0, 0.5, 0.0, 0.0, 0.0]
    b_cols = [0.0, 0.5, 1.0, 1.0, 1.0]
    assert result["a"][0] == pytest.approx(sum(a_cols) / 5)
    assert result["b"][0] == pytest.approx(sum(b_cols) / 5)


def test_normalized_averages_identical_systems_all_half():
    a = make_system("a", 10, 50, 0.5, 0.5, 0.5, 0.1)
    b = make_system("b", 10, 50, 0.5, 0.5, 0.5, 0.1)
    result = normalized_averages([a, b], "global")
    assert result["a"] == (pytest.approx(0.5), pytest.approx(0.5))
    assert result["b"] == (pytest.approx(0.5), pytest.approx(0.5))


def test_normalized_averages_needs_two_per_group():
    a = make_system("a", 10, 50, 0.5, 0.5, 0.5, 0.1, block="x")
    b = make_system("b", 10, 50, 0.5, 0.5, 0.5, 0.1, block="y")
    with pytest.raises(ValidationError):
        normalized_averages([a, b], "per_block")
    normalized_averages([a, b], "global")


def test_normalization_preserves_column_order():
    rng = random.Random(5)
    systems = [
        make_system(
            f"s{i}",
            rng.uniform(5, 300),
            rng.uniform(5, 300),
            rng.random(),
            rng.random(),
            rng.uniform(-1, 1),
            rng.random(),
        )
        for i in range(5)
    ]
    from simoap.metrics import _minmax_normalize

    for attr, higher in [("ppl_a", False), ("dis1", True), ("rep", False)]:
        raw = [getattr(s, attr) for s in systems]
        norm = _minmax_normalize(raw, higher)
        oriented = raw if higher else [-v for v in raw]
        order_raw = sorted(range(5), key=lambda i: oriented[i])
        order_norm = sorted(range(5), key=lambda i: norm[i])
        assert order_raw == order_norm


def test_normalized_averages_affine_rescale_invariance():
    systems = [
        make_system("a", 10, 50, 0.5, 0.4, 0.1, 0.1),
        make_system("b", 30, 70, 0.9, 0.8, 0.9, 0.3),
        make_system("c", 20, 60, 0.7, 0.6, 0.5, 0.2),
    ]
    base = normalized_averages(systems, "global")
    rescaled = [
        make_system(s.system_name, 3 * s.ppl_a + 5, s.ppl_b, s.dis1,
                    s.dis2, s.c_score, s.rep)
        for s in systems
    ]
    again = normalized_averages(rescaled, "global")
    for name in ("a", "b", "c"):
        assert again[name][0] == pytest.approx(base[name][0])
        assert again[name][1] == pytest.approx(base[name][1])
