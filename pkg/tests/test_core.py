import json

import pytest
from hypothesis import given, strategies as st

from simoap.core import (
    Candidate,
    DialogueInstance,
    PipelineConfig,
    ScoreRecord,
    coherence_context,
    load_dataset,
    save_dataset,
)
from simoap.errors import DatasetError, ValidationError


def _write(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_load_single_line_round_trips_fields(tmp_path):
    line = json.dumps(
        {"id": "d1", "persona": ["i sing"], "history": ["hi"], "gold": "hello"}
    )
    instances = load_dataset(_write(tmp_path / "d.jsonl", [line]))
    assert len(instances) == 1
    inst = instances[0]
    assert (inst.id, list(inst.persona), list(inst.history), inst.gold) == (
        "d1", ["i sing"], ["hi"], "hello",
    )


def test_load_empty_file(tmp_path):
    assert load_dataset(_write(tmp_path / "d.jsonl", [])) == []


def test_duplicate_id_rejected_by_name(tmp_path):
    line = json.dumps({"id": "d1", "persona": ["p"], "history": ["h"], "gold": "g"})
    path = _write(tmp_path / "d.jsonl", [line, line])
    with pytest.raises(DatasetError, match="d1"):
        load_dataset(path)


def test_malformed_line_names_line_number(tmp_path):
    good = json.dumps({"id": "d1", "persona": ["p"], "history": ["h"], "gold": "g"})
    path = _write(tmp_path / "d.jsonl", [good, "{not json"])
    with pytest.raises(DatasetError, match=":2"):
        load_dataset(path)


def test_unsupported_format_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_dataset(tmp_path / "d.csv", format="csv")


texts = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\n"),
    min_size=1,
    max_size=20,
)


@given(
    st.lists(
        st.tuples(st.lists(texts, min_size=1, max_size=3),
                  st.lists(texts, min_size=1, max_size=3),
                  texts),
        min_size=0,
        max_size=5,
    )
)
def test_dataset_round_trip(tmp_path_factory, records):
    instances = [
        DialogueInstance(id=f"i{n}", persona=tuple(p), history=tuple(h), gold=g)
        for n, (p, h, g) in enumerate(records)
    ]
    path = tmp_path_factory.mktemp("rt") / "d.jsonl"
    save_dataset(instances, path)
    assert load_dataset(path) == instances


def test_coherence_context_modes():
    inst = DialogueInstance(id="x", persona=["p"], history=["a", "b", "c"])
    assert coherence_context(inst, "full_history") == "a b c"
    assert coherence_context(inst, "last_two") == "b c"


def test_coherence_context_short_history():
    inst = DialogueInstance(id="x", persona=["p"], history=["only"])
    assert coherence_context(inst, "last_two") == "only"


def test_coherence_context_unknown_mode():
    inst = DialogueInstance(id="x", persona=["p"], history=["a"])
    with pytest.raises(ValidationError):
        coherence_context(inst, "everything")


@given(st.lists(texts, min_size=1, max_size=6))
def test_last_two_is_suffix_of_full(history):
    inst = DialogueInstance(id="x", persona=["p"], history=tuple(history))
    full = coherence_context(inst, "full_history")
    last = coherence_context(inst, "last_two")
    assert full.endswith(last)


def test_instance_requires_persona_and_history():
    with pytest.raises(ValidationError):
        DialogueInstance(id="x", persona=[], history=["h"])
    with pytest.raises(ValidationError):
        DialogueInstance(id="x", persona=["p"], history=[])


def test_candidate_logprob_invariants():
    Candidate(text="a b", index=0, token_count=2, token_logprobs=(-0.5, -0.1))
    with pytest.raises(ValidationError):
        Candidate(text="a b", index=0, token_count=2, token_logprobs=(-0.5,))
    with pytest.raises(ValidationError):
        Candidate(text="a", index=0, token_count=1, token_logprobs=(0.2,))


def test_score_record_ranges():
    ScoreRecord(candidate_index=0, coherence_sim=0.5, entailment_prob=1.0)
    with pytest.raises(ValidationError):
        ScoreRecord(candidate_index=0, coherence_sim=1.5)
    with pytest.raises(ValidationError):
        ScoreRecord(candidate_index=0, entailment_prob=-0.1)
    with pytest.raises(ValidationError):
        ScoreRecord(candidate_index=0, nli_label="maybe")


def test_config_invariants():
    cfg = PipelineConfig()
    assert (cfg.k, cfg.s, cfg.c) == (100, 2000, 100)
    with pytest.raises(ValidationError):
        PipelineConfig(c=10, s=5)
    with pytest.raises(ValidationError):
        PipelineConfig(k=0)
    with pytest.raises(ValidationError):
        PipelineConfig(coherence_context="all")
    with pytest.raises(ValidationError):
        PipelineConfig.from_json({"q": 3})
