import json
import random

import pytest

from simoap.backends import CharLenScorer, LexicalOverlapNli, MockBigramLM, demo_bigram_table
from simoap.core import DialogueInstance

PERSONA_POOL = [
    "i play the piano and guitar",
    "i work as a custodian",
    "my favorite music is folk",
    "i am a musician",
    "i like to sing folk music",
    "i sing in a band",
]

HISTORY_POOL = [
    "what instruments do you play",
    "do you sing",
    "i like music a lot",
    "my favorite instrument is piano",
    "yes i play guitar",
    "what do you do",
]

GOLD_POOL = [
    "i play the piano",
    "i sing folk music",
    "i am a musician",
    "yes i play guitar and sing",
    "my favorite music is folk",
]


def demo_instances(n: int, seed: int = 1234) -> list[DialogueInstance]:
    """Deterministic persona-chat-flavored instances built from the demo vocabulary."""
    rng = random.Random(seed)
    instances = []
    for i in range(n):
        persona = tuple(rng.sample(PERSONA_POOL, rng.randint(1, 3)))
        history = tuple(rng.sample(HISTORY_POOL, rng.randint(1, 4)))
        instances.append(
            DialogueInstance(
                id=f"d{i}",
                persona=persona,
                history=history,
                gold=rng.choice(GOLD_POOL),
            )
        )
    return instances


def branchy_instances(n: int, seed: int = 77) -> list[DialogueInstance]:
    """Instances whose contexts end in branching table words, so candidates
    are non-empty and vary with the seed."""
    rng = random.Random(seed)
    # last words ("play", "do", "like") have no EOS among their continuations,
    # so every candidate carries at least one token
    endings = [
        "what instruments do you play",
        "what do you do",
        "what music do you like",
    ]
    instances = []
    for i in range(n):
        persona = tuple(rng.sample(PERSONA_POOL, rng.randint(1, 3)))
        history = tuple(rng.sample(HISTORY_POOL, rng.randint(0, 2))) + (
            rng.choice(endings),
        )
        instances.append(
            DialogueInstance(
                id=f"b{i}", persona=persona, history=history,
                gold=rng.choice(GOLD_POOL),
            )
        )
    return instances


def write_dataset(instances, path):
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_json()) + "\n")
    return path


class CountingBackend:
    """Delegating wrapper that counts generation calls, for cache tests."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    @property
    def capabilities(self):
        return self.inner.capabilities

    @property
    def backend_id(self):
        return self.inner.backend_id

    @property
    def eos_id(self):
        return self.inner.eos_id

    def encode(self, context):
        return self.inner.encode(context)

    def decode(self, token_ids):
        return self.inner.decode(token_ids)

    def next_token_dist(self, context_tokens):
        self.calls += 1
        return self.inner.next_token_dist(context_tokens)

    def batch_sample(self, *args, **kwargs):
        self.calls += 1
        return self.inner.batch_sample(*args, **kwargs)


@pytest.fixture
def bigram_lm():
    return MockBigramLM(demo_bigram_table(), backend_id="inprocess:bigram")

@pytest.fixture
def nli_lexical():
    return LexicalOverlapNli()


@pytest.fixture
def charlen():
    return CharLenScorer()
