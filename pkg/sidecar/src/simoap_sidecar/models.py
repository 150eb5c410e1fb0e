"""Built-in offline models.

``CorpusBigramLM`` is a real (if tiny) statistical language model: add-alpha
smoothed bigram estimates over a small built-in dialogue corpus. One instance
serves next-token distributions, server-side top-k batch sampling, and
chain-rule loglikelihood scoring. ``OverlapNli`` classifies premise/hypothesis
pairs from lexical overlap. Both are deterministic given (inputs, seed).
"""

from __future__ import annotations

import re

import numpy as np

START = "<s>"
EOS = "<eos>"
UNK = "<unk>"

_CORPUS = [
    "i play the piano and the guitar",
    "i like to sing folk music",
    "i work as a custodian to pay the bills",
    "i am a musician and i hope to make it big",
    "what instruments do you play",
    "do you sing in a band",
    "my favorite type of music is folk",
    "yes i play the guitar",
    "i like music a lot",
    "what do you do for work",
    "i sing and play music every day",
    "that is interesting",
]

_WORD = re.compile(r"[a-z0-9']+")


def words(text: str) -> list[str]:
    return _WORD.findall(text.lower())


class CorpusBigramLM:
    """Add-alpha smoothed bigram model estimated from the built-in corpus."""

    def __init__(self, corpus: list[str] | None = None, alpha: float = 0.1):
        corpus = corpus if corpus is not None else _CORPUS
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        vocab = {START, EOS, UNK}
        for sentence in corpus:
            vocab.update(words(sentence))
        self.vocabulary = sorted(vocab)
        self._id = {t: i for i, t in enumerate(self.vocabulary)}
        self._term = dict(enumerate(self.vocabulary))
        # tokens a model may emit: everything except the start marker
        self._emittable = [t for t in self.vocabulary if t != START]

        counts: dict[str, dict[str, int]] = {}
        for sentence in corpus:
            tokens = [START] + words(sentence) + [EOS]
            for prev, cur in zip(tokens, tokens[1:]):
                counts.setdefault(prev, {})
                counts[prev][cur] = counts[prev].get(cur, 0) + 1
        self._counts = counts
        self.alpha = alpha

    @property
    def eos_id(self) -> int:
        return self._id[EOS]

    def encode(self, text: str) -> list[int]:
        ids = [self._id.get(w, self._id[UNK]) for w in words(text)]
        return ids or [self._id[START]]

    def decode(self, token_ids: list[int]) -> str:
        return " ".join(self._term[t] for t in token_ids)

    def _row(self, prev_term: str) -> tuple[list[int], np.ndarray]:
        row = self._counts.get(prev_term, {})
        raw = np.array(
            [row.get(t, 0) + self.alpha for t in self._emittable], dtype=np.float64
        )
        probs = raw / raw.sum()
        return [self._id[t] for t in self._emittable], probs

    def next_token_dist(self, context_tokens: list[int]) -> tuple[list[int], list[float]]:
        prev = self._term[context_tokens[-1]] if context_tokens else START
        token_ids, probs = self._row(prev)
        return token_ids, np.log(probs).tolist()

    def loglikelihood(self, context: str, continuation: str) -> tuple[float, int]:
        tokens = words(continuation)
        if not tokens:
            raise ValueError("continuation must contain at least one word")
        context_words = words(context)
        state = context_words[-1] if context_words else START
        state = state if state in self._id else UNK
        total = 0.0
        for word in tokens:
            token_ids, probs = self._row(state)
            target = word if word in self._id else UNK
            total += float(np.log(probs[token_ids.index(self._id[target])]))
            state = target
        return total, len(tokens)

    def sample_batch(
        self,
        context: str,
        k: int,
        n: int,
        seed: int,
        max_tokens: int = 32,
    ) -> tuple[list[dict], list[list[int]], list[list[int]]]:
        """Top-k sample n candidates; candidate i draws from stream (seed + i).

        Returns candidate payload dicts plus, per candidate and step, the
        size of the sampled top-k support and the 1-based rank of the chosen
        token inside it.
        """
        if k < 1 or n < 1:
            raise ValueError("k and n must be >= 1")
        candidates = []
        all_sizes: list[list[int]] = []
        all_ranks: list[list[int]] = []
        for i in range(n):
            stream = (seed + i) % (2**64)
            rng = np.random.Generator(np.random.Philox(key=stream))
            context_ids = self.encode(context)
            generated: list[int] = []
            logprobs: list[float] = []
            sizes: list[int] = []
            ranks: list[int] = []
            while len(generated) < max_tokens:
                prev = self._term[(context_ids + generated)[-1]]
                token_ids, probs = self._row(prev)
                # top-k: probability descending, token id ascending
                order = sorted(range(len(token_ids)), key=lambda j: (-probs[j], token_ids[j]))
                keep = order[: min(k, len(order))]
                kept_probs = probs[keep]
                kept_probs = kept_probs / kept_probs.sum()
                kept_ids = [token_ids[j] for j in keep]
                u = rng.random()
                cum = 0.0
                pick = len(keep) - 1
                for pos, p in enumerate(kept_probs):
                    cum += float(p)
                    if u < cum:
                        pick = pos
                        break
                sizes.append(len(keep))
                ranks.append(pick + 1)
                token = kept_ids[pick]
                if token == self.eos_id:
                    break
                generated.append(token)
                logprobs.append(float(np.log(kept_probs[pick])))
            candidates.append(
                {
                    "text": self.decode(generated),
                    "index": i,
                    "token_count": len(generated),
                    "token_logprobs": logprobs,
                    "seed_stream": stream,
                }
            )
            all_sizes.append(sizes)
            all_ranks.append(ranks)
        return candidates, all_sizes, all_ranks


class OverlapNli:
    """Lexical-overlap entailment scorer; probabilities always sum to one."""

    def nli(self, premise: str, hypothesis: str) -> dict[str, float]:
        a, b = set(words(premise)), set(words(hypothesis))
        union = a | b
        overlap = (len(a & b) / len(union)) if union else 1.0
        rest = 1.0 - overlap
        return {
            "entailment": overlap,
            "neutral": rest * 2.0 / 3.0,
            "contradiction": rest / 3.0,
        }


def load_model(identifier: str, device: str = "cpu"):
    """Instantiate a model by identifier.

    ``builtin:corpus-bigram`` and ``builtin:overlap-nli`` run offline;
    ``hf-causal:<id>`` and ``hf-nli:<id>`` load Hugging Face checkpoints.
    """
    if identifier == "builtin:corpus-bigram":
        return CorpusBigramLM()
    if identifier == "builtin:overlap-nli":
        return OverlapNli()
    if identifier.startswith("hf-causal:"):
        from .hf import HfCausalLM

        return HfCausalLM(identifier.split(":", 1)[1], device=device)
    if identifier.startswith("hf-nli:"):
        from .hf import HfNli

        return HfNli(identifier.split(":", 1)[1], device=device)
    raise ValueError(f"unknown model identifier {identifier!r}")
