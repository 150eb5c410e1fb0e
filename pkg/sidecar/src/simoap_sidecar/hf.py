"""Hugging Face adapters: a causal LM for generation/scoring and a sequence
classifier for NLI. Checkpoints are configuration; nothing here is imported
unless an hf-* binding is configured.
"""

from __future__ import annotations

import numpy as np


class HfCausalLM:
    """Causal LM behind the generation and loglikelihood endpoints."""

    def __init__(self, model_id: str, device: str = "cpu"):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForCausalLM.from_pretrained(model_id).to(device).eval()
        self.device = device

    @property
    def eos_id(self) -> int:
        return int(self.tokenizer.eos_token_id)

    def encode(self, text: str) -> list[int]:
        ids = self.tokenizer.encode(text)
        return ids or [self.eos_id]

    def decode(self, token_ids: list[int]) -> str:
        return self.tokenizer.decode(token_ids, skip_special_tokens=True).strip()

    def _next_logprobs(self, context_ids: list[int]) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            ids = torch.tensor([context_ids], device=self.device)
            logits = self.model(ids).logits[0, -1]
            return torch.log_softmax(logits, dim=-1).cpu().numpy().astype(np.float64)

    def next_token_dist(self, context_tokens: list[int]) -> tuple[list[int], list[float]]:
        logprobs = self._next_logprobs(context_tokens or [self.eos_id])
        # renormalize after the float64 round trip so payload validation holds
        probs = np.exp(logprobs)
        probs = probs / probs.sum()
        return list(range(len(probs))), np.log(probs).tolist()

    def loglikelihood(self, context: str, continuation: str) -> tuple[float, int]:
        torch = self._torch
        context_ids = self.tokenizer.encode(context) if context else []
        continuation_ids = self.tokenizer.encode(continuation)
        if not continuation_ids:
            raise ValueError("continuation tokenized to nothing")
        ids = (context_ids or [self.eos_id]) + continuation_ids
        with torch.no_grad():
            tensor = torch.tensor([ids], device=self.device)
            logits = self.model(tensor).logits[0]
            logprobs = torch.log_softmax(logits, dim=-1)
        start = len(context_ids) if context_ids else 1
        total = 0.0
        for pos in range(start, len(ids)):
            total += float(logprobs[pos - 1, ids[pos]])
        return total, len(continuation_ids)

    def sample_batch(self, context: str, k: int, n: int, seed: int, max_tokens: int = 32):
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
            logprobs_out: list[float] = []
            sizes: list[int] = []
            ranks: list[int] = []
            while len(generated) < max_tokens:
                logprobs = self._next_logprobs(context_ids + generated)
                order = np.lexsort((np.arange(len(logprobs)), -logprobs))
                keep = order[: min(k, len(order))]
                kept = np.exp(logprobs[keep])
                kept = kept / kept.sum()
                u = rng.random()
                pick = int(np.searchsorted(np.cumsum(kept), u, side="right"))
                pick = min(pick, len(keep) - 1)
                sizes.append(len(keep))
                ranks.append(pick + 1)
                token = int(keep[pick])
                if token == self.eos_id:
                    break
                generated.append(token)
                logprobs_out.append(float(np.log(kept[pick])))
            candidates.append(
                {
                    "text": self.decode(generated),
                    "index": i,
                    "token_count": len(generated),
                    "token_logprobs": logprobs_out,
                    "seed_stream": stream,
                }
            )
            all_sizes.append(sizes)
            all_ranks.append(ranks)
        return candidates, all_sizes, all_ranks


class HfNli:
    """Sequence-classification NLI model behind the nli endpoint."""

    _LABEL_KEYS = {"entail": "entailment", "neutral": "neutral", "contra": "contradiction"}

    def __init__(self, model_id: str, device: str = "cpu"):
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = (
            AutoModelForSequenceClassification.from_pretrained(model_id)
            .to(device)
            .eval()
        )
        self.device = device
        self._label_map = {}
        for idx, label in self.model.config.id2label.items():
            for prefix, name in self._LABEL_KEYS.items():
                if label.lower().startswith(prefix):
                    self._label_map[int(idx)] = name
        if set(self._label_map.values()) != set(self._LABEL_KEYS.values()):
            raise ValueError(
                f"model labels {self.model.config.id2label} do not cover "
                "entailment/neutral/contradiction"
            )

    def nli(self, premise: str, hypothesis: str) -> dict[str, float]:
        torch = self._torch
        with torch.no_grad():
            inputs = self.tokenizer(premise, hypothesis, return_tensors="pt").to(self.device)
            probs = torch.softmax(self.model(**inputs).logits[0], dim=-1).cpu().numpy()
        out = {name: 0.0 for name in self._LABEL_KEYS.values()}
        for idx, name in self._label_map.items():
            out[name] += float(probs[idx])
        total = sum(out.values())
        return {name: value / total for name, value in out.items()}
