"""Binding configuration: which model serves which endpoint."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

ENDPOINTS = ("next_token_dist", "batch_sample", "loglikelihood", "nli")


@dataclass(frozen=True)
class ModelBinding:
    endpoint: str
    model: str
    device: str = "cpu"
    max_batch: int = 256

    def __post_init__(self):
        if self.endpoint not in ENDPOINTS:
            raise ValueError(f"unknown endpoint {self.endpoint!r}")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")


@dataclass(frozen=True)
class SidecarConfig:
    backend_id: str
    bindings: tuple[ModelBinding, ...]

    def __post_init__(self):
        endpoints = [b.endpoint for b in self.bindings]
        if len(set(endpoints)) != len(endpoints):
            raise ValueError("every endpoint may have at most one binding")
        if not endpoints:
            raise ValueError("at least one endpoint must be bound")

    @property
    def capabilities(self) -> list[str]:
        return sorted(b.endpoint for b in self.bindings)

    def binding(self, endpoint: str) -> ModelBinding | None:
        for b in self.bindings:
            if b.endpoint == endpoint:
                return b
        return None

    @staticmethod
    def from_json(obj: dict) -> "SidecarConfig":
        bindings = tuple(
            ModelBinding(endpoint=endpoint, **spec)
            for endpoint, spec in obj["bindings"].items()
        )
        return SidecarConfig(backend_id=obj.get("backend_id", "sidecar"), bindings=bindings)

    @staticmethod
    def from_file(path: str | Path) -> "SidecarConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return SidecarConfig.from_json(json.load(fh))


def builtin_demo_config(backend_id: str = "sidecar-demo") -> SidecarConfig:
    """All four endpoints served by the built-in offline models."""
    return SidecarConfig(
        backend_id=backend_id,
        bindings=(
            ModelBinding("next_token_dist", "builtin:corpus-bigram"),
            ModelBinding("batch_sample", "builtin:corpus-bigram", max_batch=4096),
            ModelBinding("loglikelihood", "builtin:corpus-bigram"),
            ModelBinding("nli", "builtin:overlap-nli"),
        ),
    )
