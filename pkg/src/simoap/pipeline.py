"""End-to-end run driver: oversample, filter, select, with caching and timings.

Instances are processed by a bounded worker pool; every merge is keyed by
instance id and candidate index, and every RNG stream by (master seed,
instance id, candidate index), so output bytes never depend on scheduling.
Per-instance wall time is split into generation (sampling or cache load) and
evaluation (everything after), the split reported alongside the results.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import lls_rerank, mmi_rerank
from .coherence import TfidfModel, build_tfidf, candidate_similarities, coherence_rank
from .consistency import persona_entailment, select_final
from .core import DialogueInstance, PipelineConfig, ScoreRecord, coherence_context
from .errors import ProtocolError, TransportError, ValidationError
from .sampling import SamplingRun, oversample

RERANK_MODES = ("simoap", "simoap-q", "mmi", "lls", "none")


@dataclass
class Backends:
    """The backend handles one run needs; unused slots may stay None."""

    generator: object = None
    nli: object = None
    scorer: object = None


@dataclass
class InstanceResult:
    instance_id: str
    run: SamplingRun | None = None
    scores: list[ScoreRecord] = field(default_factory=list)
    final_index: int | None = None
    final_text: str | None = None
    generation_seconds: float = 0.0
    evaluation_seconds: float = 0.0
    cache_hit: bool = False
    error: str | None = None
    # per-candidate scorer failures: (candidate_index, message); the
    # affected candidates drop out of the stage, the instance survives
    candidate_errors: list[tuple[int, str]] = field(default_factory=list)
    tfidf_model: TfidfModel | None = None


@dataclass
class RunResult:
    mode: str
    config: PipelineConfig
    results: list[InstanceResult]

    @property
    def failures(self) -> list[InstanceResult]:
        return [r for r in self.results if r.error is not None]


class CandidateCache:
    """JSONL candidate cache, one sampling run per line.

    Lines are keyed by (instance_id, backend_id, k, s, master_seed); a rerun
    with an identical key reuses the cached candidates and performs no
    generation calls.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._runs: dict[tuple, SamplingRun] = {}
        self._new: list[SamplingRun] = []
        if self.path.exists():
            with self.path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    run = SamplingRun.from_json(json.loads(line))
                    self._runs[run.cache_key()] = run

    def get(self, key: tuple) -> SamplingRun | None:
        return self._runs.get(key)

    def add(self, run: SamplingRun) -> None:
        if run.cache_key() not in self._runs:
            self._runs[run.cache_key()] = run
            self._new.append(run)

    def flush(self) -> None:
        if not self._new:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            for run in self._new:
                fh.write(json.dumps(run.to_json(), sort_keys=True) + "\n")
        self._new = []


def _score_map(records: list[ScoreRecord]) -> dict[int, ScoreRecord]:
    return {r.candidate_index: r for r in records}


def _process_instance(
    instance: DialogueInstance,
    config: PipelineConfig,
    backends: Backends,
    mode: str,
    cache: CandidateCache | None,
    collect_tfidf: bool = False,
) -> InstanceResult:
    result = InstanceResult(instance_id=instance.id)
    t0 = time.perf_counter()

    key = None
    run = None
    if cache is not None and backends.generator is not None:
        key = (
            instance.id,
            getattr(backends.generator, "backend_id", "unknown"),
            config.k,
            config.s,
            config.master_seed,
        )
        run = cache.get(key)
        result.cache_hit = run is not None
    if run is None:
        if backends.generator is None:
            raise ValidationError("a generation backend is required for sampling")
        run = oversample(backends.generator, instance, config)
    result.run = run
    t1 = time.perf_counter()
    result.generation_seconds = t1 - t0

    candidates = sorted(run.candidates, key=lambda c: c.index)
    records: dict[int, dict] = {
        c.index: {"candidate_index": c.index} for c in candidates
    }

    if mode in ("simoap", "simoap-q"):
        survivors = [c.index for c in candidates]
        if config.use_coherence:
            h_doc = coherence_context(instance, config.coherence_context)
            model = build_tfidf(h_doc, candidates)
            if collect_tfidf:
                result.tfidf_model = model
            sims = candidate_similarities(model)
            for c, sim in zip(candidates, sims):
                records[c.index]["coherence_sim"] = sim
            ranked = coherence_rank(model, config.c)
            survivors = [idx for idx, _ in ranked]
        if config.use_consistency:
            if backends.nli is None:
                raise ValidationError("an NLI backend is required for the consistency stage")
            cand_by_index = {c.index: c for c in candidates}
            scored = []
            for idx in survivors:
                try:
                    prob, label = persona_entailment(
                        backends.nli,
                        instance.persona,
                        cand_by_index[idx].text,
                        config.persona_aggregation,
                    )
                except (TransportError, ProtocolError) as exc:
                    result.candidate_errors.append((idx, str(exc)))
                    continue
                records[idx]["entailment_prob"] = prob
                records[idx]["nli_label"] = label
                scored.append(
                    ScoreRecord(
                        candidate_index=idx,
                        coherence_sim=records[idx].get("coherence_sim"),
                        entailment_prob=prob,
                        nli_label=label,
                    )
                )
            if not scored:
                raise TransportError("consistency scoring failed for every candidate")
            result.final_index = select_final(scored)
        else:
            # coherence top-1, or the first candidate when both stages are off
            result.final_index = survivors[0]
    elif mode == "mmi":
        if backends.scorer is None:
            raise ValidationError("a backward scorer backend is required for MMI")
        ranked = mmi_rerank(
            backends.scorer, instance, candidates, failures=result.candidate_errors
        )
        for idx, loglik in ranked:
            records[idx]["backward_loglik"] = loglik
        result.final_index = ranked[0][0]
    elif mode == "lls":
        ranked = lls_rerank(candidates)
        for idx, score in ranked:
            records[idx]["lls"] = score
        result.final_index = ranked[0][0]
    elif mode == "none":
        result.final_index = 0
    else:
        raise ValidationError(f"unknown rerank mode {mode!r}")

    result.scores = [ScoreRecord(**records[c.index]) for c in candidates]
    result.final_text = candidates[result.final_index].text
    result.evaluation_seconds = time.perf_counter() - t1
    return result


def run_pipeline(
    instances: list[DialogueInstance],
    config: PipelineConfig,
    backends: Backends,
    mode: str = "simoap",
    workers: int = 1,
    cache: CandidateCache | None = None,
    collect_tfidf: bool = False,
) -> RunResult:
    """Run one rerank mode over the dataset.

    Per-instance failures are captured in the result (not raised), so one bad
    instance never silently drops the rest of the run. ``collect_tfidf``
    keeps each instance's coherence corpus model for debug dumps.
    """
    if mode not in RERANK_MODES:
        raise ValidationError(f"unknown rerank mode {mode!r}; known: {RERANK_MODES}")
    if workers < 1:
        raise ValidationError("workers must be >= 1")
    if mode == "simoap-q" and config.coherence_context != "last_two":
        config = PipelineConfig(**{**config.to_json(), "coherence_context": "last_two"})

    def work(instance: DialogueInstance) -> InstanceResult:
        try:
            return _process_instance(
                instance, config, backends, mode, cache, collect_tfidf
            )
        except Exception as exc:
            return InstanceResult(
                instance_id=instance.id, error=f"{type(exc).__name__}: {exc}"
            )

    if workers == 1:
        results = [work(inst) for inst in instances]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, instances))

    if cache is not None:
        for r in results:
            if r.run is not None and not r.cache_hit:
                cache.add(r.run)
        cache.flush()
    return RunResult(mode=mode, config=config, results=results)


def write_candidates(run_result: RunResult, path: str | Path) -> None:
    """One sampling run per line, in dataset order (same schema as the cache)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in run_result.results:
            if r.run is not None:
                fh.write(json.dumps(r.run.to_json(), sort_keys=True) + "\n")


def write_scores(run_result: RunResult, path: str | Path) -> None:
    """One score record per candidate per instance, in deterministic order."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in run_result.results:
            for rec in r.scores:
                obj = {"instance_id": r.instance_id, **rec.to_json()}
                fh.write(json.dumps(obj, sort_keys=True) + "\n")


def write_final(run_result: RunResult, path: str | Path) -> None:
    """One selected response per instance."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in run_result.results:
            obj = {
                "instance_id": r.instance_id,
                "candidate_index": r.final_index,
                "response": r.final_text,
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def write_run_report(run_result: RunResult, path: str | Path, extra: dict | None = None) -> None:
    """Run metadata, per-instance timings and failures (not byte-stable)."""
    per_instance = [
        {
            "instance_id": r.instance_id,
            "generation_seconds": r.generation_seconds,
            "evaluation_seconds": r.evaluation_seconds,
            "cache_hit": r.cache_hit,
            "error": r.error,
            "candidate_errors": list(r.candidate_errors),
        }
        for r in run_result.results
    ]
    ok = [r for r in run_result.results if r.error is None]
    report = {
        "mode": run_result.mode,
        "config": run_result.config.to_json(),
        "instances": len(run_result.results),
        "failed": len(run_result.failures),
        "generation_seconds": sum(r.generation_seconds for r in ok),
        "evaluation_seconds": sum(r.evaluation_seconds for r in ok),
        "per_instance": per_instance,
    }
    if extra:
        report.update(extra)
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_tfidf_debug(run_result: RunResult, path: str | Path) -> None:
    """Full coherence corpus models, one instance per line (debug sizes only)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in run_result.results:
            model = r.tfidf_model
            if model is None:
                continue
            obj = {
                "instance_id": r.instance_id,
                "doc_count": model.doc_count,
                "vocabulary": list(model.vocabulary),
                "idf": model.idf.tolist(),
                "doc_vectors": model.doc_vectors.tolist(),
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def load_final(path: str | Path) -> list[dict]:
    with Path(path).open("r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_candidate_runs(path: str | Path) -> list[SamplingRun]:
    with Path(path).open("r", encoding="utf-8") as fh:
        return [SamplingRun.from_json(json.loads(line)) for line in fh if line.strip()]
