"""Command-line driver.

Subcommands:
    sample         oversample candidates for a dataset into a run directory
    rerank         run a full rerank mode (simoap | simoap-q | mmi | lls | none)
    evaluate       compute raw metrics for one run's selected responses
    compare        build the comparison report for several evaluated systems
    analyze-ranks  PPL-rank bucket analysis of a sampled run
    serve-mock     expose the in-process mocks over the HTTP protocol

Exit codes: 0 success, 1 partial failure (some instances failed), 2 invalid
invocation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis as analysis_mod
from . import figures, pipeline, reporting
from .backends import HttpBackend, MockProtocolServer, resolve_inprocess
from .coherence import build_tfidf, candidate_similarities
from .consistency import persona_entailment
from .core import PipelineConfig, load_dataset
from .errors import (
    AggregationError,
    CapabilityError,
    DatasetError,
    ProtocolError,
    TransportError,
    ValidationError,
)
from .metrics import SystemResults

LLS_DEFAULT_K = 40
LLS_DEFAULT_S = 20


def resolve_backend(spec: str, timeout: float = 30.0, max_retries: int = 2):
    """Turn a backend spec ('inprocess:<name>' or a base URL) into a handle."""
    if spec.startswith("inprocess:"):
        return resolve_inprocess(spec.split(":", 1)[1])
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpBackend.from_url(spec, timeout=timeout, max_retries=max_retries)
    raise ValidationError(
        f"backend spec {spec!r} must be 'inprocess:<name>' or an http(s) URL"
    )


def _default_backend_spec(value: str | None) -> str:
    if value:
        return value
    env = os.environ.get("SIMOAP_BACKEND_URL")
    if env:
        return env
    raise ValidationError(
        "no generation backend given; pass --backend or set SIMOAP_BACKEND_URL"
    )


def _build_config(args) -> PipelineConfig:
    base = PipelineConfig().to_json()
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        base = {**base, **file_cfg}
    mode = getattr(args, "rerank", None)
    if mode == "lls":
        if args.k is None:
            base["k"] = LLS_DEFAULT_K
        if args.s is None:
            base["s"] = LLS_DEFAULT_S
    overrides = {
        "k": args.k,
        "s": args.s,
        "c": getattr(args, "c", None),
        "master_seed": args.seed,
        "persona_aggregation": getattr(args, "aggregation", None),
        "max_tokens": getattr(args, "max_tokens", None),
    }
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    if getattr(args, "no_tfidf", False):
        base["use_coherence"] = False
    if getattr(args, "no_nli", False):
        base["use_consistency"] = False
    if base["c"] > base["s"]:
        base["c"] = base["s"]
    return PipelineConfig.from_json(base)


def _open_cache(args, out_dir: Path) -> pipeline.CandidateCache:
    cache_dir = Path(args.cache_dir) if args.cache_dir else out_dir
    cache_dir.mkdir(parents=True, exist_ok=True)
    return pipeline.CandidateCache(cache_dir / "candidate_cache.jsonl")


def cmd_sample(args) -> int:
    instances = load_dataset(args.dataset)
    config = _build_config(args)
    backend = resolve_backend(_default_backend_spec(args.backend))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = _open_cache(args, out_dir)
    result = pipeline.run_pipeline(
        instances,
        config,
        pipeline.Backends(generator=backend),
        mode="none",
        workers=args.workers,
        cache=cache,
    )
    pipeline.write_candidates(result, out_dir / "candidates.jsonl")
    pipeline.write_run_report(result, out_dir / "report.json")
    for r in result.failures:
        print(f"FAILED {r.instance_id}: {r.error}", file=sys.stderr)
    print(f"sampled {len(result.results) - len(result.failures)}/{len(instances)} "
          f"instances into {out_dir}")
    return 1 if result.failures else 0


def cmd_rerank(args) -> int:
    instances = load_dataset(args.dataset)
    config = _build_config(args)
    backends = pipeline.Backends(
        generator=resolve_backend(_default_backend_spec(args.backend)),
        nli=resolve_backend(args.nli_backend) if args.nli_backend else None,
        scorer=resolve_backend(args.scorer_backend[0]) if args.scorer_backend else None,
    )
    mode = args.rerank
    if mode in ("simoap", "simoap-q") and config.use_consistency and backends.nli is None:
        raise ValidationError(f"--rerank {mode} needs --nli-backend (or --no-nli)")
    if mode == "mmi" and backends.scorer is None:
        raise ValidationError("--rerank mmi needs --scorer-backend")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = _open_cache(args, out_dir)
    result = pipeline.run_pipeline(
        instances, config, backends, mode=mode, workers=args.workers, cache=cache,
        collect_tfidf=args.dump_tfidf,
    )
    pipeline.write_candidates(result, out_dir / "candidates.jsonl")
    pipeline.write_scores(result, out_dir / "scores.jsonl")
    pipeline.write_final(result, out_dir / "final.jsonl")
    pipeline.write_run_report(result, out_dir / "report.json")
    if args.dump_tfidf:
        pipeline.write_tfidf_debug(result, out_dir / "tfidf_debug.jsonl")
    for r in result.failures:
        print(f"FAILED {r.instance_id}: {r.error}", file=sys.stderr)
    print(f"reranked {len(result.results) - len(result.failures)}/{len(instances)} "
          f"instances ({mode}) into {out_dir}")
    return 1 if result.failures else 0


def cmd_evaluate(args) -> int:
    instances = load_dataset(args.dataset)
    run_dir = Path(args.run_dir)
    finals = pipeline.load_final(run_dir / "final.jsonl")
    nli_backend = resolve_backend(args.nli_backend)
    scorer_specs = args.scorer_backend or []
    if not scorer_specs:
        raise ValidationError("evaluate needs at least one --scorer-backend")
    scorer_a = resolve_backend(scorer_specs[0])
    scorer_b = resolve_backend(scorer_specs[1]) if len(scorer_specs) > 1 else None

    generation_seconds = evaluation_seconds = 0.0
    report_path = run_dir / "report.json"
    if report_path.exists():
        with report_path.open("r", encoding="utf-8") as fh:
            run_report = json.load(fh)
        generation_seconds = run_report.get("generation_seconds", 0.0)
        evaluation_seconds = run_report.get("evaluation_seconds", 0.0)

    results = reporting.evaluate_system(
        instances,
        finals,
        nli_backend,
        scorer_a,
        scorer_b,
        system_name=args.system_name,
        block=args.block,
        generation_seconds=generation_seconds,
        evaluation_seconds=evaluation_seconds,
        ppl_filter=args.ppl_filter,
    )
    out_path = Path(args.out) if args.out else run_dir / "system.json"
    with out_path.open("w", encoding="utf-8") as fh:
        json.dump(results.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out_path}")
    return 0


def cmd_compare(args) -> int:
    systems = []
    for path in args.systems:
        with open(path, "r", encoding="utf-8") as fh:
            systems.append(SystemResults.from_json(json.load(fh)))
    report = reporting.compare_systems(systems, grouping=args.grouping)
    out_dir = Path(args.out)
    written = reporting.write_report_files(report, out_dir)
    if args.figures:
        written.append(figures.save_report_figure(report, out_dir))
    print(report.render_text())
    print("wrote " + ", ".join(str(p) for p in written))
    return 0


def cmd_analyze_ranks(args) -> int:
    instances = load_dataset(args.dataset)
    run_dir = Path(args.run_dir)
    runs = {r.instance_id: r for r in pipeline.load_candidate_runs(run_dir / "candidates.jsonl")}
    finals = {f["instance_id"]: f for f in pipeline.load_final(run_dir / "final.jsonl")}
    scorer = resolve_backend(args.scorer_backend[0] if args.scorer_backend else
                             _default_backend_spec(None))
    nli_backend = resolve_backend(args.nli_backend)

    outcomes = []
    for inst in instances:
        if inst.id not in runs:
            raise ValidationError(f"run directory has no candidates for {inst.id!r}")
        if inst.id not in finals:
            raise ValidationError(f"run directory has no final response for {inst.id!r}")
        candidates = sorted(runs[inst.id].candidates, key=lambda c: c.index)
        sims = candidate_similarities(build_tfidf(inst.gold, candidates))
        per_candidate = []
        for cand, sim in zip(candidates, sims):
            if cand.text.strip():
                ppl = reporting.response_perplexity(scorer, cand.text)
            else:
                ppl = float("inf")
            prob, _ = persona_entailment(
                nli_backend, inst.persona, cand.text, args.aggregation
            )
            per_candidate.append(
                analysis_mod.CandidateOutcome(
                    ppl=ppl, sim_to_gold=sim, entailment_prob=prob
                )
            )
        outcomes.append(
            analysis_mod.InstanceOutcomes(
                instance_id=inst.id,
                candidates=tuple(per_candidate),
                selected_index=finals[inst.id]["candidate_index"],
            )
        )

    result = analysis_mod.rank_analysis(
        outcomes, args.sim_threshold, args.entail_threshold, args.buckets
    )
    out_dir = Path(args.out) if args.out else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = result.to_json()
    payload["sim_threshold"] = args.sim_threshold
    payload["entail_threshold"] = args.entail_threshold
    with (out_dir / "ranks.json").open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written = [out_dir / "ranks.json"]
    if args.figures:
        written.extend(figures.save_rank_figures(result, out_dir))
    print(f"mean selected rank: {result.mean_selected_rank:.2f}")
    print("wrote " + ", ".join(str(p) for p in written))
    return 0


def cmd_serve_mock(args) -> int:
    server = MockProtocolServer(
        backend_id=args.backend_id, host=args.host, port=args.port
    )
    print(f"serving mock backends on {server.base_url} (ctrl-c to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def _add_common_run_args(sub, include_c=True):
    sub.add_argument("--dataset", required=True, help="JSONL dataset path")
    sub.add_argument("--config", help="JSON config file mirroring the run configuration")
    sub.add_argument("--backend", help="generation backend (inprocess:<name> or URL)")
    sub.add_argument("--k", type=int, default=None, help="top-k sampling width")
    sub.add_argument("--s", type=int, default=None, help="oversample count per instance")
    if include_c:
        sub.add_argument("--c", type=int, default=None, help="coherence survivors")
    sub.add_argument("--seed", type=int, default=None, help="master seed")
    sub.add_argument("--max-tokens", type=int, default=None, help="generation length cap")
    sub.add_argument("--workers", type=int, default=1, help="worker pool width")
    sub.add_argument("--cache-dir", help="candidate cache directory (default: run dir)")
    sub.add_argument("--out", required=True, help="run directory for outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simoap",
        description="Over-sample dialogue responses, then keep the coherent and consistent one.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p_sample = subparsers.add_parser("sample", help="oversample candidates only")
    _add_common_run_args(p_sample, include_c=False)
    p_sample.set_defaults(func=cmd_sample)

    p_rerank = subparsers.add_parser("rerank", help="run a rerank mode end to end")
    _add_common_run_args(p_rerank)
    p_rerank.add_argument(
        "--rerank",
        default="simoap",
        choices=list(pipeline.RERANK_MODES),
        help="rerank strategy",
    )
    p_rerank.add_argument("--nli-backend", help="NLI backend for the consistency stage")
    p_rerank.add_argument(
        "--scorer-backend",
        action="append",
        help="loglikelihood backend (backward model for --rerank mmi)",
    )
    p_rerank.add_argument(
        "--aggregation", choices=["max", "mean"], default=None,
        help="persona entailment aggregation",
    )
    p_rerank.add_argument(
        "--no-tfidf", action="store_true", help="ablation: skip the coherence stage"
    )
    p_rerank.add_argument(
        "--no-nli", action="store_true", help="ablation: skip the consistency stage"
    )
    p_rerank.add_argument(
        "--dump-tfidf", action="store_true",
        help="write the per-instance coherence corpus models to tfidf_debug.jsonl",
    )
    p_rerank.set_defaults(func=cmd_rerank)

    p_eval = subparsers.add_parser("evaluate", help="metrics for one run's responses")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--run-dir", required=True, help="directory with final.jsonl")
    p_eval.add_argument("--nli-backend", required=True)
    p_eval.add_argument(
        "--scorer-backend",
        action="append",
        help="PPL scorer; repeat for the second channel (first is threshold-filtered)",
    )
    p_eval.add_argument("--system-name", default="system")
    p_eval.add_argument("--block", default="", help="backbone block for per-block grouping")
    p_eval.add_argument(
        "--ppl-filter", type=float, default=10_000.0,
        help="drop per-response PPL above this on the first channel (channel a)",
    )
    p_eval.add_argument("--out", help="output path (default: <run-dir>/system.json)")
    p_eval.set_defaults(func=cmd_evaluate)

    p_cmp = subparsers.add_parser("compare", help="comparison report across systems")
    p_cmp.add_argument("systems", nargs="+", help="system.json files from evaluate")
    p_cmp.add_argument("--grouping", choices=["per_block", "global"], default="per_block")
    p_cmp.add_argument("--out", required=True, help="report output directory")
    p_cmp.add_argument(
        "--no-figures", dest="figures", action="store_false",
        help="skip PNG rendering",
    )
    p_cmp.set_defaults(func=cmd_compare, figures=True)

    p_ranks = subparsers.add_parser("analyze-ranks", help="PPL rank bucket analysis")
    p_ranks.add_argument("--dataset", required=True)
    p_ranks.add_argument("--run-dir", required=True,
                         help="directory with candidates.jsonl and final.jsonl")
    p_ranks.add_argument("--nli-backend", required=True)
    p_ranks.add_argument("--scorer-backend", action="append", help="PPL scorer")
    p_ranks.add_argument("--sim-threshold", type=float, default=0.25)
    p_ranks.add_argument("--entail-threshold", type=float, default=0.5)
    p_ranks.add_argument("--buckets", type=int, default=10)
    p_ranks.add_argument("--aggregation", choices=["max", "mean"], default="max")
    p_ranks.add_argument("--out", help="output directory (default: run dir)")
    p_ranks.add_argument(
        "--no-figures", dest="figures", action="store_false",
        help="skip PNG rendering",
    )
    p_ranks.set_defaults(func=cmd_analyze_ranks, figures=True)

    p_serve = subparsers.add_parser("serve-mock", help="serve the in-process mocks over HTTP")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8787)
    p_serve.add_argument("--backend-id", default="mock-server")
    p_serve.set_defaults(func=cmd_serve_mock)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, DatasetError, AggregationError, CapabilityError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ProtocolError, TransportError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
