"""Model-agnostic two-stage reranking for persona-based dialogue.

Over-sample a large candidate set from any generation backend, filter it by
TF-IDF coherence against the dialogue history, then pick the final response
by persona entailment. Ships the classic backward-likelihood and
length-normalized-loglikelihood rerankers plus the automatic-metric suite
used to compare them.
"""

from .analysis import CandidateOutcome, InstanceOutcomes, RankAnalysis, rank_analysis
from .baselines import BackwardQuery, lls_rerank, lls_score, mmi_rerank
from .coherence import TfidfModel, build_tfidf, coherence_rank, cosine, tokenize
from .consistency import NliJudgment, persona_entailment, select_final
from .core import (
    Candidate,
    DialogueInstance,
    PipelineConfig,
    ScoreRecord,
    coherence_context,
    load_dataset,
    save_dataset,
)
from .metrics import (
    SystemResults,
    c_mean,
    consistency_score,
    distinct_n,
    normalized_averages,
    ppl_aggregate,
    repetition_rate,
)
from .pipeline import Backends, CandidateCache, RunResult, run_pipeline
from .reporting import MetricsReport, compare_systems, evaluate_system
from .sampling import (
    SamplingRun,
    TokenDistribution,
    oversample,
    sample_sequence,
    top_k_filter,
)

__version__ = "0.1.0"

__all__ = [
    "BackwardQuery",
    "Backends",
    "Candidate",
    "CandidateCache",
    "CandidateOutcome",
    "DialogueInstance",
    "InstanceOutcomes",
    "MetricsReport",
    "NliJudgment",
    "PipelineConfig",
    "RankAnalysis",
    "RunResult",
    "SamplingRun",
    "ScoreRecord",
    "SystemResults",
    "TfidfModel",
    "TokenDistribution",
    "build_tfidf",
    "c_mean",
    "coherence_context",
    "coherence_rank",
    "compare_systems",
    "consistency_score",
    "cosine",
    "distinct_n",
    "evaluate_system",
    "lls_rerank",
    "lls_score",
    "load_dataset",
    "mmi_rerank",
    "normalized_averages",
    "oversample",
    "persona_entailment",
    "ppl_aggregate",
    "rank_analysis",
    "repetition_rate",
    "run_pipeline",
    "sample_sequence",
    "save_dataset",
    "select_final",
    "tokenize",
    "top_k_filter",
]
