"""System evaluation and comparison reports.

``evaluate_system`` turns one run's selected responses into raw metric
values; ``compare_systems`` lines several systems up, adds the min-max
normalized summary averages, and renders the table as JSON, aligned text,
and CSV. Perplexity is computed from the loglikelihood endpoint as
exp(-total_loglik / token_count); the first scorer channel drops
per-response values above 10,000 before averaging, the second does not.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .consistency import persona_entailment
from .core import DialogueInstance
from .errors import ValidationError
from .metrics import (
    PPL_FILTER_DEFAULT,
    SystemResults,
    c_mean,
    distinct_n,
    normalized_averages,
    ppl_aggregate,
    repetition_rate,
)

REPORT_COLUMNS = (
    ("ppl_a", "PPL_a"),
    ("ppl_b", "PPL_b"),
    ("dis1", "Dis-1"),
    ("dis2", "Dis-2"),
    ("c_score", "C"),
    ("avg", "Avg"),
    ("rep", "Rep"),
    ("avg_r", "Avg-R"),
    ("generation_seconds", "Gen(s)"),
    ("evaluation_seconds", "Eval(s)"),
)


def response_perplexity(scorer, text: str) -> float:
    """exp of the mean negative token loglikelihood under the scorer."""
    total, count = scorer.loglikelihood("", text)
    return math.exp(-total / count)


def evaluate_system(
    instances: list[DialogueInstance],
    finals: list[dict],
    nli_backend,
    scorer_a,
    scorer_b=None,
    system_name: str = "system",
    block: str = "",
    generation_seconds: float = 0.0,
    evaluation_seconds: float = 0.0,
    ppl_filter: float | None = PPL_FILTER_DEFAULT,
) -> SystemResults:
    """Compute the full raw-metric row for one system's selected responses.

    ``finals`` carries one {"instance_id", "response"} record per instance.
    Responses that tokenize to nothing cannot be scored for perplexity and
    are skipped by the PPL channels only.
    """
    by_id = {f["instance_id"]: f["response"] for f in finals}
    missing = [inst.id for inst in instances if inst.id not in by_id]
    if missing:
        raise ValidationError(f"finals missing instances: {missing}")

    ordered = [(inst, by_id[inst.id]) for inst in instances]
    responses = [text for _, text in ordered]
    golds = [inst.gold for inst, _ in ordered]

    scorable = [t for t in responses if t.strip()]
    if not scorable:
        raise ValidationError("no scorable (non-empty) responses")
    ppl_a = ppl_aggregate(
        [response_perplexity(scorer_a, t) for t in scorable], ppl_filter
    )
    scorer_b = scorer_b or scorer_a
    ppl_b = ppl_aggregate(
        [response_perplexity(scorer_b, t) for t in scorable], None
    )

    labels = []
    for inst, text in ordered:
        _, label = persona_entailment(nli_backend, inst.persona, text, "max")
        labels.append(label)

    return SystemResults(
        system_name=system_name,
        responses=tuple((inst.id, text) for inst, text in ordered),
        ppl_a=ppl_a,
        ppl_b=ppl_b,
        dis1=distinct_n(responses, 1),
        dis2=distinct_n(responses, 2),
        c_score=c_mean(labels),
        rep=repetition_rate(responses, golds),
        generation_seconds=generation_seconds,
        evaluation_seconds=evaluation_seconds,
        block=block,
    )


@dataclass(frozen=True)
class MetricsReport:
    """Comparison table: raw columns plus normalized Avg / Avg-R per system."""

    grouping: str
    rows: tuple[dict, ...]

    def to_json(self) -> dict:
        return {"grouping": self.grouping, "rows": [dict(r) for r in self.rows]}

    def render_text(self) -> str:
        headers = ["System"] + [label for _, label in REPORT_COLUMNS]
        table = [headers]
        for row in self.rows:
            cells = [row["system_name"]]
            for key, _ in REPORT_COLUMNS:
                value = row[key]
                cells.append(f"{value:.4f}" if isinstance(value, float) else str(value))
            table.append(cells)
        widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
        lines = []
        for i, cells in enumerate(table):
            lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["system"] + [key for key, _ in REPORT_COLUMNS] + ["block"])
            for row in self.rows:
                writer.writerow(
                    [row["system_name"]]
                    + [row[key] for key, _ in REPORT_COLUMNS]
                    + [row["block"]]
                )


def compare_systems(
    runs: list[SystemResults], grouping: str = "per_block"
) -> MetricsReport:
    """Build the comparison report for two or more systems.

    All systems must cover exactly the same instance set; the error message
    lists the symmetric difference when they do not.
    """
    if len(runs) < 2:
        raise ValidationError("need at least 2 systems to compare")
    reference = {i for i, _ in runs[0].responses}
    for other in runs[1:]:
        ids = {i for i, _ in other.responses}
        if ids != reference:
            diff = sorted(ids.symmetric_difference(reference))
            raise ValidationError(
                f"systems {runs[0].system_name!r} and {other.system_name!r} "
                f"cover different instances; symmetric difference: {diff}"
            )
    averages = normalized_averages(runs, grouping)
    rows = []
    for run in runs:
        avg, avg_r = averages[run.system_name]
        rows.append(
            {
                "system_name": run.system_name,
                "block": run.block,
                "ppl_a": run.ppl_a,
                "ppl_b": run.ppl_b,
                "dis1": run.dis1,
                "dis2": run.dis2,
                "c_score": run.c_score,
                "avg": avg,
                "rep": run.rep,
                "avg_r": avg_r,
                "generation_seconds": run.generation_seconds,
                "evaluation_seconds": run.evaluation_seconds,
            }
        )
    return MetricsReport(grouping=grouping, rows=tuple(rows))


def write_report_files(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    """report.json + report.txt + report.csv in the run directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    with json_path.open("w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    txt_path = out_dir / "report.txt"
    txt_path.write_text(report.render_text(), encoding="utf-8")
    csv_path = out_dir / "report.csv"
    report.write_csv(csv_path)
    return [json_path, txt_path, csv_path]
