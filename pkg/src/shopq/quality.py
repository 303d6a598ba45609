"""Suggestion quality scoring: judge verdicts, aggregation, diversity.

Five dimensions (relevance, usefulness, answerability, fluency, style)
are scored by an LLM judge returning one-token verdicts; scores per
(dimension, variant) cell are yes-proportions.  Diversity is measured
deterministically from three components (length bins, pairwise lexical
distance, aspect clusters) and reported, not judged.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from statistics import mean

from .backend import CachingClient, GenRequest
from .corpus import ProductContext
from .errors import ContractViolation, ShopqError
from .parsing import DATA_DIGESTS, QuestionSuggestion, content_stems, suggestion_ref, tokenize
from .prompts import DIMENSIONS, render_judge_prompt

VARIANTS = ("icl_zero_shot", "icl_few_shot", "sft")

_VARIANT_TITLES = {
    "icl_zero_shot": "ICL (zero-shot)",
    "icl_few_shot": "ICL (few-shot)",
    "sft": "SFT",
}

_ASPECT_CLUSTER_JACCARD = 0.5
_DIVERSITY_THRESHOLD = 0.75

# Length bins in tokens: short <= 8, medium 9-16, long >= 17.
_SHORT_MAX = 8
_MEDIUM_MAX = 16


@dataclass(frozen=True)
class QualityVerdict:
    suggestion_ref: str
    dimension: str
    verdict: str  # yes | partial | no
    judge_model: str
    raw_response: str
    mappable: bool = True

    def __post_init__(self):
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")
        if self.verdict not in ("yes", "partial", "no"):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "partial" and self.dimension != "answerability":
            raise ValueError("partial verdicts are only legal for answerability")

    def to_record(self) -> dict:
        return {
            "suggestion_ref": self.suggestion_ref,
            "dimension": self.dimension,
            "verdict": self.verdict,
            "judge_model": self.judge_model,
            "raw_response_sha256": hashlib.sha256(self.raw_response.encode("utf-8")).hexdigest(),
            "mappable": self.mappable,
        }


def map_verdict_token(response: str, dimension: str) -> str | None:
    """First YES/PARTIAL/NO token of the response, case-insensitive.

    PARTIAL belongs to the answerability vocabulary only; for other
    dimensions the scan looks for YES/NO alone.  None when no verdict
    token appears at all.
    """
    allowed = {"yes", "no"}
    if dimension == "answerability":
        allowed.add("partial")
    for token in tokenize(response):
        if token in allowed:
            return token
    return None


def judge(
    suggestion: QuestionSuggestion,
    context: ProductContext,
    dimension: str,
    client: CachingClient,
    judge_model: str = "judge",
    max_tokens: int = 16,
) -> QualityVerdict:
    """Score one suggestion on one dimension via the configured backend.

    Unmappable responses are recorded as ``no`` with ``mappable=False``
    so aggregation policy can decide whether to count or exclude them.
    """
    if dimension not in DIMENSIONS:
        raise ContractViolation(f"unknown dimension {dimension!r}")
    prompt = render_judge_prompt(suggestion.question, context, dimension)
    request = GenRequest(
        prompt=prompt, model_id=judge_model, temperature=0.0, max_tokens=max_tokens
    )
    try:
        completion = client.generate(request)
    except ShopqError as exc:
        exc.args = (f"judging {suggestion_ref(suggestion)}/{dimension}: {exc}",)
        raise
    token = map_verdict_token(completion.text, dimension)
    return QualityVerdict(
        suggestion_ref=suggestion_ref(suggestion),
        dimension=dimension,
        verdict=token if token is not None else "no",
        judge_model=judge_model,
        raw_response=completion.text,
        mappable=token is not None,
    )


def judge_all(
    suggestions_with_contexts,
    client: CachingClient,
    judge_model: str = "judge",
    dimensions=DIMENSIONS,
    parallelism: int = 1,
) -> list[QualityVerdict]:
    """Judge every (suggestion, dimension) pair; order-stable fan-out.

    With parallelism > 1 the pairs fan out across worker threads, bounded
    by the client's shared rate limiter; output order is unaffected.
    """
    tasks = [
        (suggestion, context, dimension)
        for suggestion, context in suggestions_with_contexts
        for dimension in dimensions
    ]
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(
                pool.map(lambda t: judge(t[0], t[1], t[2], client, judge_model), tasks)
            )
    return [judge(s, c, d, client, judge_model) for s, c, d in tasks]


@dataclass(frozen=True)
class CellScore:
    yes: int
    partial: int
    no: int

    @property
    def total(self) -> int:
        return self.yes + self.partial + self.no

    @property
    def score(self) -> float:
        return self.yes / self.total

    @property
    def partial_among_negative(self) -> float | None:
        negative = self.partial + self.no
        if negative == 0:
            return None
        return self.partial / negative


@dataclass
class QualityTable:
    """Per (dimension, variant) judge outcomes; empty cells stay absent."""

    cells: dict[tuple[str, str], CellScore] = field(default_factory=dict)

    def score(self, dimension: str, variant: str) -> float | None:
        cell = self.cells.get((dimension, variant))
        return cell.score if cell else None

    def sample_size(self, dimension: str, variant: str) -> int:
        cell = self.cells.get((dimension, variant))
        return cell.total if cell else 0


def aggregate(
    verdicts: list[QualityVerdict],
    variant_labels: dict[str, str],
    exclude_unmappable: bool = False,
) -> QualityTable:
    """Fold verdicts into yes-proportion cells, keyed by variant label.

    Order-free: any permutation of the verdict list yields the same
    table.  Default policy counts unmappable responses as ``no``.
    """
    counts: dict[tuple[str, str], dict[str, int]] = {}
    for verdict in verdicts:
        variant = variant_labels.get(verdict.suggestion_ref)
        if variant is None:
            raise ContractViolation(f"verdict {verdict.suggestion_ref} has no variant label")
        if exclude_unmappable and not verdict.mappable:
            continue
        cell = counts.setdefault((verdict.dimension, variant), {"yes": 0, "partial": 0, "no": 0})
        cell[verdict.verdict] += 1

    table = QualityTable()
    for key, cell in counts.items():
        table.cells[key] = CellScore(yes=cell["yes"], partial=cell["partial"], no=cell["no"])
    return table


def aggregate_records(records: list[dict]) -> QualityTable:
    """Rebuild a table from persisted verdict-log records.

    Records carry their variant label, so saved runs can be re-reported
    without the original suggestion objects.
    """
    counts: dict[tuple[str, str], dict[str, int]] = {}
    for record in records:
        key = (record["dimension"], record["variant"])
        cell = counts.setdefault(key, {"yes": 0, "partial": 0, "no": 0})
        cell[record["verdict"]] += 1
    table = QualityTable()
    for key, cell in counts.items():
        table.cells[key] = CellScore(yes=cell["yes"], partial=cell["partial"], no=cell["no"])
    return table


@dataclass(frozen=True)
class DiversityReport:
    length_diversity: float
    lexical_diversity: float
    aspect_diversity: float
    overall: float
    list_size: int

    def to_record(self) -> dict:
        return {
            "length_diversity": self.length_diversity,
            "lexical_diversity": self.lexical_diversity,
            "aspect_diversity": self.aspect_diversity,
            "overall": self.overall,
            "list_size": self.list_size,
        }


def _jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 1.0
    union = a | b
    return len(a & b) / len(union)


def _length_bin(question: str) -> str:
    n = len(tokenize(question))
    if n <= _SHORT_MAX:
        return "short"
    if n <= _MEDIUM_MAX:
        return "medium"
    return "long"


def diversity(suggestions: list[QuestionSuggestion]) -> DiversityReport:
    """Deterministic diversity of one question list.

    length: distinct occupied length bins / min(size, 3).
    lexical: mean pairwise (1 - Jaccard) over content-stem sets.
    aspect: connected components under Jaccard >= 0.5, over size.
    Singleton lists are fully diverse by definition; components are
    invariant under reordering the list.
    """
    if not suggestions:
        raise ContractViolation("diversity requires a non-empty question list")
    size = len(suggestions)
    if size == 1:
        return DiversityReport(1.0, 1.0, 1.0, 1.0, 1)

    stem_sets = [content_stems(s.question) for s in suggestions]

    bins = {_length_bin(s.question) for s in suggestions}
    length_diversity = len(bins) / min(size, 3)

    distances = [
        1.0 - _jaccard(stem_sets[i], stem_sets[j])
        for i in range(size)
        for j in range(i + 1, size)
    ]
    lexical_diversity = mean(distances)

    parent = list(range(size))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(size):
        for j in range(i + 1, size):
            if _jaccard(stem_sets[i], stem_sets[j]) >= _ASPECT_CLUSTER_JACCARD:
                parent[find(i)] = find(j)
    clusters = len({find(i) for i in range(size)})
    aspect_diversity = clusters / size

    overall = mean((length_diversity, lexical_diversity, aspect_diversity))
    return DiversityReport(
        length_diversity=length_diversity,
        lexical_diversity=lexical_diversity,
        aspect_diversity=aspect_diversity,
        overall=overall,
        list_size=size,
    )


def report(table: QualityTable, diversity_reports: list[DiversityReport]) -> dict:
    """Build the machine- and human-readable evaluation report.

    Machine form: one record per cell plus a diversity summary and the
    digests of the shipped screening data files.  Human form: a plain
    table with one row per dimension and one column per variant.
    """
    cells = []
    for (dimension, variant), cell in sorted(table.cells.items()):
        record = {
            "dimension": dimension,
            "variant": variant,
            "yes": cell.yes,
            "partial": cell.partial,
            "no": cell.no,
            "total": cell.total,
            "score": round(cell.score, 4),
        }
        if dimension == "answerability" and cell.partial_among_negative is not None:
            record["partial_among_negative"] = round(cell.partial_among_negative, 4)
        cells.append(record)

    diversity_summary = None
    if diversity_reports:
        overall_mean = mean(r.overall for r in diversity_reports)
        diversity_summary = {
            "lists": len(diversity_reports),
            "mean_overall": round(overall_mean, 4),
            "threshold": _DIVERSITY_THRESHOLD,
            "meets_threshold": overall_mean >= _DIVERSITY_THRESHOLD,
        }

    return {
        "cells": cells,
        "diversity": diversity_summary,
        "data_digests": dict(DATA_DIGESTS),
        "human_readable": _render_table(table, diversity_summary),
    }


def _render_table(table: QualityTable, diversity_summary: dict | None) -> str:
    header = ["Metric"] + [_VARIANT_TITLES[v] for v in VARIANTS]
    rows = [header]
    for dimension in DIMENSIONS:
        row = [dimension.capitalize()]
        for variant in VARIANTS:
            score = table.score(dimension, variant)
            row.append("-" if score is None else f"{score:.2f}")
        rows.append(row)

    widths = [max(len(row[col]) for row in rows) for col in range(len(header))]
    lines = [
        "  ".join(cell.ljust(widths[col]) for col, cell in enumerate(row)).rstrip()
        for row in rows
    ]
    if diversity_summary is not None:
        status = "met" if diversity_summary["meets_threshold"] else "not met"
        lines.append("")
        lines.append(
            f"Mean overall diversity across {diversity_summary['lists']} lists: "
            f"{diversity_summary['mean_overall']:.2f} "
            f"(>= {diversity_summary['threshold']:.2f} threshold: {status})"
        )
    return "\n".join(lines)
