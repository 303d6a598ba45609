"""Curation and export of (context, question) fine-tuning pairs.

Generation runs produce candidate pairs; a decisions file (from any
editor or the demo UI) approves, edits, or rejects them; export writes
newline-delimited {input, target} records with a deterministic seeded
split and a manifest recording provenance.  Fine-tuning itself happens
elsewhere; the manifest only records the intended hyperparameters.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import ProductContext
from .errors import ExportError
from .parsing import QuestionSuggestion, lint_style

REVIEW_STATUSES = ("pending", "approved", "edited", "rejected")
EXPORTABLE_STATUSES = ("approved", "edited")

# Provenance only: the artifact does not train.
RECORDED_HYPERPARAMETERS = {"epochs": 8, "learning_rate": 1e-5}

_INPUT_FORMAT_NOTE = (
    "inputs are bare product contexts; wrapping them in an instruction "
    "preamble is a documented alternative, not applied here"
)


def _normalize(text: str) -> str:
    return " ".join(text.casefold().split())


def pair_id_for(context_text: str, question: str) -> str:
    """Stable 16-hex id over the normalized (context, question) pair."""
    payload = f"{_normalize(context_text)}\x1f{_normalize(question)}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class TrainingPair:
    pair_id: str
    context_text: str
    question: str
    review_status: str = "pending"
    edited_question: str | None = None
    reject_reason: str | None = None

    def __post_init__(self):
        if self.review_status not in REVIEW_STATUSES:
            raise ValueError(f"unknown review status {self.review_status!r}")
        if self.review_status == "edited" and not self.edited_question:
            raise ValueError("edited pairs must carry edited_question")

    @property
    def export_question(self) -> str:
        return self.edited_question if self.review_status == "edited" else self.question

    def to_record(self) -> dict:
        record = {
            "pair_id": self.pair_id,
            "context_text": self.context_text,
            "question": self.question,
            "review_status": self.review_status,
        }
        if self.edited_question is not None:
            record["edited_question"] = self.edited_question
        if self.reject_reason is not None:
            record["reject_reason"] = self.reject_reason
        return record

    @classmethod
    def from_record(cls, record: dict) -> "TrainingPair":
        return cls(
            pair_id=record["pair_id"],
            context_text=record["context_text"],
            question=record["question"],
            review_status=record.get("review_status", "pending"),
            edited_question=record.get("edited_question"),
            reject_reason=record.get("reject_reason"),
        )


def curate(
    run_output: list[tuple[ProductContext, QuestionSuggestion]],
    lint_gate: bool = True,
) -> list[TrainingPair]:
    """Deduplicate generated pairs and optionally pre-reject lint failures.

    Duplicates collapse on the normalized (context, question) pair; with
    the lint gate on, style violations mark the pair rejected up front
    with the violation recorded for the reviewer.
    """
    pairs: dict[str, TrainingPair] = {}
    for context, suggestion in run_output:
        pid = pair_id_for(context.text, suggestion.question)
        if pid in pairs:
            continue
        status = "pending"
        reject_reason = None
        if lint_gate:
            style = lint_style(suggestion.question, product_title=context.product_title)
            if not style.passes:
                status = "rejected"
                reject_reason = ",".join(style.violations)
        pairs[pid] = TrainingPair(
            pair_id=pid,
            context_text=context.text,
            question=suggestion.question,
            review_status=status,
            reject_reason=reject_reason,
        )
    return [pairs[p] for p in sorted(pairs)]


@dataclass(frozen=True)
class ReviewDecision:
    pair_id: str
    status: str
    edited_question: str | None = None

    def __post_init__(self):
        if self.status not in REVIEW_STATUSES:
            raise ValueError(f"unknown review status {self.status!r}")
        if self.status == "edited" and not self.edited_question:
            raise ValueError("edited decisions must carry the edited text")


def apply_review(
    pairs: list[TrainingPair], decisions: list[ReviewDecision]
) -> tuple[list[TrainingPair], list[dict]]:
    """Apply review decisions; unknown pair ids become error entries.

    Partial failure policy: every decision that references a real pair
    is applied, the rest are reported.
    """
    by_id = {pair.pair_id: pair for pair in pairs}
    errors: list[dict] = []
    for decision in decisions:
        pair = by_id.get(decision.pair_id)
        if pair is None:
            errors.append({"pair_id": decision.pair_id, "error": "unknown_pair_id"})
            continue
        by_id[decision.pair_id] = replace(
            pair,
            review_status=decision.status,
            edited_question=decision.edited_question
            if decision.status == "edited"
            else pair.edited_question,
        )
    return [by_id[pair.pair_id] for pair in pairs], errors


def load_decisions(path) -> list[ReviewDecision]:
    """Read one {pair_id, status, edited_question?} JSON record per line."""
    decisions = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            decisions.append(
                ReviewDecision(
                    pair_id=record["pair_id"],
                    status=record["status"],
                    edited_question=record.get("edited_question"),
                )
            )
    return decisions


@dataclass(frozen=True)
class ManifestConfig:
    train_fraction: float = 0.9
    validation_fraction: float = 0.1
    base_model_note: str = "any instruction-following LLM; 11B-class seq2seq used originally"
    source_run_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if abs(self.train_fraction + self.validation_fraction - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


@dataclass(frozen=True)
class DatasetManifest:
    pair_count: int
    train_count: int
    validation_count: int
    split_ratios: dict
    base_model_note: str
    recorded_hyperparameters: dict
    source_run_ids: tuple[str, ...]
    seed: int
    input_format_note: str = _INPUT_FORMAT_NOTE

    def to_record(self) -> dict:
        return {
            "pair_count": self.pair_count,
            "train_count": self.train_count,
            "validation_count": self.validation_count,
            "split_ratios": self.split_ratios,
            "base_model_note": self.base_model_note,
            "recorded_hyperparameters": self.recorded_hyperparameters,
            "source_run_ids": list(self.source_run_ids),
            "seed": self.seed,
            "input_format_note": self.input_format_note,
        }


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + f".tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def export(
    pairs: list[TrainingPair],
    out_dir,
    config: ManifestConfig | None = None,
    seed: int = 0,
) -> tuple[DatasetManifest, list[str]]:
    """Write train/validation JSONL files plus the manifest.

    Only approved and edited pairs are exported; edited text replaces the
    original question.  The split is a seeded shuffle over pair ids, so
    identical inputs and seed yield byte-identical files.  Returns the
    manifest and any warnings (e.g. an empty validation split).
    """
    config = config or ManifestConfig()
    exportable = [p for p in pairs if p.review_status in EXPORTABLE_STATUSES]
    if not exportable:
        raise ExportError("no approved or edited pairs to export")

    exportable = sorted(exportable, key=lambda p: p.pair_id)
    random.Random(seed).shuffle(exportable)
    n_val = int(len(exportable) * config.validation_fraction)
    validation, train = exportable[:n_val], exportable[n_val:]

    warnings = []
    if not validation:
        warnings.append("validation split is empty; all pairs landed in train")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def lines(split: list[TrainingPair]) -> str:
        return "".join(
            json.dumps({"input": p.context_text, "target": p.export_question}, sort_keys=True)
            + "\n"
            for p in split
        )

    _atomic_write_text(out / "train.jsonl", lines(train))
    _atomic_write_text(out / "validation.jsonl", lines(validation))

    manifest = DatasetManifest(
        pair_count=len(exportable),
        train_count=len(train),
        validation_count=len(validation),
        split_ratios={
            "train": config.train_fraction,
            "validation": config.validation_fraction,
        },
        base_model_note=config.base_model_note,
        recorded_hyperparameters=dict(RECORDED_HYPERPARAMETERS),
        source_run_ids=config.source_run_ids,
        seed=seed,
    )
    _atomic_write_text(
        out / "manifest.json", json.dumps(manifest.to_record(), sort_keys=True, indent=2) + "\n"
    )
    return manifest, warnings
