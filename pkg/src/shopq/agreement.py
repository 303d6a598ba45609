"""Percent agreement between human and automatic quality annotations.

Labels are binary yes/no per (item, dimension); ternary answerability
verdicts collapse partial to no before comparison.  The headline number
is raw percent agreement per dimension plus their unweighted mean;
Cohen's kappa is computed as a supplementary column only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .errors import ContractViolation, InputFormatError

LABELS = ("yes", "no")
ANNOTATORS = ("human", "auto")


@dataclass(frozen=True)
class AnnotationRecord:
    item_id: str
    dimension: str
    label: str
    annotator: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be yes|no, got {self.label!r}")
        if self.annotator not in ANNOTATORS:
            raise ValueError(f"annotator must be human|auto, got {self.annotator!r}")


@dataclass(frozen=True)
class DimensionAgreement:
    matches: int
    total: int

    @property
    def percent(self) -> float:
        return 100.0 * self.matches / self.total


@dataclass
class AgreementReport:
    per_dimension: dict[str, DimensionAgreement] = field(default_factory=dict)
    excluded_pairs: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    kappa: dict[str, float] = field(default_factory=dict)  # supplementary only

    @property
    def overall_percent(self) -> float:
        percents = [d.percent for d in self.per_dimension.values()]
        return sum(percents) / len(percents)

    def to_record(self) -> dict:
        return {
            "per_dimension": {
                dim: {"matches": d.matches, "total": d.total, "percent": round(d.percent, 4)}
                for dim, d in sorted(self.per_dimension.items())
            },
            "overall_percent": round(self.overall_percent, 4) if self.per_dimension else None,
            "excluded_pairs": self.excluded_pairs,
            "warnings": self.warnings,
            "kappa_supplementary": {k: round(v, 4) for k, v in sorted(self.kappa.items())},
        }

    def render_text(self) -> str:
        lines = ["Dimension      Matches  Total  Percent   Kappa*"]
        for dim, d in sorted(self.per_dimension.items()):
            kappa = self.kappa.get(dim)
            kappa_text = f"{kappa:7.3f}" if kappa is not None else "      -"
            lines.append(f"{dim:<14} {d.matches:>7}  {d.total:>5}  {d.percent:6.2f}%  {kappa_text}")
        if self.per_dimension:
            lines.append(f"Overall (unweighted mean): {self.overall_percent:.2f}%")
        if self.excluded_pairs:
            lines.append(f"Excluded (no counterpart): {len(self.excluded_pairs)}")
        lines.append("* Cohen's kappa is a supplementary column beyond percent agreement.")
        return "\n".join(lines)


def _index(records: list[AnnotationRecord]) -> dict[tuple[str, str], AnnotationRecord]:
    indexed: dict[tuple[str, str], AnnotationRecord] = {}
    for record in records:
        key = (record.item_id, record.dimension)
        if key in indexed:
            raise ContractViolation(
                f"duplicate annotation for item={record.item_id} dimension={record.dimension}"
            )
        indexed[key] = record
    return indexed


def _cohen_kappa(pairs: list[tuple[str, str]]) -> float:
    """Kappa over binary label pairs; degenerate marginals map to 1/0."""
    n = len(pairs)
    po = sum(1 for a, b in pairs if a == b) / n
    a_yes = sum(1 for a, _ in pairs if a == "yes") / n
    b_yes = sum(1 for _, b in pairs if b == "yes") / n
    pe = a_yes * b_yes + (1 - a_yes) * (1 - b_yes)
    if pe == 1.0:
        return 1.0 if po == 1.0 else 0.0
    return (po - pe) / (1 - pe)


def percent_agreement(
    human: list[AnnotationRecord], auto: list[AnnotationRecord]
) -> AgreementReport:
    """Match human and auto labels per (item, dimension) and score them.

    Records without a counterpart are excluded and listed; dimensions
    with zero overlap are omitted with a warning.  The computation is
    symmetric in its two inputs.
    """
    left = _index(human)
    right = _index(auto)
    report = AgreementReport()

    shared = set(left) & set(right)
    for key in sorted(set(left) ^ set(right)):
        report.excluded_pairs.append(
            {"item_id": key[0], "dimension": key[1], "reason": "missing_counterpart"}
        )

    by_dimension: dict[str, list[tuple[str, str]]] = {}
    for key in shared:
        by_dimension.setdefault(key[1], []).append((left[key].label, right[key].label))

    dimensions_seen = {key[1] for key in set(left) | set(right)}
    for dimension in sorted(dimensions_seen):
        pairs = by_dimension.get(dimension)
        if not pairs:
            report.warnings.append(f"dimension {dimension!r} has no overlapping records; omitted")
            continue
        matches = sum(1 for a, b in pairs if a == b)
        report.per_dimension[dimension] = DimensionAgreement(matches=matches, total=len(pairs))
        report.kappa[dimension] = _cohen_kappa(pairs)

    return report


def load_annotations(path) -> list[AnnotationRecord]:
    """Read {item_id, dimension, label, annotator} rows from a CSV file.

    Labels are case-insensitive; ``partial`` collapses to ``no`` to match
    binary human labels.
    """
    records = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        required = {"item_id", "dimension", "label", "annotator"}
        if reader.fieldnames is None or not required.issubset(set(reader.fieldnames)):
            raise InputFormatError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            label = row["label"].strip().lower()
            if label == "partial":
                label = "no"
            records.append(
                AnnotationRecord(
                    item_id=row["item_id"].strip(),
                    dimension=row["dimension"].strip().lower(),
                    label=label,
                    annotator=row["annotator"].strip().lower(),
                )
            )
    return records
