"""Parsing and deterministic screening of model suggestion output.

The generation backend is instructed to emit pipe-separated columnar
lines: ``question | type | score``.  Model output is untrusted, so every
non-blank line lands either in the parsed suggestions or in the rejected
list with a reason; nothing is fatal.

Also hosts the deterministic style lint (pronouns, preference
elicitation, anaphora advisory) and a cheap lexical answerability
pre-screen used before any LLM judging.  Both rely on a fixed, shipped
150-word stopword list and a rule-based suffix stemmer:

  1. tokens shorter than 4 chars are left alone;
  2. ``ies``/``ied`` endings become ``y``;
  3. otherwise the longest matching suffix from a fixed table is
     stripped once, if at least 3 chars remain;
  4. a trailing doubled consonant (except ss/ll/zz) is undoubled;
  5. a trailing ``e`` is dropped from stems longer than 3 chars.

Determinism across platforms is the goal; linguistic subtlety is not.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib.resources import files

from .corpus import ProductContext

QUESTION_TYPES = (
    "broad_features",
    "specific_aspect",
    "compatibility",
    "comparison",
    "buying_guide",
    "other",
)

TYPE_LABELS = {
    "broad_features": "broad features",
    "specific_aspect": "specific product aspect",
    "compatibility": "compatibility",
    "comparison": "comparison",
    "buying_guide": "buying guide",
    "other": "other",
}

STYLE_VIOLATIONS = (
    "first_person_pronoun",
    "second_person_pronoun",
    "preference_elicitation",
    "not_a_question",
    "missing_anaphora_opportunity",
)

# Advisory violations do not flip the pass verdict.
_ADVISORY = frozenset({"missing_anaphora_opportunity"})

_FIRST_PERSON = frozenset({"i", "me", "my", "mine", "we", "us", "our", "ours"})
_SECOND_PERSON = frozenset({"you", "your", "yours"})
_PREFERENCE_PATTERNS = (
    "do you prefer",
    "would you like",
    "what do you think",
    "do you want",
)

_HEADER_QUESTION = frozenset({"question", "questions"})
_HEADER_TYPE = frozenset({"type", "question type"})
_HEADER_SCORE = frozenset({"score", "interest score", "customer interest score"})

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_SUFFIXES = (
    "ization",
    "isation",
    "ities",
    "ation",
    "izing",
    "ising",
    "ingly",
    "iness",
    "ments",
    "ized",
    "ised",
    "ness",
    "ment",
    "ings",
    "ions",
    "ing",
    "ion",
    "ity",
    "ers",
    "est",
    "ed",
    "es",
    "er",
    "ly",
    "s",
)


def _load_data_text(name: str) -> str:
    return files("shopq.data").joinpath(name).read_text(encoding="utf-8")


def _load_data_bytes(name: str) -> bytes:
    return files("shopq.data").joinpath(name).read_bytes()


STOPWORDS = frozenset(_load_data_text("stopwords.txt").split())

_SYNONYMS_RAW = json.loads(_load_data_text("question_type_synonyms.json"))

DATA_DIGESTS = {
    "stopwords.txt": hashlib.sha256(_load_data_bytes("stopwords.txt")).hexdigest(),
    "question_type_synonyms.json": hashlib.sha256(
        _load_data_bytes("question_type_synonyms.json")
    ).hexdigest(),
}


def _normalize_type_key(text: str) -> str:
    return " ".join(text.lower().replace("_", " ").strip(" .,:;-").split())


def _build_synonym_map() -> dict[str, str]:
    table: dict[str, str] = {}
    for qtype, synonyms in _SYNONYMS_RAW.items():
        table[_normalize_type_key(qtype)] = qtype
        for syn in synonyms:
            table[_normalize_type_key(syn)] = qtype
    return table


_SYNONYM_MAP = _build_synonym_map()


def resolve_question_type(label: str) -> str:
    """Map a free-form type label to a canonical question type (or other)."""
    return _SYNONYM_MAP.get(_normalize_type_key(label), "other")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens; everything else is a separator."""
    return _TOKEN_RE.findall(text.lower())


def stem(token: str) -> str:
    """Apply the shipped suffix-stripping rules to one lowercase token."""
    if len(token) <= 3:
        return token
    if token.endswith("ies") or token.endswith("ied"):
        return token[:-3] + "y"
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            if suffix == "s" and token.endswith("ss"):
                continue
            token = token[: -len(suffix)]
            break
    if (
        len(token) >= 4
        and token[-1] == token[-2]
        and token[-1] not in "aeiou"
        and token[-1] not in "slz"
    ):
        token = token[:-1]
    if len(token) > 3 and token.endswith("e"):
        token = token[:-1]
    return token


def content_stems(text: str) -> set[str]:
    """Stems of the content words: stopwords and interrogatives excluded."""
    return {stem(tok) for tok in tokenize(text) if tok not in STOPWORDS}


@dataclass(frozen=True)
class QuestionSuggestion:
    question: str
    question_type: str
    interest_score: int
    context_id: str
    raw_line: str

    def __post_init__(self):
        if not self.question or not self.question.endswith("?"):
            raise ValueError(f"question must end with '?': {self.question!r}")
        if self.question != self.question.strip() or "|" in self.question or "\n" in self.question:
            raise ValueError("question must be trimmed, single-line, and pipe-free")
        if self.question_type not in QUESTION_TYPES:
            raise ValueError(f"unknown question type {self.question_type!r}")
        if not 1 <= self.interest_score <= 10:
            raise ValueError(f"interest score must be in [1,10], got {self.interest_score}")

    @classmethod
    def build(
        cls, question: str, question_type: str, interest_score: int, context_id: str
    ) -> "QuestionSuggestion":
        """Construct with the canonical rendering as raw_line (round-trips)."""
        if question_type not in TYPE_LABELS:
            raise ValueError(f"unknown question type {question_type!r}")
        line = f"{question} | {TYPE_LABELS[question_type]} | {interest_score}"
        return cls(
            question=question,
            question_type=question_type,
            interest_score=interest_score,
            context_id=context_id,
            raw_line=line,
        )

    def to_record(self) -> dict:
        return {
            "question": self.question,
            "question_type": self.question_type,
            "interest_score": self.interest_score,
            "context_id": self.context_id,
            "raw_line": self.raw_line,
        }

    @classmethod
    def from_record(cls, record: dict) -> "QuestionSuggestion":
        return cls(
            question=record["question"],
            question_type=record["question_type"],
            interest_score=record["interest_score"],
            context_id=record["context_id"],
            raw_line=record["raw_line"],
        )


def suggestion_ref(suggestion: "QuestionSuggestion") -> str:
    """Stable 16-hex id for a suggestion; used by verdict logs and bundles."""
    payload = "\x1f".join(
        (
            suggestion.context_id,
            suggestion.question,
            suggestion.question_type,
            str(suggestion.interest_score),
        )
    ).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


@dataclass
class ParseReport:
    suggestions: list[QuestionSuggestion] = field(default_factory=list)
    rejected_lines: list[tuple[str, str]] = field(default_factory=list)


def _is_header(question: str, type_label: str, score: str) -> bool:
    return (
        question.lower() in _HEADER_QUESTION
        and type_label.lower() in _HEADER_TYPE
        and score.lower() in _HEADER_SCORE
    )


def parse_suggestions(raw: str, context_id: str) -> ParseReport:
    """Parse untrusted model output into suggestions plus rejections.

    Every non-blank line ends up in exactly one bucket.  Lines that do
    not have the three-column shape count as ``preamble`` until the
    first valid suggestion has been seen, and ``wrong_field_count``
    afterwards.  Out-of-range scores are rejected, never clamped.
    """
    report = ParseReport()
    for line in raw.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        fields = [part.strip() for part in stripped.split("|")]
        if len(fields) != 3:
            reason = "preamble" if not report.suggestions else "wrong_field_count"
            report.rejected_lines.append((stripped, reason))
            continue
        question, type_label, score_text = fields
        if _is_header(question, type_label, score_text):
            report.rejected_lines.append((stripped, "header"))
            continue
        if not question:
            report.rejected_lines.append((stripped, "empty_question"))
            continue
        if not question.endswith("?"):
            report.rejected_lines.append((stripped, "not_a_question"))
            continue
        try:
            score = int(score_text)
        except ValueError:
            report.rejected_lines.append((stripped, "bad_score"))
            continue
        if not 1 <= score <= 10:
            report.rejected_lines.append((stripped, "score_out_of_range"))
            continue
        report.suggestions.append(
            QuestionSuggestion(
                question=question,
                question_type=resolve_question_type(type_label),
                interest_score=score,
                context_id=context_id,
                raw_line=stripped,
            )
        )
    return report


def render_suggestion_line(suggestion: QuestionSuggestion) -> str:
    """Render the canonical pipe-separated line for a suggestion.

    ``parse_suggestions(render_suggestion_line(s), s.context_id)``
    recovers ``s`` exactly.
    """
    return (
        f"{suggestion.question} | {TYPE_LABELS[suggestion.question_type]}"
        f" | {suggestion.interest_score}"
    )


@dataclass(frozen=True)
class StyleReport:
    passes: bool
    violations: tuple[str, ...]


def lint_style(question: str, product_title: str | None = None) -> StyleReport:
    """Deterministic customer-inquiry style check.

    Hard failures: first/second person pronouns, preference-elicitation
    phrasing, missing terminal question mark.  Advisory only: repeating
    the product title instead of using anaphora.
    """
    violations: list[str] = []
    tokens = set(tokenize(question))
    normalized = " ".join(question.lower().split())

    if tokens & _FIRST_PERSON:
        violations.append("first_person_pronoun")
    if tokens & _SECOND_PERSON:
        violations.append("second_person_pronoun")
    if any(pattern in normalized for pattern in _PREFERENCE_PATTERNS):
        violations.append("preference_elicitation")
    if not question.rstrip().endswith("?"):
        violations.append("not_a_question")
    if product_title:
        title = " ".join(product_title.lower().split())
        if title and normalized.count(title) >= 2:
            violations.append("missing_anaphora_opportunity")

    passes = all(v in _ADVISORY for v in violations)
    return StyleReport(passes=passes, violations=tuple(violations))


def lexical_answerability(question: str, context: ProductContext) -> float:
    """Share of the question's content stems that the context covers.

    Cheap pre-filter for answerability; 0.0 when the question has no
    content words.  Monotone in the context: appending text never
    lowers the score.
    """
    question_stems = content_stems(question)
    if not question_stems:
        return 0.0
    context_stems = content_stems(context.text)
    return len(question_stems & context_stems) / len(question_stems)
