"""Catalog/review ingestion and bounded product-context construction.

Reads newline-delimited records in the public Amazon Reviews field naming
(reviews: reviewerID, asin, reviewText, summary, vote, overall,
unixReviewTime; metadata: asin, title, brand, category, description,
feature, price), applies the quality filters (helpfulness votes, Vine
membership, length bounds), and cuts review/catalog snippets at sentence
boundaries into deterministic, content-addressed contexts.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
from dataclasses import dataclass, field

from .errors import ContractViolation, InputFormatError

_VINE_MARKER = "Vine Customer Review"
_SENTENCE_TERMINATORS = ".!?"


def normalize_whitespace(text: str) -> str:
    """Collapse all whitespace runs to single spaces and trim the ends."""
    return " ".join(text.split())


def context_id_for(asin: str, source: str, normalized_text: str) -> str:
    """First 16 hex chars of SHA-256 over (asin, source, normalized text)."""
    payload = "\x1f".join((asin, source, normalized_text)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class Product:
    asin: str
    title: str
    brand: str | None = None
    categories: tuple[str, ...] = ()
    description: tuple[str, ...] = ()
    features: tuple[str, ...] = ()
    price: float | None = None

    def __post_init__(self):
        if not self.asin.strip():
            raise ValueError("asin must be non-empty")
        if not self.title.strip():
            raise ValueError("title must be non-empty")


@dataclass(frozen=True)
class Review:
    asin: str
    reviewer_id: str
    text: str
    summary: str | None = None
    helpful_votes: int = 0
    vine: bool = False
    rating: int = 5
    timestamp: int = 0

    def __post_init__(self):
        if self.helpful_votes < 0:
            raise ValueError("helpful_votes must be >= 0")
        if self.rating not in (1, 2, 3, 4, 5):
            raise ValueError(f"rating must be 1..5, got {self.rating}")


@dataclass(frozen=True)
class FilterPolicy:
    min_helpful_votes: int = 5
    accept_vine: bool = True
    min_text_chars: int = 80
    max_text_chars: int = 2000

    def __post_init__(self):
        if self.min_text_chars >= self.max_text_chars:
            raise ValueError("min_text_chars must be < max_text_chars")


@dataclass(frozen=True)
class ProductContext:
    context_id: str
    asin: str
    source: str  # "review" | "catalog"
    text: str
    product_title: str

    @classmethod
    def build(cls, asin: str, source: str, text: str, product_title: str) -> "ProductContext":
        if source not in ("review", "catalog"):
            raise ValueError(f"source must be review|catalog, got {source!r}")
        normalized = normalize_whitespace(text)
        return cls(
            context_id=context_id_for(asin, source, normalized),
            asin=asin,
            source=source,
            text=normalized,
            product_title=product_title,
        )

    def to_record(self) -> dict:
        return {
            "context_id": self.context_id,
            "asin": self.asin,
            "source": self.source,
            "text": self.text,
            "product_title": self.product_title,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ProductContext":
        return cls(
            context_id=record["context_id"],
            asin=record["asin"],
            source=record["source"],
            text=record["text"],
            product_title=record["product_title"],
        )


@dataclass
class IngestStats:
    """Thread-safe line counters for one ingestion pass."""

    records_loaded: int = 0
    malformed_lines: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def count_loaded(self) -> None:
        with self._lock:
            self.records_loaded += 1

    def count_malformed(self) -> None:
        with self._lock:
            self.malformed_lines += 1


def _as_str_tuple(value) -> tuple[str, ...]:
    """Coerce a string / list-of-strings / nested-list field to a flat tuple."""
    if value is None:
        return ()
    if isinstance(value, str):
        return (value,) if value.strip() else ()
    out: list[str] = []
    for item in value:
        if isinstance(item, str):
            if item.strip():
                out.append(item)
        elif isinstance(item, (list, tuple)):
            out.extend(s for s in item if isinstance(s, str) and s.strip())
    return tuple(out)


def _parse_price(value) -> float | None:
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    cleaned = str(value).strip().lstrip("$").replace(",", "")
    try:
        return float(cleaned)
    except ValueError:
        return None


def _parse_votes(value) -> int:
    """Parse a helpfulness-vote count; absent or unparseable counts as 0."""
    if value is None:
        return 0
    if isinstance(value, int):
        return max(value, 0)
    digits = str(value).replace(",", "").strip()
    if not digits.isdigit():
        return 0
    return int(digits)


def _iter_records(path, stats: IngestStats, build):
    """Yield parsed records from a JSONL file, skipping malformed lines.

    Raises InputFormatError at end of stream when more than half the
    non-blank lines were malformed (the file is probably the wrong one).
    """
    total = 0
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            total += 1
            try:
                raw = json.loads(line)
                if not isinstance(raw, dict):
                    raise ValueError("record is not an object")
                record = build(raw)
            except (ValueError, KeyError, TypeError):
                stats.count_malformed()
                continue
            stats.count_loaded()
            yield record
    if total and stats.malformed_lines * 2 > total:
        raise InputFormatError(
            f"{stats.malformed_lines}/{total} lines malformed in {path}; wrong file format?"
        )


def _build_product(raw: dict) -> Product:
    return Product(
        asin=str(raw["asin"]),
        title=str(raw["title"]),
        brand=str(raw["brand"]) if raw.get("brand") else None,
        categories=_as_str_tuple(raw.get("category")),
        description=_as_str_tuple(raw.get("description")),
        features=_as_str_tuple(raw.get("feature")),
        price=_parse_price(raw.get("price")),
    )


def _build_review(raw: dict) -> Review:
    text = str(raw.get("reviewText", ""))
    vine_field = raw.get("vine")
    vine = vine_field in (True, "Y", "y", "true", "True") or _VINE_MARKER in text
    return Review(
        asin=str(raw["asin"]),
        reviewer_id=str(raw.get("reviewerID", "")),
        text=text,
        summary=str(raw["summary"]) if raw.get("summary") else None,
        helpful_votes=_parse_votes(raw.get("vote")),
        vine=vine,
        rating=int(float(raw["overall"])),
        timestamp=int(raw.get("unixReviewTime", 0)),
    )


def load_catalog(path, stats: IngestStats | None = None):
    """Stream Product records from a newline-delimited metadata file."""
    return _iter_records(path, stats if stats is not None else IngestStats(), _build_product)


def load_reviews(path, stats: IngestStats | None = None):
    """Stream Review records from a newline-delimited reviews file."""
    return _iter_records(path, stats if stats is not None else IngestStats(), _build_review)


def filter_reviews(reviews, policy: FilterPolicy):
    """Keep reviews that pass the vote/Vine gate and the length bounds.

    A review is kept iff (helpful_votes >= min_helpful_votes OR
    (vine AND accept_vine)) AND trimmed text length is within
    [min_text_chars, max_text_chars].
    """
    for review in reviews:
        trusted = review.helpful_votes >= policy.min_helpful_votes or (
            review.vine and policy.accept_vine
        )
        if not trusted:
            continue
        length = len(review.text.strip())
        if policy.min_text_chars <= length <= policy.max_text_chars:
            yield review


def truncate_at_sentence(text: str, max_chars: int) -> str:
    """Cut text at the last sentence boundary at or below max_chars.

    A boundary is a terminator in {., !, ?} followed by whitespace.  Text
    with no boundary in range falls back to the last word break, then to
    a hard cut.  Input is expected whitespace-normalized.
    """
    if len(text) <= max_chars:
        return text
    window = text[:max_chars]
    best = -1
    for i, ch in enumerate(window):
        if ch in _SENTENCE_TERMINATORS and i + 1 < len(text) and text[i + 1] == " ":
            best = i
    if best >= 0:
        return window[: best + 1].rstrip()
    space = window.rfind(" ")
    if space > 0:
        return window[:space].rstrip()
    return window


def build_contexts(product: Product, reviews: list[Review], policy: FilterPolicy) -> list[ProductContext]:
    """Build the catalog context (if long enough) plus one context per
    surviving review.  Returns [] for products with nothing usable; the
    caller records those in the skip log.

    Reviews must pass the trust gate (votes or Vine) and the minimum
    length; over-length text is truncated at a sentence boundary rather
    than dropped, so long reviews still yield bounded contexts.
    """
    contexts: list[ProductContext] = []

    catalog_text = normalize_whitespace(" ".join(product.description + product.features))
    if len(catalog_text) >= policy.min_text_chars:
        cut = truncate_at_sentence(catalog_text, policy.max_text_chars)
        if len(cut) >= policy.min_text_chars:
            contexts.append(ProductContext.build(product.asin, "catalog", cut, product.title))

    for review in reviews:
        trusted = review.helpful_votes >= policy.min_helpful_votes or (
            review.vine and policy.accept_vine
        )
        if not trusted:
            continue
        normalized = normalize_whitespace(review.text)
        if len(normalized) < policy.min_text_chars:
            continue
        cut = truncate_at_sentence(normalized, policy.max_text_chars)
        if len(cut) >= policy.min_text_chars:
            contexts.append(ProductContext.build(product.asin, "review", cut, product.title))

    return contexts


def sample_eval_set(contexts, n: int, seed: int) -> list[ProductContext]:
    """Deterministic sample of min(n, available) contexts.

    Stratified proportionally across source type when both review and
    catalog contexts exist; output order is fixed by context_id so runs
    with the same seed are byte-identical.
    """
    if n < 1:
        raise ContractViolation(f"sample size must be >= 1, got {n}")

    pool = sorted(contexts, key=lambda c: c.context_id)
    if len(pool) <= n:
        return pool

    by_source: dict[str, list[ProductContext]] = {}
    for ctx in pool:
        by_source.setdefault(ctx.source, []).append(ctx)

    rng = random.Random(seed)
    if len(by_source) < 2:
        sample = rng.sample(pool, n)
    else:
        reviews = by_source.get("review", [])
        catalogs = by_source.get("catalog", [])
        take_reviews = round(n * len(reviews) / len(pool))
        take_reviews = min(max(take_reviews, n - len(catalogs)), len(reviews), n)
        sample = rng.sample(reviews, take_reviews)
        sample += rng.sample(catalogs, n - take_reviews)
    return sorted(sample, key=lambda c: c.context_id)


def write_contexts(contexts, path) -> int:
    """Write contexts as one JSON record per line; returns the count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for ctx in contexts:
            handle.write(json.dumps(ctx.to_record(), sort_keys=True) + "\n")
            count += 1
    return count


def read_contexts(path) -> list[ProductContext]:
    """Read a contexts file written by write_contexts."""
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                out.append(ProductContext.from_record(json.loads(line)))
    return out
