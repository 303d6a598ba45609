"""Prompt rendering for question generation and per-dimension judging.

The generation template ships as a golden file under version control and
is filled with a single ``{data}`` block; rendering is pure, so equal
inputs produce byte-identical prompts.  Judge prompts score one quality
dimension per call so verdicts stay isolated and auditable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib.resources import files

from .corpus import ProductContext
from .errors import ContractViolation, OversizeContextError
from .parsing import parse_suggestions

DIMENSIONS = ("relevance", "usefulness", "answerability", "fluency", "style")

# Criterion definitions quoted verbatim inside judge prompts.
DIMENSION_DEFINITIONS = {
    "relevance": (
        "The question should be applicable and appropriate with respect to "
        "the product under consideration and its features."
    ),
    "usefulness": (
        "The product question (and it's corresponding answer) should provide "
        "helpful information to customers, that can benefit them in deciding "
        "whether or not to purchase the product."
    ),
    "answerability": (
        "The answer to the generated product question must be present in its "
        "input context (review or catalog snippet)."
    ),
    "fluency": (
        "The generated question should be grammatically correct, fluent, "
        "coherent and easily understandable in general."
    ),
    "style": "The generated question should mimic a customer's inquiry style.",
}

_DATA_PLACEHOLDER = "{data}"
_DATA_LINE = "Product Info: {data}."
_SINGLE_QUESTION_PHRASE = "the top product question"

GENERATION_TEMPLATE_ID = "generation_v1"


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    role_frame: str = "human_assistant"  # or "plain"

    def __post_init__(self):
        if self.body.count(_DATA_PLACEHOLDER) != 1:
            raise ValueError("template body must contain exactly one {data} placeholder")
        if self.role_frame not in ("human_assistant", "plain"):
            raise ValueError(f"unknown role frame {self.role_frame!r}")


@dataclass(frozen=True)
class FewShotExample:
    context_text: str
    rendered_output: str

    def __post_init__(self):
        report = parse_suggestions(self.rendered_output, context_id="fewshot")
        if not report.suggestions or report.rejected_lines:
            raise ValueError("few-shot rendered_output must parse cleanly")


@dataclass(frozen=True)
class GenConfig:
    k_questions: int = 3
    few_shot: tuple[FewShotExample, ...] = field(default_factory=tuple)
    temperature: float = 0.7
    max_tokens: int = 512

    def __post_init__(self):
        if not 1 <= self.k_questions <= 10:
            raise ValueError(f"k_questions must be in [1,10], got {self.k_questions}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


def load_generation_template() -> PromptTemplate:
    """The built-in generation template, loaded from the golden file."""
    body = files("shopq.data").joinpath("generation_prompt.txt").read_text(encoding="utf-8")
    return PromptTemplate(template_id=GENERATION_TEMPLATE_ID, body=body)


def load_template_file(path, template_id: str = "custom") -> PromptTemplate:
    """Template override: read a {data}-parameterized body from a file."""
    with open(path, "r", encoding="utf-8") as handle:
        return PromptTemplate(template_id=template_id, body=handle.read())


_GENERATION_TEMPLATE: PromptTemplate | None = None


def _generation_template() -> PromptTemplate:
    global _GENERATION_TEMPLATE
    if _GENERATION_TEMPLATE is None:
        _GENERATION_TEMPLATE = load_generation_template()
    return _GENERATION_TEMPLATE


def format_data_block(context: ProductContext) -> str:
    """The only sanctioned {data} fill: Title/Source/Text lines."""
    return f"Title: {context.product_title}\nSource: {context.source}\nText: {context.text}"


def render_generation_prompt(
    context: ProductContext,
    config: GenConfig | None = None,
    template: PromptTemplate | None = None,
) -> str:
    """Render the generation prompt for one product context.

    Pure and deterministic.  With k_questions > 1 the single-question
    phrase becomes "the top {k} product questions"; few-shot examples are
    inserted as Product Info/Assistant pairs before the final data line.
    """
    if not context.text.strip():
        raise ContractViolation("context text must be non-empty")
    config = config or GenConfig()
    body = (template or _generation_template()).body

    if estimate_tokens(context.text) > config.max_tokens:
        raise OversizeContextError(
            f"context {context.context_id} (~{estimate_tokens(context.text)} tokens) "
            f"exceeds the {config.max_tokens}-token budget"
        )

    if config.k_questions > 1:
        body = body.replace(
            _SINGLE_QUESTION_PHRASE, f"the top {config.k_questions} product questions"
        )

    if config.few_shot:
        blocks = "".join(
            f"Product Info: {ex.context_text}.\nAssistant: {ex.rendered_output}\n\n"
            for ex in config.few_shot
        )
        body = body.replace(_DATA_LINE, blocks + _DATA_LINE)

    return body.replace(_DATA_PLACEHOLDER, format_data_block(context))


def extract_data_block(prompt: str) -> str:
    """Recover the substituted data block from a rendered prompt.

    The block sits between the last "Product Info: " marker and the
    final ".\\nAssistant:" delimiter; these are the documented bounds.
    """
    marker = "Product Info: "
    start = prompt.rfind(marker)
    end = prompt.rfind(".\nAssistant:")
    if start < 0 or end < 0 or end <= start:
        raise ValueError("prompt does not carry a recoverable data block")
    return prompt[start + len(marker) : end]


def render_judge_prompt(question: str, context: ProductContext, dimension: str) -> str:
    """Render a one-dimension judge prompt with a one-token verdict ask.

    Answerability asks for a ternary YES/PARTIAL/NO verdict; the other
    four dimensions are binary YES/NO.
    """
    if dimension not in DIMENSIONS:
        raise ContractViolation(f"unknown dimension {dimension!r}")
    if not question.strip():
        raise ContractViolation("question must be non-empty")

    if dimension == "answerability":
        verdict_ask = (
            "Reply with a single token: YES, PARTIAL or NO. Reply PARTIAL when "
            "the context answers the question only in part."
        )
    else:
        verdict_ask = "Reply with a single token: YES or NO."

    return (
        "Human: You are a strict quality rater for a shopping assistant. "
        "Judge one suggested product question against one criterion.\n"
        "\n"
        f"Criterion ({dimension}): {DIMENSION_DEFINITIONS[dimension]}\n"
        "\n"
        f"Product Info: {format_data_block(context)}\n"
        "\n"
        f"Question: {question}\n"
        "\n"
        f"Does the question satisfy the criterion? {verdict_ask}\n"
        "Assistant:"
    )


def estimate_tokens(text: str) -> int:
    """Budget-only token estimate: ceil(chars / 4), never a tokenizer."""
    return math.ceil(len(text) / 4)
