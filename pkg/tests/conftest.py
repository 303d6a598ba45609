"""Shared fixtures: example product contexts, scripted mocks, desk corpora."""

from __future__ import annotations

import json

import pytest

from shopq.backend import CachingClient, GenRequest, MockBackend, prompt_digest
from shopq.corpus import ProductContext
from shopq.prompts import GenConfig, render_generation_prompt

DOORBELL_TEXT = (
    "Built-in speaker/microphone. Talk to visitors anytime anywhere... "
    "Intelligent real-time monitoring via mobile phone... Video recording, "
    "picture-taking and screenshot, video playback and storage. Play videos "
    "anytime anywhere via mobile phone. When storage is full, the earliest "
    "recorded video will be overwritten."
)

DOORBELL_QUESTIONS = (
    "What are key features of this doorbell? | broad features | 7",
    "Can the camera enable mobile phone monitoring? | specific product aspect | 8",
    "Can the camera take pictures, record videos, and store them on a mobile device? "
    "| specific product aspect | 6",
)

RONGEURS_TEXT = (
    "Item Package Height: 20.32 Centimeters. Autoclavable. Medical Grade Steel. Unit Count: 1.0"
)
RONGEURS_QUESTION = "Can the rongeurs be reused after cleaning and sterilization?"

HOLDER_TEXT = (
    "UGH! DUMB! I thought this screwed to the wall, not GLUED to the wall! "
    "A great way to destroy a huge portion of my wall and rip it off when I go "
    "to remove it or it falls off. And I'm going to assume that if I did peel it "
    "off and it didn't take part of my wall/paint with it, that it would leave "
    "sticky residue behind."
)
HOLDER_QUESTIONS = (
    "Does the toilet paper holder stick or screw to the wall, as advertised?",
    "Will removing the toilet paper holder leave behind sticky residue or cause wall damage?",
)

CAT_MAT_TEXT = (
    "Does NOT work for cats - false advertising! This thing is a joke, and cats "
    "are not even afraid of the beep anyway. I wish we could return it for a refund..."
)
CAT_MAT_LINE = "Are cats afraid of the beep emitted from the mat? | specific product aspect | 8"


@pytest.fixture
def doorbell_context() -> ProductContext:
    return ProductContext.build("B0DOORBELL", "catalog", DOORBELL_TEXT, "Smart Video Doorbell")


@pytest.fixture
def rongeurs_context() -> ProductContext:
    return ProductContext.build("B0RONGEURS", "catalog", RONGEURS_TEXT, "Surgical Rongeurs")


@pytest.fixture
def holder_context() -> ProductContext:
    return ProductContext.build(
        "B0TPHOLDER", "review", HOLDER_TEXT, "Commercial Toilet Paper Holder"
    )


def scripted_client(script: dict[str, str], default: str = "", **mock_kwargs) -> CachingClient:
    """Client over a mock scripted by prompt text (digested here)."""
    digested = {prompt_digest(prompt): text for prompt, text in script.items()}
    return CachingClient(MockBackend(script=digested, default=default, **mock_kwargs), sleep=lambda s: None)


def doorbell_script(context: ProductContext, k: int = 3) -> dict[str, str]:
    """Mock script answering the doorbell generation prompt with canned lines."""
    prompt = render_generation_prompt(context, GenConfig(k_questions=k))
    return {prompt: "\n".join(DOORBELL_QUESTIONS[:k])}


def request_for(context: ProductContext, k: int = 3, model_id: str = "mock-model") -> GenRequest:
    return GenRequest(
        prompt=render_generation_prompt(context, GenConfig(k_questions=k)),
        model_id=model_id,
    )


def _sentence(i: int) -> str:
    return f"Sentence number {i:04d} speaks about one more product detail. "


def make_desk_corpus(tmp_path, n_products: int = 50):
    """Write a deterministic catalog + reviews JSONL corpus; returns paths."""
    meta_path = tmp_path / "meta.jsonl"
    reviews_path = tmp_path / "reviews.jsonl"
    with open(meta_path, "w", encoding="utf-8") as meta:
        for i in range(n_products):
            record = {
                "asin": f"B{i:07d}",
                "title": f"Gadget Model {i}",
                "brand": "Acme" if i % 2 == 0 else "Globex",
                "category": ["Electronics", f"Type {i % 5}"],
                "description": [
                    f"The Gadget Model {i} ships with a durable housing and a "
                    f"rechargeable battery rated for {10 + i} hours of continuous use. "
                    "It pairs with most phones over wireless connections."
                ],
                "feature": [f"Weight {100 + i} grams.", "Water resistant."],
                "price": f"${10 + i}.99",
            }
            meta.write(json.dumps(record) + "\n")
    with open(reviews_path, "w", encoding="utf-8") as reviews:
        for i in range(n_products):
            record = {
                "reviewerID": f"R{i:05d}",
                "asin": f"B{i:07d}",
                "reviewText": (
                    f"Bought the Gadget Model {i} last month and the battery really "
                    f"lasts around {10 + i} hours. Setup was quick and the wireless "
                    "pairing worked with an older phone on the first try."
                ),
                "summary": "Solid little gadget",
                "vote": str(5 + i % 7),
                "overall": 4.0 + (i % 2),
                "unixReviewTime": 1500000000 + i,
            }
            reviews.write(json.dumps(record) + "\n")
    return meta_path, reviews_path


DEFAULT_MOCK_OUTPUT = "\n".join(
    (
        "What are key features of this gadget? | broad features | 7",
        "How long does the battery last on it? | specific product aspect | 9",
        "Is it compatible with older phones? | compatibility | 6",
    )
)


def write_mock_backend_toml(path, default: str = DEFAULT_MOCK_OUTPUT, script: dict | None = None):
    """Write a backend config TOML pointing at the deterministic mock."""
    lines = [
        'kind = "mock"',
        'model_id = "mock-model"',
        "",
        "[mock]",
        f"default = {json.dumps(default)}",
        "chunk_size = 8",
    ]
    if script:
        lines.append("")
        lines.append("[mock.script]")
        for digest, text in script.items():
            lines.append(f"{json.dumps(digest)} = {json.dumps(text)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
