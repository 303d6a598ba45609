"""HTTP service: ranked suggestion bundles, grounded chat, SSE streaming.

Answers are never synthesized: a chat reply is the human-authored
context the suggestion was generated from (or the best lexical match
for free-text questions), so every answer carries a source context id.
Per-(asin, k) generation is single-flight and bundles are cached.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .backend import CachingClient, GenRequest, build_client, load_backend_config
from .corpus import ProductContext, read_contexts
from .errors import ConfigError, ShopqError
from .parsing import lexical_answerability, parse_suggestions, suggestion_ref
from .prompts import GenConfig, render_generation_prompt

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

_K_MIN, _K_MAX = 1, 10
_ANSWER_THRESHOLD = 0.2


@dataclass(frozen=True)
class ServiceConfig:
    contexts_path: str
    backend_config_path: str
    host: str = "127.0.0.1"
    port: int = 8031
    k_default: int = 3
    stream_chunk_size: int = 64

    def __post_init__(self):
        if not _K_MIN <= self.k_default <= _K_MAX:
            raise ConfigError(f"k_default must be in [{_K_MIN},{_K_MAX}]")


def load_service_config(path) -> ServiceConfig:
    """Read the service TOML; relative paths resolve beside the file."""
    path = Path(path)
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"service config not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid service config {path}: {exc}") from exc

    def resolve(name: str) -> str:
        value = raw.get(name)
        if not value:
            raise ConfigError(f"service config {path} is missing {name!r}")
        candidate = Path(value)
        return str(candidate if candidate.is_absolute() else path.parent / candidate)

    return ServiceConfig(
        contexts_path=resolve("contexts"),
        backend_config_path=resolve("backend_config"),
        host=raw.get("host", "127.0.0.1"),
        port=int(raw.get("port", 8031)),
        k_default=int(raw.get("k_default", 3)),
        stream_chunk_size=int(raw.get("stream_chunk_size", 64)),
    )


@dataclass
class BundleEntry:
    record: dict
    raw_text: str


@dataclass
class ServiceState:
    """Loaded corpus, generation client, bundle cache, and ref registry."""

    contexts_by_asin: dict[str, list[ProductContext]]
    titles: dict[str, str]
    client: CachingClient
    model_id: str
    temperature: float
    max_tokens: int
    k_default: int = 3
    stream_chunk_size: int = 64
    _bundles: dict[tuple[str, int], BundleEntry] = field(default_factory=dict)
    _refs: dict[str, dict] = field(default_factory=dict)
    _bundle_locks: dict[tuple[str, int], threading.Lock] = field(default_factory=dict)
    _registry_lock: threading.Lock = field(default_factory=threading.Lock)

    @classmethod
    def from_parts(cls, contexts: list[ProductContext], client: CachingClient, **kwargs):
        by_asin: dict[str, list[ProductContext]] = {}
        titles: dict[str, str] = {}
        for ctx in sorted(contexts, key=lambda c: c.context_id):
            by_asin.setdefault(ctx.asin, []).append(ctx)
            titles.setdefault(ctx.asin, ctx.product_title)
        return cls(contexts_by_asin=by_asin, titles=titles, client=client, **kwargs)

    def _lock_for(self, key: tuple[str, int]) -> threading.Lock:
        with self._registry_lock:
            lock = self._bundle_locks.get(key)
            if lock is None:
                lock = threading.Lock()
                self._bundle_locks[key] = lock
            return lock

    def _request_for(self, context: ProductContext, k: int) -> GenRequest:
        prompt = render_generation_prompt(
            context,
            GenConfig(k_questions=k, temperature=self.temperature, max_tokens=self.max_tokens),
        )
        return GenRequest(
            prompt=prompt,
            model_id=self.model_id,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
        )

    def _assemble(self, asin: str, completions: list[tuple[ProductContext, str]]) -> BundleEntry:
        suggestions = []
        for context, text in completions:
            suggestions.extend(parse_suggestions(text, context.context_id).suggestions)
        ranked = sorted(
            suggestions,
            key=lambda s: (-s.interest_score, len(s.question), s.question, suggestion_ref(s)),
        )
        records = []
        context_map = {}
        with self._registry_lock:
            for s in ranked:
                ref = suggestion_ref(s)
                records.append(
                    {
                        "suggestion_ref": ref,
                        "question": s.question,
                        "question_type": s.question_type,
                        "interest_score": s.interest_score,
                        "context_id": s.context_id,
                    }
                )
                context_map[ref] = s.context_id
                self._refs[ref] = {"question": s.question, "context_id": s.context_id}
        record = {"asin": asin, "suggestions": records, "context_map": context_map}
        raw_text = "".join(text for _, text in completions)
        return BundleEntry(record=record, raw_text=raw_text)

    def contexts_for(self, asin: str) -> list[ProductContext]:
        contexts = self.contexts_by_asin.get(asin)
        if contexts is None:
            raise KeyError(asin)
        return contexts

    def get_bundle(self, asin: str, k: int) -> tuple[dict, bool]:
        """Return (bundle record, from_cache); misses coalesce per (asin, k)."""
        contexts = self.contexts_for(asin)
        key = (asin, k)
        entry = self._bundles.get(key)
        if entry is not None:
            return entry.record, True
        with self._lock_for(key):
            entry = self._bundles.get(key)
            if entry is not None:
                return entry.record, True
            completions = [
                (context, self.client.generate(self._request_for(context, k)).text)
                for context in contexts
            ]
            entry = self._assemble(asin, completions)
            self._bundles[key] = entry
            return entry.record, False

    def stream_bundle(self, asin: str, k: int):
        """Yield (kind, payload) pairs: token chunks then the final bundle."""
        contexts = self.contexts_for(asin)
        key = (asin, k)
        entry = self._bundles.get(key)
        if entry is not None:
            text = entry.raw_text
            for start in range(0, len(text), self.stream_chunk_size):
                yield "token", text[start : start + self.stream_chunk_size]
            yield "bundle", dict(entry.record, from_cache=True)
            return
        with self._lock_for(key):
            entry = self._bundles.get(key)
            if entry is not None:
                text = entry.raw_text
                for start in range(0, len(text), self.stream_chunk_size):
                    yield "token", text[start : start + self.stream_chunk_size]
                yield "bundle", dict(entry.record, from_cache=True)
                return
            completions = []
            for context in contexts:
                stream = self.client.generate_stream(self._request_for(context, k))
                for chunk in stream:
                    yield "token", chunk
                completions.append((context, stream.completion.text))
            entry = self._assemble(asin, completions)
            self._bundles[key] = entry
            yield "bundle", dict(entry.record, from_cache=False)

    def answer_for_ref(self, asin: str, ref: str) -> dict:
        info = self._refs.get(ref)
        if info is None:
            raise KeyError(ref)
        context = self._context_by_id(asin, info["context_id"])
        return {
            "answer_text": context.text,
            "source_context_id": context.context_id,
            "answer_absent": False,
            "question": info["question"],
        }

    def answer_for_text(self, asin: str, question: str) -> dict:
        """Retrieval-only answer: the context with the best lexical overlap."""
        contexts = self.contexts_for(asin)
        scored = sorted(
            ((lexical_answerability(question, ctx), ctx.context_id, ctx) for ctx in contexts),
            key=lambda item: (-item[0], item[1]),
        )
        best_score, _, best = scored[0]
        if best_score < _ANSWER_THRESHOLD:
            return {
                "answer_text": None,
                "source_context_id": None,
                "answer_absent": True,
                "question": question,
                "score": best_score,
            }
        return {
            "answer_text": best.text,
            "source_context_id": best.context_id,
            "answer_absent": False,
            "question": question,
            "score": best_score,
        }

    def _context_by_id(self, asin: str, context_id: str) -> ProductContext:
        for context in self.contexts_for(asin):
            if context.context_id == context_id:
                return context
        raise KeyError(context_id)


def build_state(config: ServiceConfig) -> ServiceState:
    backend_config = load_backend_config(config.backend_config_path)
    contexts = read_contexts(config.contexts_path)
    return ServiceState.from_parts(
        contexts=contexts,
        client=build_client(backend_config),
        model_id=backend_config.model_id,
        temperature=backend_config.temperature,
        max_tokens=backend_config.max_tokens,
        k_default=config.k_default,
        stream_chunk_size=config.stream_chunk_size,
    )


class ChatRequest(BaseModel):
    asin: str
    suggestion_ref: str | None = None
    question: str | None = None


def _sse(event: str, payload: dict) -> str:
    return f"event: {event}\ndata: {json.dumps(payload)}\n\n"


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="shopq suggestion service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.shopq = state

    def _check_k(k: int) -> int:
        if not _K_MIN <= k <= _K_MAX:
            raise HTTPException(status_code=400, detail=f"k must be in [{_K_MIN},{_K_MAX}]")
        return k

    @app.get("/products")
    def products() -> list[dict]:
        return [
            {
                "asin": asin,
                "title": state.titles[asin],
                "context_count": len(contexts),
            }
            for asin, contexts in sorted(state.contexts_by_asin.items())
        ]

    @app.get("/products/{asin}/suggestions")
    def suggestions(asin: str, k: int | None = None):
        k = _check_k(k if k is not None else state.k_default)
        try:
            record, from_cache = state.get_bundle(asin, k)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown asin {asin!r}")
        except ShopqError as exc:
            raise HTTPException(status_code=502, detail=f"{exc.error_class}: {exc}")
        return dict(record, from_cache=from_cache)

    @app.post("/chat")
    def chat(request: ChatRequest):
        if request.asin not in state.contexts_by_asin:
            raise HTTPException(status_code=404, detail=f"unknown asin {request.asin!r}")
        if request.suggestion_ref:
            try:
                return state.answer_for_ref(request.asin, request.suggestion_ref)
            except KeyError:
                raise HTTPException(status_code=404, detail="unknown suggestion_ref")
        if request.question and request.question.strip():
            return state.answer_for_text(request.asin, request.question)
        raise HTTPException(status_code=400, detail="need suggestion_ref or question")

    @app.get("/suggestions/stream")
    def stream(asin: str, k: int | None = None):
        k_checked = _check_k(k if k is not None else state.k_default)
        if asin not in state.contexts_by_asin:
            raise HTTPException(status_code=404, detail=f"unknown asin {asin!r}")

        def events():
            try:
                for kind, payload in state.stream_bundle(asin, k_checked):
                    if kind == "token":
                        yield _sse("token", {"text": payload})
                    else:
                        yield _sse("bundle", payload)
            except ShopqError as exc:
                yield _sse("error", {"error_class": exc.error_class, "message": str(exc)})

        return StreamingResponse(events(), media_type="text/event-stream")

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(build_state(config)), host=config.host, port=config.port)
