"""Text-generation backends: remote HTTP adapters and a deterministic mock.

One client fronts them all with a content-addressed response cache
(write-to-temp-then-rename, one file per request digest plus a metadata
sidecar), bounded retries with exponential backoff, a shared rate
limiter, and single-flight coalescing so concurrent identical misses
trigger exactly one backend call.  Streaming and non-streaming paths
yield identical text for identical requests.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .errors import (
    ConfigError,
    MalformedResponseError,
    PartialStreamError,
    RequestError,
    TransportError,
)
from .prompts import estimate_tokens

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

BACKEND_KINDS = ("mock", "openai_compat", "anthropic_compat")


def prompt_digest(prompt: str) -> str:
    """SHA-256 hex digest of a prompt; the mock's scripting key."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GenRequest:
    prompt: str
    model_id: str
    temperature: float = 0.7
    max_tokens: int = 512
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def canonical_json(self) -> str:
        """Key-sorted compact serialization; the hashing substrate."""
        return json.dumps(
            {
                "max_tokens": self.max_tokens,
                "model_id": self.model_id,
                "prompt": self.prompt,
                "stop_sequences": list(self.stop_sequences),
                "temperature": self.temperature,
            },
            sort_keys=True,
            ensure_ascii=True,
            separators=(",", ":"),
        )

    def cache_key(self) -> "CacheKey":
        return CacheKey(hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest())


@dataclass(frozen=True)
class CacheKey:
    digest: str

    def __post_init__(self):
        if len(self.digest) != 64 or any(c not in "0123456789abcdef" for c in self.digest):
            raise ValueError("digest must be 64 lowercase hex chars")


@dataclass(frozen=True)
class Completion:
    text: str
    model_id: str
    latency_ms: int
    from_cache: bool
    token_count: int


class _RetryableFailure(Exception):
    """Internal: transport failure worth another attempt (network, 429, 5xx)."""


class Transport:
    """Minimal completion contract: prompt in, text out, plus streaming."""

    def complete(self, request: GenRequest) -> str:
        raise NotImplementedError

    def stream_complete(self, request: GenRequest):
        """Yield text chunks; concatenation must equal complete()'s text."""
        raise NotImplementedError


class MockBackend(Transport):
    """Deterministic scripted backend: prompt digest -> canned text.

    Lock-free reads after construction; a thread-safe invocation counter
    supports cache-contract tests.  stream_complete replays the scripted
    text in fixed-size chunks and can fail mid-stream on request for
    fault-injection tests.
    """

    def __init__(
        self,
        script: dict[str, str] | None = None,
        default: str = "",
        chunk_size: int = 8,
        fail_stream_after: int | None = None,
    ):
        if chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        self.script = dict(script or {})
        self.default = default
        self.chunk_size = chunk_size
        self.fail_stream_after = fail_stream_after
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        with self._lock:
            return self._calls

    def _count(self) -> None:
        with self._lock:
            self._calls += 1

    def _lookup(self, prompt: str) -> str:
        return self.script.get(prompt_digest(prompt), self.default)

    def complete(self, request: GenRequest) -> str:
        self._count()
        return self._lookup(request.prompt)

    def stream_complete(self, request: GenRequest):
        self._count()
        text = self._lookup(request.prompt)
        sent = 0
        for start in range(0, len(text), self.chunk_size):
            if self.fail_stream_after is not None and sent >= self.fail_stream_after:
                raise _RetryableFailure("scripted mid-stream disconnect")
            yield text[start : start + self.chunk_size]
            sent += 1


def mock_backend(script: dict[str, str] | None = None, default: str = "", **kwargs) -> MockBackend:
    """Build a deterministic mock keyed by prompt digest."""
    return MockBackend(script=script, default=default, **kwargs)


def _classify_status(response: httpx.Response, attempts: list[str]) -> None:
    """Raise the right error family for a non-2xx response."""
    status = response.status_code
    if status == 429 or status >= 500:
        attempts.append(f"HTTP {status}")
        raise _RetryableFailure(f"HTTP {status}")
    if 400 <= status < 500:
        raise RequestError(f"endpoint rejected request: HTTP {status}", status_code=status)


class _HttpBackend(Transport):
    def __init__(
        self,
        endpoint: str,
        auth_token_env: str | None = None,
        timeout: float = 60.0,
        http_transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.auth_token_env = auth_token_env
        self._client = httpx.Client(timeout=timeout, transport=http_transport)

    def _auth_token(self) -> str | None:
        if self.auth_token_env:
            return os.environ.get(self.auth_token_env)
        return None

    def _post(self, payload: dict, headers: dict[str, str]) -> httpx.Response:
        attempts: list[str] = []
        try:
            response = self._client.post(self.endpoint, json=payload, headers=headers)
        except httpx.HTTPError as exc:
            raise _RetryableFailure(f"network failure: {exc}") from exc
        _classify_status(response, attempts)
        return response

    def close(self) -> None:
        self._client.close()


class OpenAICompatBackend(_HttpBackend):
    """Chat-completions wire shape: messages in, choices[0].message out."""

    def _headers(self) -> dict[str, str]:
        headers = {"content-type": "application/json"}
        token = self._auth_token()
        if token:
            headers["authorization"] = f"Bearer {token}"
        return headers

    def _payload(self, request: GenRequest, stream: bool) -> dict:
        payload = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.stop_sequences:
            payload["stop"] = list(request.stop_sequences)
        if stream:
            payload["stream"] = True
        return payload

    def complete(self, request: GenRequest) -> str:
        response = self._post(self._payload(request, stream=False), self._headers())
        try:
            text = response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedResponseError(f"no text in completion response: {exc}") from exc
        if not isinstance(text, str):
            raise MalformedResponseError("completion text is not a string")
        return text

    def stream_complete(self, request: GenRequest):
        payload = self._payload(request, stream=True)
        try:
            with self._client.stream(
                "POST", self.endpoint, json=payload, headers=self._headers()
            ) as response:
                _classify_status(response, [])
                for data in _iter_sse_data(response):
                    if data == "[DONE]":
                        return
                    try:
                        event = json.loads(data)
                        delta = event["choices"][0].get("delta", {}).get("content")
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise MalformedResponseError(f"bad stream event: {exc}") from exc
                    if delta:
                        yield delta
        except httpx.HTTPError as exc:
            raise _RetryableFailure(f"network failure: {exc}") from exc


class AnthropicCompatBackend(_HttpBackend):
    """Messages wire shape: content blocks out, x-api-key auth."""

    def _headers(self) -> dict[str, str]:
        headers = {"content-type": "application/json", "anthropic-version": "2023-06-01"}
        token = self._auth_token()
        if token:
            headers["x-api-key"] = token
        return headers

    def _payload(self, request: GenRequest, stream: bool) -> dict:
        payload = {
            "model": request.model_id,
            "max_tokens": request.max_tokens,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        }
        if request.stop_sequences:
            payload["stop_sequences"] = list(request.stop_sequences)
        if stream:
            payload["stream"] = True
        return payload

    def complete(self, request: GenRequest) -> str:
        response = self._post(self._payload(request, stream=False), self._headers())
        try:
            text = response.json()["content"][0]["text"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedResponseError(f"no text in messages response: {exc}") from exc
        if not isinstance(text, str):
            raise MalformedResponseError("completion text is not a string")
        return text

    def stream_complete(self, request: GenRequest):
        payload = self._payload(request, stream=True)
        try:
            with self._client.stream(
                "POST", self.endpoint, json=payload, headers=self._headers()
            ) as response:
                _classify_status(response, [])
                for data in _iter_sse_data(response):
                    if data == "[DONE]":
                        return
                    try:
                        event = json.loads(data)
                    except ValueError as exc:
                        raise MalformedResponseError(f"bad stream event: {exc}") from exc
                    if event.get("type") == "content_block_delta":
                        delta = event.get("delta", {}).get("text")
                        if delta:
                            yield delta
        except httpx.HTTPError as exc:
            raise _RetryableFailure(f"network failure: {exc}") from exc


def _iter_sse_data(response: httpx.Response):
    """Yield the data payload of each server-sent event."""
    for line in response.iter_lines():
        line = line.strip()
        if line.startswith("data:"):
            yield line[len("data:") :].strip()


class RateLimiter:
    """Paces dispatches at least 1/rate seconds apart; 0 disables pacing."""

    def __init__(self, per_second: float = 0.0, clock=time.monotonic, sleep=time.sleep):
        self.per_second = per_second
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self) -> None:
        if self.per_second <= 0:
            return
        interval = 1.0 / self.per_second
        with self._lock:
            now = self._clock()
            slot = max(now, self._next_slot)
            self._next_slot = slot + interval
        wait = slot - now
        if wait > 0:
            self._sleep(wait)


class MemoryCache:
    """Process-local fallback when no cache directory is configured."""

    def __init__(self):
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()

    def get(self, digest: str) -> str | None:
        with self._lock:
            return self._entries.get(digest)

    def put(self, digest: str, text: str, meta: dict) -> None:
        with self._lock:
            self._entries[digest] = text


class FileCache:
    """One file per digest holding the bit-exact response, plus a sidecar."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _text_path(self, digest: str) -> Path:
        return self.directory / f"{digest}.txt"

    def get(self, digest: str) -> str | None:
        path = self._text_path(digest)
        if not path.exists():
            return None
        return path.read_bytes().decode("utf-8")

    def put(self, digest: str, text: str, meta: dict) -> None:
        self._atomic_write(self._text_path(digest), text.encode("utf-8"))
        sidecar = json.dumps(meta, sort_keys=True).encode("utf-8")
        self._atomic_write(self.directory / f"{digest}.meta.json", sidecar)

    def _atomic_write(self, path: Path, payload: bytes) -> None:
        tmp = path.with_suffix(path.suffix + f".tmp{os.getpid()}.{threading.get_ident()}")
        tmp.write_bytes(payload)
        os.replace(tmp, path)


class CompletionStream:
    """Iterator over text chunks; .completion is set once exhausted."""

    def __init__(self, inner, finalize):
        self._inner = inner
        self._finalize = finalize
        self._chunks: list[str] = []
        self.completion: Completion | None = None

    def __iter__(self):
        return self

    def __next__(self) -> str:
        try:
            chunk = next(self._inner)
        except StopIteration:
            if self.completion is None:
                self.completion = self._finalize(self._chunks)
            raise
        self._chunks.append(chunk)
        return chunk


class CachingClient:
    """Cache-first generation client over any transport.

    Identical requests hit the cache with zero backend calls; misses are
    retried (default 3 attempts, exponential backoff from 500 ms) behind
    a shared rate limiter, and concurrent identical misses coalesce into
    a single transport call.
    """

    def __init__(
        self,
        transport: Transport,
        cache=None,
        rate_limiter: RateLimiter | None = None,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        sleep=time.sleep,
        stream_chunk_size: int = 64,
    ):
        self.transport = transport
        self.cache = cache if cache is not None else MemoryCache()
        self.rate_limiter = rate_limiter or RateLimiter(0)
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self.stream_chunk_size = stream_chunk_size
        self._transport_calls = 0
        self._counter_lock = threading.Lock()
        self._registry_lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}

    @property
    def transport_calls(self) -> int:
        with self._counter_lock:
            return self._transport_calls

    def _count_transport_call(self) -> None:
        with self._counter_lock:
            self._transport_calls += 1

    def _key_lock(self, digest: str) -> threading.Lock:
        with self._registry_lock:
            lock = self._key_locks.get(digest)
            if lock is None:
                lock = threading.Lock()
                self._key_locks[digest] = lock
            return lock

    def _meta(self, request: GenRequest, text: str) -> dict:
        return {
            "model_id": request.model_id,
            "request_digest": request.cache_key().digest,
            "text_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
            "token_count": estimate_tokens(text),
        }

    def _completion(self, request: GenRequest, text: str, latency_ms: int, from_cache: bool):
        return Completion(
            text=text,
            model_id=request.model_id,
            latency_ms=latency_ms,
            from_cache=from_cache,
            token_count=estimate_tokens(text),
        )

    def _call_with_retries(self, request: GenRequest) -> str:
        attempts: list[str] = []
        for attempt in range(1, self.max_attempts + 1):
            self.rate_limiter.acquire()
            self._count_transport_call()
            try:
                return self.transport.complete(request)
            except _RetryableFailure as exc:
                attempts.append(f"attempt {attempt}: {exc}")
                if attempt == self.max_attempts:
                    raise TransportError(
                        f"backend failed after {self.max_attempts} attempts: {exc}",
                        attempts=attempts,
                    ) from exc
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
        raise AssertionError("unreachable")

    def generate(self, request: GenRequest) -> Completion:
        digest = request.cache_key().digest
        cached = self.cache.get(digest)
        if cached is not None:
            return self._completion(request, cached, 0, from_cache=True)
        with self._key_lock(digest):
            cached = self.cache.get(digest)
            if cached is not None:
                return self._completion(request, cached, 0, from_cache=True)
            started = time.monotonic()
            text = self._call_with_retries(request)
            latency_ms = int((time.monotonic() - started) * 1000)
            self.cache.put(digest, text, self._meta(request, text))
            return self._completion(request, text, latency_ms, from_cache=False)

    def generate_stream(self, request: GenRequest) -> CompletionStream:
        digest = request.cache_key().digest
        cached = self.cache.get(digest)
        if cached is not None:
            return CompletionStream(
                self._chunked(cached),
                lambda chunks: self._completion(request, "".join(chunks), 0, from_cache=True),
            )

        def finalize(chunks: list[str]) -> Completion:
            return self._completion(request, "".join(chunks), 0, from_cache=False)

        return CompletionStream(self._stream_miss(request, digest), finalize)

    def _chunked(self, text: str):
        for start in range(0, len(text), self.stream_chunk_size):
            yield text[start : start + self.stream_chunk_size]

    def _stream_miss(self, request: GenRequest, digest: str):
        with self._key_lock(digest):
            cached = self.cache.get(digest)
            if cached is not None:
                yield from self._chunked(cached)
                return
            chunks: list[str] = []
            attempts: list[str] = []
            for attempt in range(1, self.max_attempts + 1):
                self.rate_limiter.acquire()
                self._count_transport_call()
                try:
                    for chunk in self.transport.stream_complete(request):
                        chunks.append(chunk)
                        yield chunk
                    break
                except _RetryableFailure as exc:
                    if chunks:
                        # Stream broke after delivery started; do not retry.
                        raise PartialStreamError(
                            f"stream interrupted: {exc}", chunks=list(chunks)
                        ) from exc
                    attempts.append(f"attempt {attempt}: {exc}")
                    if attempt == self.max_attempts:
                        raise TransportError(
                            f"backend failed after {self.max_attempts} attempts: {exc}",
                            attempts=attempts,
                        ) from exc
                    self._sleep(self.backoff_base * (2 ** (attempt - 1)))
            text = "".join(chunks)
            self.cache.put(digest, text, self._meta(request, text))


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    model_id: str
    endpoint: str | None = None
    auth_token_env: str | None = None
    rate_limit_per_s: float = 0.0
    cache_dir: str | None = None
    temperature: float = 0.7
    max_tokens: int = 512
    mock_default: str = ""
    mock_script: dict[str, str] = field(default_factory=dict)
    mock_chunk_size: int = 8
    mock_fail_stream_after: int | None = None  # fault-injection hook

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind != "mock" and not self.endpoint:
            raise ConfigError(f"backend kind {self.kind!r} requires an endpoint URL")


def load_backend_config(path) -> BackendConfig:
    """Read a backend TOML file; relative cache_dir resolves beside it."""
    path = Path(path)
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"backend config not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid backend config {path}: {exc}") from exc

    mock = raw.get("mock", {})
    cache_dir = raw.get("cache_dir")
    if cache_dir:
        cache_path = Path(cache_dir)
        if not cache_path.is_absolute():
            cache_path = path.parent / cache_path
        cache_dir = str(cache_path)

    return BackendConfig(
        kind=raw.get("kind", "mock"),
        model_id=raw.get("model_id", "mock-model"),
        endpoint=raw.get("endpoint"),
        auth_token_env=raw.get("auth_token_env"),
        rate_limit_per_s=float(raw.get("rate_limit_per_s", 0.0)),
        cache_dir=cache_dir,
        temperature=float(raw.get("temperature", 0.7)),
        max_tokens=int(raw.get("max_tokens", 512)),
        mock_default=mock.get("default", ""),
        mock_script=dict(mock.get("script", {})),
        mock_chunk_size=int(mock.get("chunk_size", 8)),
        mock_fail_stream_after=(
            int(mock["fail_stream_after"]) if "fail_stream_after" in mock else None
        ),
    )


def build_transport(config: BackendConfig) -> Transport:
    if config.kind == "mock":
        return MockBackend(
            script=config.mock_script,
            default=config.mock_default,
            chunk_size=config.mock_chunk_size,
            fail_stream_after=config.mock_fail_stream_after,
        )
    if config.kind == "openai_compat":
        return OpenAICompatBackend(config.endpoint, auth_token_env=config.auth_token_env)
    return AnthropicCompatBackend(config.endpoint, auth_token_env=config.auth_token_env)


def build_client(config: BackendConfig, **overrides) -> CachingClient:
    """Assemble the caching client described by a backend config."""
    cache = FileCache(config.cache_dir) if config.cache_dir else MemoryCache()
    return CachingClient(
        transport=build_transport(config),
        cache=cache,
        rate_limiter=RateLimiter(config.rate_limit_per_s),
        **overrides,
    )
