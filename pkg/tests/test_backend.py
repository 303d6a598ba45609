"""Backend client tests: caching, streaming, retries, adapters, pacing."""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest

from shopq.backend import (
    AnthropicCompatBackend,
    BackendConfig,
    CacheKey,
    CachingClient,
    FileCache,
    GenRequest,
    MockBackend,
    OpenAICompatBackend,
    RateLimiter,
    build_client,
    load_backend_config,
    mock_backend,
    prompt_digest,
)
from shopq.errors import (
    ConfigError,
    MalformedResponseError,
    PartialStreamError,
    RequestError,
    TransportError,
)


def _request(prompt: str = "hello", **kwargs) -> GenRequest:
    return GenRequest(prompt=prompt, model_id="m1", **kwargs)


def _client(transport, **kwargs) -> CachingClient:
    kwargs.setdefault("sleep", lambda s: None)
    return CachingClient(transport, **kwargs)


# --- requests and keys ----------------------------------------------------


def test_canonical_json_is_key_sorted():
    canonical = _request().canonical_json()
    keys = list(json.loads(canonical).keys())
    assert keys == sorted(keys)


def test_equal_requests_share_digests():
    assert _request().cache_key() == _request().cache_key()
    assert _request().cache_key() != _request(prompt="other").cache_key()
    assert _request().cache_key() != _request(temperature=0.1).cache_key()


def test_cache_key_validation():
    with pytest.raises(ValueError):
        CacheKey("short")
    with pytest.raises(ValueError):
        CacheKey("Z" * 64)
    CacheKey("0" * 64)


def test_max_tokens_must_be_positive():
    with pytest.raises(ValueError):
        _request(max_tokens=0)


# --- mock backend ---------------------------------------------------------


def test_mock_scripted_and_default():
    backend = mock_backend({prompt_digest("hi"): "scripted"}, default="fallback")
    assert backend.complete(_request("hi")) == "scripted"
    assert backend.complete(_request("other")) == "fallback"
    assert backend.calls == 2


def test_mock_is_deterministic():
    script = {prompt_digest("a"): "A", prompt_digest("b"): "B"}
    first = [MockBackend(script, "d").complete(_request(p)) for p in ("a", "b", "c")]
    second = [MockBackend(script, "d").complete(_request(p)) for p in ("a", "b", "c")]
    assert first == second == ["A", "B", "d"]


# --- cache contract -------------------------------------------------------


def test_second_generate_hits_cache():
    backend = MockBackend(default="answer")
    client = _client(backend)
    first = client.generate(_request())
    second = client.generate(_request())
    assert not first.from_cache
    assert second.from_cache
    assert second.text == first.text == "answer"
    assert backend.calls == 1
    assert client.transport_calls == 1


def test_cache_round_trip_property():
    backend = MockBackend(default="")
    client = _client(backend)
    for i in range(50):
        request = _request(f"prompt {i}", temperature=(i % 5) / 10)
        backend.script[prompt_digest(request.prompt)] = f"response {i}"
    for i in range(50):
        request = _request(f"prompt {i}", temperature=(i % 5) / 10)
        assert client.generate(request).text == client.generate(request).text


def test_file_cache_survives_client_restarts(tmp_path):
    request = _request()
    first_client = _client(MockBackend(default="persisted"), cache=FileCache(tmp_path))
    assert not first_client.generate(request).from_cache

    fresh_backend = MockBackend(default="persisted")
    second_client = _client(fresh_backend, cache=FileCache(tmp_path))
    completion = second_client.generate(request)
    assert completion.from_cache
    assert fresh_backend.calls == 0

    digest = request.cache_key().digest
    assert (tmp_path / f"{digest}.txt").read_text(encoding="utf-8") == "persisted"
    meta = json.loads((tmp_path / f"{digest}.meta.json").read_text(encoding="utf-8"))
    assert meta["request_digest"] == digest


def test_cached_completion_reports_zero_latency():
    client = _client(MockBackend(default="x"))
    client.generate(_request())
    assert client.generate(_request()).latency_ms == 0


# --- streaming ------------------------------------------------------------


def test_mock_stream_chunking():
    backend = MockBackend(default="ABCDEF", chunk_size=2)
    client = _client(backend)
    stream = client.generate_stream(_request())
    assert list(stream) == ["AB", "CD", "EF"]
    assert stream.completion.text == "ABCDEF"
    assert not stream.completion.from_cache


def test_stream_equals_generate_for_many_requests():
    backend = MockBackend(default="", chunk_size=3)
    for i in range(40):
        backend.script[prompt_digest(f"p{i}")] = f"text for prompt {i} " * (i % 4 + 1)
    stream_client = _client(MockBackend(backend.script, "", chunk_size=3))
    plain_client = _client(MockBackend(backend.script, "", chunk_size=3))
    for i in range(40):
        request = _request(f"p{i}")
        streamed = stream_client.generate_stream(request)
        assert "".join(streamed) == plain_client.generate(request).text


def test_cache_hit_streams_in_fixed_chunks():
    client = _client(MockBackend(default="ABCDEFGHIJ", chunk_size=3), stream_chunk_size=4)
    client.generate(_request())
    stream = client.generate_stream(_request())
    chunks = list(stream)
    assert chunks == ["ABCD", "EFGH", "IJ"]
    assert stream.completion.from_cache
    assert stream.completion.text == "ABCDEFGHIJ"


def test_stream_populates_cache_for_generate():
    backend = MockBackend(default="shared text", chunk_size=4)
    client = _client(backend)
    list(client.generate_stream(_request()))
    completion = client.generate(_request())
    assert completion.from_cache
    assert backend.calls == 1


def test_mid_stream_disconnect_carries_partial_chunks():
    backend = MockBackend(default="ABCDEF", chunk_size=2, fail_stream_after=1)
    client = _client(backend)
    stream = client.generate_stream(_request())
    received = []
    with pytest.raises(PartialStreamError) as excinfo:
        for chunk in stream:
            received.append(chunk)
    assert received == ["AB"]
    assert excinfo.value.chunks == ["AB"]


# --- retries --------------------------------------------------------------


class FlakyTransport(MockBackend):
    def __init__(self, failures: int, text: str = "ok"):
        super().__init__(default=text)
        self.failures = failures

    def complete(self, request):
        from shopq.backend import _RetryableFailure

        self._count()
        if self.calls <= self.failures:
            raise _RetryableFailure("scripted failure")
        return self.default


def test_retries_then_success():
    sleeps: list[float] = []
    client = CachingClient(FlakyTransport(failures=2), sleep=sleeps.append)
    completion = client.generate(_request())
    assert completion.text == "ok"
    assert client.transport_calls == 3
    assert sleeps == [0.5, 1.0]


def test_retry_exhaustion_surfaces_attempt_log():
    client = _client(FlakyTransport(failures=99))
    with pytest.raises(TransportError) as excinfo:
        client.generate(_request())
    assert len(excinfo.value.attempts) == 3
    assert client.transport_calls == 3


# --- HTTP adapters --------------------------------------------------------


def _openai_backend(handler) -> OpenAICompatBackend:
    return OpenAICompatBackend(
        "http://testserver/v1/chat/completions",
        http_transport=httpx.MockTransport(handler),
    )


def test_openai_adapter_wire_shape():
    seen = {}

    def handler(http_request: httpx.Request) -> httpx.Response:
        seen.update(json.loads(http_request.content))
        return httpx.Response(
            200, json={"choices": [{"message": {"content": "adapter reply"}}]}
        )

    client = _client(_openai_backend(handler))
    request = _request("ping", temperature=0.3, max_tokens=99, stop_sequences=("END",))
    assert client.generate(request).text == "adapter reply"
    assert seen["model"] == "m1"
    assert seen["messages"] == [{"role": "user", "content": "ping"}]
    assert seen["temperature"] == 0.3
    assert seen["max_tokens"] == 99
    assert seen["stop"] == ["END"]


def test_anthropic_adapter_wire_shape(monkeypatch):
    monkeypatch.setenv("FAKE_KEY_ENV", "sk-test")
    seen = {"headers": None, "payload": None}

    def handler(http_request: httpx.Request) -> httpx.Response:
        seen["headers"] = dict(http_request.headers)
        seen["payload"] = json.loads(http_request.content)
        return httpx.Response(200, json={"content": [{"type": "text", "text": "claude-ish"}]})

    backend = AnthropicCompatBackend(
        "http://testserver/v1/messages",
        auth_token_env="FAKE_KEY_ENV",
        http_transport=httpx.MockTransport(handler),
    )
    assert _client(backend).generate(_request("ping")).text == "claude-ish"
    assert seen["headers"]["x-api-key"] == "sk-test"
    assert seen["headers"]["anthropic-version"] == "2023-06-01"
    assert "stop_sequences" not in seen["payload"]  # only sent when set
    assert seen["payload"]["messages"][0]["content"] == "ping"


def test_429_exhausts_retries_as_transport_error():
    calls = {"n": 0}

    def handler(_request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        return httpx.Response(429, json={"error": "rate limited"})

    client = _client(_openai_backend(handler))
    with pytest.raises(TransportError) as excinfo:
        client.generate(_request())
    assert calls["n"] == 3
    assert len(excinfo.value.attempts) == 3


def test_4xx_is_request_error_without_retry():
    calls = {"n": 0}

    def handler(_request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        return httpx.Response(400, json={"error": "bad request"})

    client = _client(_openai_backend(handler))
    with pytest.raises(RequestError) as excinfo:
        client.generate(_request())
    assert excinfo.value.status_code == 400
    assert calls["n"] == 1


def test_missing_text_is_malformed_response():
    def handler(_request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"choices": []})

    client = _client(_openai_backend(handler))
    with pytest.raises(MalformedResponseError):
        client.generate(_request())


def test_openai_stream_parses_sse_deltas():
    body = "".join(
        [
            'data: {"choices": [{"delta": {"content": "Hel"}}]}\n\n',
            'data: {"choices": [{"delta": {"content": "lo"}}]}\n\n',
            "data: [DONE]\n\n",
        ]
    )

    def handler(_request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, content=body.encode(), headers={"content-type": "text/event-stream"})

    client = _client(_openai_backend(handler))
    stream = client.generate_stream(_request())
    assert "".join(stream) == "Hello"
    assert stream.completion.text == "Hello"


# --- rate limiter ---------------------------------------------------------


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.dispatches: list[float] = []

    def clock(self) -> float:
        return self.now

    def sleep(self, seconds: float) -> None:
        self.now += seconds


def test_rate_limiter_paces_dispatches():
    fake = FakeClock()
    limiter = RateLimiter(per_second=50, clock=fake.clock, sleep=fake.sleep)
    times = []
    for _ in range(150):
        limiter.acquire()
        times.append(fake.now)
    # Any 2-second window holds at most 2s * 50/s requests, within 10%.
    for start in times:
        in_window = sum(1 for t in times if start <= t < start + 2.0)
        assert in_window <= 50 * 2 * 1.1
    gaps = [b - a for a, b in zip(times, times[1:])]
    assert min(gaps) >= (1 / 50) - 1e-9


def test_rate_limiter_disabled_at_zero():
    limiter = RateLimiter(0)
    for _ in range(100):
        limiter.acquire()  # must not sleep or raise


# --- single-flight --------------------------------------------------------


def test_concurrent_identical_misses_coalesce():
    backend = MockBackend(default="one answer")
    client = _client(backend)
    barrier = threading.Barrier(32)

    def hit():
        barrier.wait()
        return client.generate(_request()).text

    with ThreadPoolExecutor(max_workers=32) as pool:
        results = list(pool.map(lambda _: hit(), range(32)))

    assert set(results) == {"one answer"}
    assert backend.calls == 1
    assert client.transport_calls == 1


# --- config ---------------------------------------------------------------


def test_load_backend_config_mock(tmp_path):
    path = tmp_path / "mock.toml"
    path.write_text(
        "\n".join(
            [
                'kind = "mock"',
                'model_id = "test-model"',
                'cache_dir = "cache"',
                "",
                "[mock]",
                'default = "fallback text"',
                "chunk_size = 2",
                "",
                "[mock.script]",
                f'"{prompt_digest("hi")}" = "scripted text"',
            ]
        ),
        encoding="utf-8",
    )
    config = load_backend_config(path)
    assert config.kind == "mock"
    assert config.cache_dir == str(tmp_path / "cache")

    client = build_client(config, sleep=lambda s: None)
    assert client.generate(_request("hi")).text == "scripted text"
    assert client.generate(_request("nope")).text == "fallback text"


def test_backend_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        load_backend_config(tmp_path / "missing.toml")
    with pytest.raises(ConfigError):
        BackendConfig(kind="weird", model_id="m")
    with pytest.raises(ConfigError):
        BackendConfig(kind="openai_compat", model_id="m")  # endpoint required
