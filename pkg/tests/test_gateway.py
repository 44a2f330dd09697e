from __future__ import annotations

import random

import pytest

from promptlit.gateway import (
    AuthError,
    ChatMessage,
    ChatReply,
    ChatRequest,
    GatewayConfig,
    GatewayTimeout,
    RateLimited,
    ResponseFormat,
    Role,
    ServerError,
    StubTransport,
    backoff_delay,
    send_chat,
)


def request() -> ChatRequest:
    return ChatRequest(
        messages=(ChatMessage(Role.SYSTEM, "sys"), ChatMessage(Role.USER, "hi")),
        model_name="test-model",
    )


def config(**kwargs) -> GatewayConfig:
    defaults = dict(max_retries=3, backoff_base_s=0.001)
    defaults.update(kwargs)
    return GatewayConfig(**defaults)


def test_request_invariants():
    with pytest.raises(ValueError):
        ChatRequest(messages=(), model_name="m")
    with pytest.raises(ValueError):
        ChatRequest(messages=(ChatMessage(Role.SYSTEM, "s"),), model_name="m")
    with pytest.raises(ValueError):
        ChatRequest(
            messages=(ChatMessage(Role.USER, "u"),), model_name="m", temperature=-0.1
        )


def test_config_invariants():
    with pytest.raises(ValueError):
        GatewayConfig(timeout_s=0)
    with pytest.raises(ValueError):
        GatewayConfig(max_retries=6)


def test_stub_passthrough_no_retries():
    stub = StubTransport(["canned reply"])
    reply = send_chat(request(), config(), stub, sleeper=lambda s: None)
    assert reply == ChatReply(content="canned reply")
    assert stub.calls == 1


def test_retries_then_success():
    stub = StubTransport([GatewayTimeout("t"), ServerError("500"), "ok"])
    delays: list[float] = []
    reply = send_chat(request(), config(), stub, sleeper=delays.append)
    assert reply.content == "ok"
    assert stub.calls == 3
    assert len(delays) == 2


def test_auth_error_never_retried():
    stub = StubTransport([AuthError("401"), "never reached"])
    with pytest.raises(AuthError):
        send_chat(request(), config(), stub, sleeper=lambda s: None)
    assert stub.calls == 1


def test_rate_limit_exhausts_retries():
    stub = StubTransport([RateLimited("429")] * 10)
    with pytest.raises(RateLimited):
        send_chat(request(), config(max_retries=2), stub, sleeper=lambda s: None)
    assert stub.calls == 3  # 1 + 2 retries


def test_retry_count_never_exceeds_budget():
    for max_retries in range(4):
        stub = StubTransport([ServerError("boom")] * 10)
        with pytest.raises(ServerError):
            send_chat(request(), config(max_retries=max_retries), stub, sleeper=lambda s: None)
        assert stub.calls == max_retries + 1


def test_backoff_delays_non_decreasing():
    rng = random.Random(11)
    for _ in range(200):
        delays = [backoff_delay(attempt, 0.5, rng) for attempt in range(5)]
        assert all(b >= a for a, b in zip(delays, delays[1:]))
        assert delays[0] >= 0.25  # lower half of the first window is never used


def test_stub_is_pure_function_of_script():
    script = ["a", "b"]
    out1 = [send_chat(request(), config(), StubTransport(list(script)), sleeper=lambda s: None).content for _ in range(1)]
    out2 = [send_chat(request(), config(), StubTransport(list(script)), sleeper=lambda s: None).content for _ in range(1)]
    assert out1 == out2 == ["a"]


def test_structured_hint_preserved():
    req = ChatRequest(
        messages=(ChatMessage(Role.USER, "grade this"),),
        model_name="m",
        response_format_hint=ResponseFormat.STRUCTURED,
    )
    assert req.response_format_hint is ResponseFormat.STRUCTURED
    extended = req.with_appended(
        ChatMessage(Role.ASSISTANT, "bad"), ChatMessage(Role.USER, "repair")
    )
    assert extended.response_format_hint is ResponseFormat.STRUCTURED
    assert len(extended.messages) == 3
