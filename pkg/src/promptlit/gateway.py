"""Chat-completion transport with retries, backoff, and an offline stub.

All network nondeterminism lives behind the Transport protocol; the rest of
the system only sees `send_chat`, which is a pure function of the request
and the transport's behaviour.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Protocol

import httpx


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


class ResponseFormat(str, Enum):
    FREE_TEXT = "free_text"
    STRUCTURED = "structured"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    model_name: str
    response_format_hint: ResponseFormat = ResponseFormat.FREE_TEXT
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[-1].role is not Role.USER:
            raise ValueError("last message must have role 'user'")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def with_appended(self, *extra: ChatMessage) -> "ChatRequest":
        return ChatRequest(
            messages=self.messages + tuple(extra),
            model_name=self.model_name,
            response_format_hint=self.response_format_hint,
            temperature=self.temperature,
        )


@dataclass(frozen=True)
class GatewayConfig:
    base_url: str = "https://api.openai.com/v1"
    api_key_env_var: str = "PROMPTLIT_API_KEY"
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_base_s: float = 0.5

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ValueError("timeout must be > 0")
        if not 0 <= self.max_retries <= 5:
            raise ValueError("max_retries must be in [0, 5]")


@dataclass(frozen=True)
class ChatReply:
    content: str
    usage: dict[str, Any] = field(default_factory=dict)


class GatewayError(Exception):
    """Base class for transport failures."""


class AuthError(GatewayError):
    """Authentication/authorization rejected; never retried."""


class ValidationRejected(GatewayError):
    """Endpoint rejected the request shape (other 4xx); never retried."""


class RateLimited(GatewayError):
    """429 from the endpoint; retried until max_retries is exhausted."""


class ServerError(GatewayError):
    """5xx from the endpoint; retried."""


class GatewayTimeout(GatewayError):
    """Request timed out; retried."""


class MalformedResponse(GatewayError):
    """Endpoint returned non-JSON or JSON missing the assistant content."""


_RETRYABLE = (RateLimited, ServerError, GatewayTimeout)


class Transport(Protocol):
    def send_once(self, request: ChatRequest, config: GatewayConfig) -> ChatReply:
        """Perform one attempt; raise a GatewayError subclass on failure."""
        ...


class HttpTransport:
    """Provider-agnostic chat-completion JSON over HTTPS."""

    def send_once(self, request: ChatRequest, config: GatewayConfig) -> ChatReply:
        api_key = os.environ.get(config.api_key_env_var, "")
        if not api_key:
            raise AuthError(f"API key env var {config.api_key_env_var} is not set")
        body: dict[str, Any] = {
            "model": request.model_name,
            "messages": [
                {"role": m.role.value, "content": m.content} for m in request.messages
            ],
            "temperature": request.temperature,
        }
        if request.response_format_hint is ResponseFormat.STRUCTURED:
            body["response_format"] = {"type": "json_object"}
        try:
            resp = httpx.post(
                config.base_url.rstrip("/") + "/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=config.timeout_s,
            )
        except httpx.TimeoutException as exc:
            raise GatewayTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise ServerError(f"transport failure: {exc}") from exc

        if resp.status_code in (401, 403):
            raise AuthError(f"endpoint returned {resp.status_code}")
        if resp.status_code == 429:
            raise RateLimited("endpoint returned 429")
        if resp.status_code >= 500:
            raise ServerError(f"endpoint returned {resp.status_code}")
        if resp.status_code >= 400:
            raise ValidationRejected(f"endpoint returned {resp.status_code}")

        try:
            payload = resp.json()
            content = payload["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"cannot extract assistant content: {exc}") from exc
        if not isinstance(content, str):
            raise MalformedResponse("assistant content is not text")
        return ChatReply(content=content, usage=payload.get("usage") or {})


class StubTransport:
    """Deterministic scripted transport for offline operation and tests.

    The script is a sequence of ChatReply (or plain str) entries returned in
    order, or GatewayError instances raised in order. Requests are recorded
    for assertions.
    """

    def __init__(self, script: list[ChatReply | str | GatewayError]):
        self._script = list(script)
        self._pos = 0
        self.requests: list[ChatRequest] = []

    @property
    def calls(self) -> int:
        return self._pos

    def send_once(self, request: ChatRequest, config: GatewayConfig) -> ChatReply:
        self.requests.append(request)
        if self._pos >= len(self._script):
            raise ServerError("stub script exhausted")
        entry = self._script[self._pos]
        self._pos += 1
        if isinstance(entry, GatewayError):
            raise entry
        if isinstance(entry, str):
            return ChatReply(content=entry)
        return entry


# Process-wide cap on concurrent in-flight requests; guards endpoint rate
# limits when many sessions grade at once.
_concurrency_gate = threading.BoundedSemaphore(8)


def set_concurrency_limit(n: int) -> None:
    global _concurrency_gate
    if n < 1:
        raise ValueError("concurrency limit must be >= 1")
    _concurrency_gate = threading.BoundedSemaphore(n)


def backoff_delay(attempt: int, base_s: float, rng: random.Random) -> float:
    """Delay before retry `attempt` (0-based).

    Exponential base-2 with jitter confined to the upper half of each window
    so successive delays never shrink.
    """
    window = base_s * (2**attempt)
    return window * (0.5 + 0.5 * rng.random())


def send_chat(
    request: ChatRequest,
    config: GatewayConfig,
    transport: Transport | None = None,
    *,
    sleeper: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
) -> ChatReply:
    """Send one chat request, retrying transient failures with backoff.

    Retries RateLimited / ServerError / GatewayTimeout up to
    config.max_retries times; auth and validation rejections surface
    immediately.
    """
    transport = transport if transport is not None else HttpTransport()
    rng = rng if rng is not None else random.Random()
    last_error: GatewayError | None = None
    for attempt in range(config.max_retries + 1):
        if attempt > 0:
            sleeper(backoff_delay(attempt - 1, config.backoff_base_s, rng))
        try:
            with _concurrency_gate:
                return transport.send_once(request, config)
        except _RETRYABLE as exc:
            last_error = exc
    assert last_error is not None
    raise last_error
