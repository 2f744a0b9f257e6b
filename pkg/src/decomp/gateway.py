"""Backend-neutral chat-completion gateway.

Two backend families sit behind one complete() call: scripted backends that
replay canned exchanges for tests and offline demos, and HTTP backends that
speak the de-facto chat-completions wire shape.  Callers never construct
provider payloads themselves, so swapping a scripted backend for a live one
is a config change, not a code change.

Retries live here and nowhere else.  Transient failures (network errors,
429, 5xx) are retried with exponential backoff and full jitter; the sleep
and RNG hooks exist so tests can pin both.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable, Mapping

log = logging.getLogger(__name__)


class GatewayError(Exception):
    pass


class UnknownBackend(GatewayError):
    def __init__(self, backend_id: str):
        super().__init__(f"unknown backend: {backend_id}")


class BackendUnavailable(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class MalformedResponse(GatewayError):
    pass


class ScriptExhausted(GatewayError):
    pass


class ScriptMismatch(GatewayError):
    pass


class ScriptParseError(GatewayError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"{message} (line {line})")
        self.line = line


class TransportFailure(Exception):
    """Raised by transports for connection-level trouble; always retryable."""


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "role", Role(self.role))
        if self.role in (Role.SYSTEM, Role.USER) and not self.content.strip():
            raise ValueError(f"{self.role.value} message content must be non-empty")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role.value, "content": self.content}


@dataclass(frozen=True)
class ChatRequest:
    backend_id: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if not self.backend_id:
            raise ValueError("backend_id must be non-empty")
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("a request needs at least one message")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be within [0, 1]")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def last_user_content(self) -> str:
        for message in reversed(self.messages):
            if message.role is Role.USER:
                return message.content
        return ""


@dataclass(frozen=True)
class ChatResponse:
    content: str
    usage: Mapping[str, int] | None = None
    latency_ms: int = 0

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")


@dataclass(frozen=True)
class ScriptedExchange:
    """One scripted turn.  match is a substring expected in the last user
    message ('*' matches anything); exchanges are consumed strictly in order,
    so the matcher is an assertion about the conversation, not a router.
    latency_ms simulates a slow backend."""

    match: str
    reply: str
    latency_ms: int = 0

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")


def load_script(path: str) -> list[ScriptedExchange]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScriptParseError(f"invalid script JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(raw, list):
        raise ScriptParseError("script must be a JSON list of exchanges")
    exchanges = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "match" not in entry or "reply" not in entry:
            raise ScriptParseError(f"exchange {i} must be an object with 'match' and 'reply'")
        if not isinstance(entry["match"], str) or not isinstance(entry["reply"], str):
            raise ScriptParseError(f"exchange {i}: 'match' and 'reply' must be strings")
        latency = entry.get("latency_ms", 0)
        if not isinstance(latency, int) or latency < 0:
            raise ScriptParseError(f"exchange {i}: 'latency_ms' must be a non-negative int")
        exchanges.append(ScriptedExchange(entry["match"], entry["reply"], latency))
    return exchanges


class ScriptedBackend:
    """Deterministic replay backend.  Calls are totally ordered under an
    internal lock, so concurrent callers still consume the script serially."""

    def __init__(self, exchanges: Iterable[ScriptedExchange]):
        self._exchanges = list(exchanges)
        self._cursor = 0
        self._lock = threading.Lock()

    def remaining(self) -> int:
        with self._lock:
            return len(self._exchanges) - self._cursor

    def complete(self, request: ChatRequest) -> ChatResponse:
        last_user = request.last_user_content()
        with self._lock:
            if self._cursor >= len(self._exchanges):
                raise ScriptExhausted(
                    f"script exhausted after {len(self._exchanges)} exchanges"
                )
            exchange = self._exchanges[self._cursor]
            if exchange.match != "*" and exchange.match not in last_user:
                raise ScriptMismatch(
                    f"exchange {self._cursor} expected {exchange.match!r} "
                    f"in last user message, got: {last_user[:120]!r}"
                )
            self._cursor += 1
        # sleep outside the lock so a slow exchange stalls only its own task
        if exchange.latency_ms:
            time.sleep(exchange.latency_ms / 1000.0)
        return ChatResponse(content=exchange.reply, latency_ms=exchange.latency_ms)


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 3
    initial_delay: float = 0.5
    multiplier: float = 2.0
    max_delay: float = 8.0

    def delay(self, attempt: int, rng: random.Random) -> float:
        ceiling = min(self.initial_delay * self.multiplier**attempt, self.max_delay)
        return rng.uniform(0.0, ceiling)


@dataclass(frozen=True)
class TransportReply:
    status: int
    text: str


# A transport posts a JSON body and reports (status, body) without raising on
# HTTP error statuses; only connection-level trouble raises TransportFailure.
Transport = Callable[[str, Mapping[str, str], Mapping[str, Any], float], TransportReply]


def _requests_transport(
    url: str, headers: Mapping[str, str], body: Mapping[str, Any], timeout: float
) -> TransportReply:
    import requests

    try:
        resp = requests.post(url, headers=dict(headers), json=body, timeout=timeout)
    except requests.RequestException as exc:
        raise TransportFailure(str(exc)) from exc
    return TransportReply(status=resp.status_code, text=resp.text)


@dataclass(frozen=True)
class HttpBackendConfig:
    id: str
    base_url: str
    model: str
    auth_env_var: str = ""

    def endpoint(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"


class HttpBackend:
    def __init__(
        self,
        config: HttpBackendConfig,
        policy: RetryPolicy | None = None,
        transport: Transport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
        timeout: float = 60.0,
    ):
        self.config = config
        self.policy = policy or RetryPolicy()
        self._transport = transport or _requests_transport
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._timeout = timeout

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env_var:
            token = os.environ.get(self.config.auth_env_var, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _body(self, request: ChatRequest) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.config.model,
            "messages": [m.to_dict() for m in request.messages],
            "temperature": request.temperature,
        }
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens
        return body

    def complete(self, request: ChatRequest) -> ChatResponse:
        last_error: GatewayError | None = None
        for attempt in range(self.policy.max_retries + 1):
            if attempt > 0:
                pause = self.policy.delay(attempt - 1, self._rng)
                log.debug("retrying %s in %.2fs (attempt %d)", self.config.id, pause, attempt)
                self._sleep(pause)
            started = time.monotonic()
            try:
                reply = self._transport(
                    self.config.endpoint(), self._headers(), self._body(request), self._timeout
                )
            except TransportFailure as exc:
                last_error = BackendUnavailable(f"{self.config.id}: {exc}")
                continue
            elapsed_ms = int((time.monotonic() - started) * 1000)
            if reply.status == 429:
                last_error = RateLimited(f"{self.config.id}: rate limited")
                continue
            if reply.status >= 500:
                last_error = BackendUnavailable(
                    f"{self.config.id}: server error {reply.status}"
                )
                continue
            if reply.status != 200:
                raise BackendUnavailable(
                    f"{self.config.id}: unexpected status {reply.status}"
                )
            return self._parse(reply.text, elapsed_ms)
        assert last_error is not None
        raise last_error

    def _parse(self, text: str, elapsed_ms: int) -> ChatResponse:
        try:
            raw = json.loads(text)
            content = raw["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(
                f"{self.config.id}: completion body missing choices[0].message.content"
            ) from exc
        if not isinstance(content, str):
            raise MalformedResponse(f"{self.config.id}: content is not a string")
        usage = raw.get("usage") if isinstance(raw.get("usage"), dict) else None
        return ChatResponse(content=content, usage=usage, latency_ms=elapsed_ms)


class Gateway:
    """Routes requests to registered backends by id."""

    def __init__(self) -> None:
        self._backends: dict[str, Any] = {}

    def register_backend(self, backend_id: str, backend: Any) -> None:
        if not hasattr(backend, "complete"):
            raise ValueError(f"backend {backend_id!r} lacks a complete() method")
        self._backends[backend_id] = backend

    def backend_ids(self) -> list[str]:
        return sorted(self._backends)

    def complete(self, request: ChatRequest) -> ChatResponse:
        backend = self._backends.get(request.backend_id)
        if backend is None:
            raise UnknownBackend(request.backend_id)
        return backend.complete(request)
