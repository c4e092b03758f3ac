"""Chat-completion gateway.

One uniform `complete()` call served by three interchangeable backends: a live
OpenAI-compatible HTTP endpoint, a positional scripted backend for
deterministic runs, and a recording proxy that makes any backend replayable.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import httpx

from .errors import (
    ConfigurationError,
    ScriptParseError,
    ScriptUnderrunError,
    TransportError,
    UsageError,
)

ROLES = ("system", "user", "assistant")
FINISH_REASONS = ("stop", "length", "other")

DEFAULT_MODEL = "gpt-4-1106-preview"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"

# The designer model runs warm, the user emulator runs cold.
DESIGNER_TEMPERATURE = 0.8
EMULATOR_TEMPERATURE = 0.2


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise UsageError(f"unknown role {self.role!r}; expected one of {ROLES}")


@dataclass(frozen=True)
class ModelConfig:
    model_name: str = DEFAULT_MODEL
    temperature: float = DESIGNER_TEMPERATURE
    base_url: str = DEFAULT_BASE_URL
    api_key_env: str = DEFAULT_API_KEY_ENV

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise UsageError(f"temperature {self.temperature} outside [0, 2]")


def designer_config(model_name: str = DEFAULT_MODEL, **kwargs) -> ModelConfig:
    return ModelConfig(model_name=model_name, temperature=DESIGNER_TEMPERATURE, **kwargs)


def emulator_config(model_name: str = DEFAULT_MODEL, **kwargs) -> ModelConfig:
    return ModelConfig(model_name=model_name, temperature=EMULATOR_TEMPERATURE, **kwargs)


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise UsageError("token counts must be non-negative")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    usage: Usage = Usage()
    usage_missing: bool = False

    def __post_init__(self):
        if self.finish_reason not in FINISH_REASONS:
            raise UsageError(f"unknown finish reason {self.finish_reason!r}")


def serialize_request(config: ModelConfig, messages: Sequence[ChatMessage]) -> bytes:
    """Canonical request body for POST {base_url}/chat/completions.

    The exact byte layout is pinned by a golden-fixture test; the live backend
    sends these bytes verbatim so the wire always matches the serializer.
    """
    body = {
        "model": config.model_name,
        "temperature": config.temperature,
        "messages": [{"role": m.role, "content": m.content} for m in messages],
    }
    return json.dumps(body, ensure_ascii=False).encode("utf-8")


def request_digest(config: ModelConfig, messages: Sequence[ChatMessage]) -> str:
    return hashlib.sha256(serialize_request(config, messages)).hexdigest()


class Backend(Protocol):
    def complete(self, config: ModelConfig, messages: Sequence[ChatMessage]) -> ChatResponse: ...


def complete(config: ModelConfig, messages: Sequence[ChatMessage], backend: Backend) -> ChatResponse:
    """Single stateless chat completion: the request carries exactly `messages`."""
    if not messages:
        raise UsageError("complete() requires at least one message")
    for m in messages:
        if m.role in ("user", "assistant") and not m.content:
            raise UsageError(f"outgoing {m.role} message must be nonempty")
    return backend.complete(config, list(messages))


class ScriptedBackend:
    """Positional scripted backend: the nth complete() call returns the nth entry.

    One instance belongs to one run; the cursor is not shared across runs.
    """

    def __init__(self, responses: Iterable[str]):
        self._responses = list(responses)
        self._cursor = 0

    @property
    def remaining(self) -> int:
        return len(self._responses) - self._cursor

    def complete(self, config: ModelConfig, messages: Sequence[ChatMessage]) -> ChatResponse:
        if self._cursor >= len(self._responses):
            raise ScriptUnderrunError(
                f"script exhausted after {len(self._responses)} responses"
            )
        content = self._responses[self._cursor]
        self._cursor += 1
        return ChatResponse(content=content, finish_reason="stop", usage=Usage(), usage_missing=True)


def load_script(path: str | Path) -> ScriptedBackend:
    """Load a newline-delimited script of {"response": "..."} records."""
    entries: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScriptParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(record, dict) or not isinstance(record.get("response"), str):
                raise ScriptParseError(
                    "record must be an object with a string 'response' field", line=lineno
                )
            entries.append(record["response"])
    return ScriptedBackend(entries)


class RecordingBackend:
    """Proxies complete() to an inner backend and appends each exchange to a
    script file, so any run can be replayed through load_script()."""

    def __init__(self, inner: Backend, sink: str | Path):
        self._inner = inner
        self._sink = Path(sink)
        self._lock = threading.Lock()
        self._sink.parent.mkdir(parents=True, exist_ok=True)
        self._sink.write_text("", encoding="utf-8")

    def complete(self, config: ModelConfig, messages: Sequence[ChatMessage]) -> ChatResponse:
        response = self._inner.complete(config, messages)  # errors pass through unrecorded
        record = {
            "digest": request_digest(config, messages),
            "response": response.content,
        }
        with self._lock, open(self._sink, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        return response


def record_wrap(inner: Backend, sink: str | Path) -> RecordingBackend:
    return RecordingBackend(inner, sink)


class LiveBackend:
    """HTTP backend for any OpenAI-compatible /chat/completions endpoint.

    Transient failures (timeouts, 429, 5xx) are retried up to `max_attempts`
    times with exponential backoff; other HTTP errors surface immediately.
    In-flight requests are capped so batch workers cannot stampede the API.
    """

    RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        max_inflight: int = 4,
        timeout: float = 120.0,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
    ):
        self._semaphore = threading.Semaphore(max_inflight)
        self._client = httpx.Client(timeout=timeout)
        self._max_attempts = max_attempts
        self._backoff_base = backoff_base

    def complete(self, config: ModelConfig, messages: Sequence[ChatMessage]) -> ChatResponse:
        api_key = os.environ.get(config.api_key_env, "")
        if not api_key:
            raise ConfigurationError(
                f"environment variable {config.api_key_env!r} is unset or empty"
            )
        url = config.base_url.rstrip("/") + "/chat/completions"
        headers = {
            "Authorization": f"Bearer {api_key}",
            "Content-Type": "application/json",
        }
        body = serialize_request(config, messages)

        last_error: Exception | None = None
        for attempt in range(self._max_attempts):
            if attempt:
                time.sleep(self._backoff_base * 2 ** (attempt - 1))
            try:
                with self._semaphore:
                    resp = self._client.post(url, content=body, headers=headers)
            except httpx.TimeoutException as exc:
                last_error = TransportError(f"request timed out: {exc}")
                continue
            except httpx.HTTPError as exc:
                raise TransportError(f"transport failure: {exc}") from exc
            if 200 <= resp.status_code < 300:
                return self._parse_response(resp)
            last_error = TransportError(
                f"HTTP {resp.status_code}: {resp.text[:200]}", status=resp.status_code
            )
            if resp.status_code not in self.RETRYABLE_STATUS:
                raise last_error
        assert last_error is not None
        raise last_error

    @staticmethod
    def _parse_response(resp: httpx.Response) -> ChatResponse:
        try:
            data = resp.json()
            choice = data["choices"][0]
            content = choice["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc
        finish = choice.get("finish_reason")
        if finish not in ("stop", "length"):
            finish = "other"
        usage = data.get("usage") or {}
        missing = "prompt_tokens" not in usage or "completion_tokens" not in usage
        return ChatResponse(
            content=content,
            finish_reason=finish,
            usage=Usage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            ),
            usage_missing=missing,
        )
