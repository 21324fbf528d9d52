"""Completion backends: an HTTP chat-completions client and a scripted stand-in.

Transport-level retries (network, 5xx, 429, timeouts) live here; re-asking the
model because its output failed validation is the extraction layer's budget.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from .prompting import extract_record_key

API_KEY_ENV = "LOGSYN_API_KEY"
API_BASE_ENV = "LOGSYN_API_BASE"

DEFAULT_TEMPERATURE = 0.1
DEFAULT_TRANSPORT_RETRIES = 3


class BackendError(Exception):
    """Transport failure that survived the retry budget, or a non-retryable 4xx."""


class AuthError(Exception):
    """HTTP 401/403: credentials are wrong, retrying cannot help."""


@dataclass(frozen=True)
class CompletionParams:
    model: str
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = 512
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


@dataclass(frozen=True)
class BackendResult:
    text: str
    latency: float
    attempt_errors: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.text and not self.attempt_errors:
            raise ValueError("empty completion must carry at least one attempt error")


class CompletionBackend(Protocol):
    def complete(self, prompt: str, params: CompletionParams) -> BackendResult: ...


class HttpBackend:
    """Chat-completions-style JSON POST client with retry and backoff.

    The prompt travels as a single user message, which keeps the client
    compatible with the usual vendor endpoints and proxies. Instances are
    safe for concurrent complete() calls.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        transport_retries: int = DEFAULT_TRANSPORT_RETRIES,
        backoff_base: float = 0.5,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.base_url = (base_url or os.environ.get(API_BASE_ENV, "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        if not self.base_url:
            raise ValueError(f"no endpoint configured; set {API_BASE_ENV} or pass base_url")
        if transport_retries < 0:
            raise ValueError("transport_retries must be >= 0")
        self.transport_retries = transport_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._client = httpx.Client(transport=transport)

    def complete(self, prompt: str, params: CompletionParams) -> BackendResult:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        url = f"{self.base_url}/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": params.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        }

        start = time.monotonic()
        attempt_errors: list[str] = []
        for attempt in range(self.transport_retries + 1):
            if attempt > 0:
                # Exponential backoff keeps delays non-decreasing across attempts.
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                response = self._client.post(
                    url, json=payload, headers=headers, timeout=params.timeout
                )
            except httpx.HTTPError as exc:
                attempt_errors.append(f"transport: {exc}")
                continue

            if response.status_code in (401, 403):
                raise AuthError(f"HTTP {response.status_code} from {url}")
            if response.status_code == 429 or response.status_code >= 500:
                attempt_errors.append(f"HTTP {response.status_code}")
                continue
            if response.status_code >= 400:
                raise BackendError(f"HTTP {response.status_code} from {url}: {response.text[:200]}")

            text = self._completion_text(response)
            if text is None:
                attempt_errors.append("unparseable completion payload")
                continue
            if not text:
                attempt_errors.append("empty completion")
                continue
            return BackendResult(
                text=text,
                latency=time.monotonic() - start,
                attempt_errors=tuple(attempt_errors),
            )

        raise BackendError(
            f"transport retries exhausted after {self.transport_retries + 1} attempts: "
            + "; ".join(attempt_errors)
        )

    @staticmethod
    def _completion_text(response: httpx.Response) -> str | None:
        try:
            body = response.json()
            return body["choices"][0]["message"]["content"] or ""
        except (ValueError, LookupError, TypeError):
            return None

    def close(self) -> None:
        self._client.close()


@dataclass
class ScriptedBackend:
    """Deterministic backend that replays fixture responses keyed by record id.

    A fixture value may be a single response or a sequence; call k on a key
    returns the k-th entry (the last one repeats once the sequence runs out),
    which lets tests script a failure followed by a recovery.
    """

    fixtures: Mapping[str, str | Sequence[str]]
    key_fn: Callable[[str], str | None] = extract_record_key
    strict: bool = True
    fallback_response: str = ""
    _calls: dict[str, int] = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.fixtures:
            raise ValueError("scripted backend needs at least one fixture")

    def complete(self, prompt: str, params: CompletionParams) -> BackendResult:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        start = time.monotonic()
        key = self.key_fn(prompt)
        if key is None or key not in self.fixtures:
            if self.strict:
                raise BackendError(f"no fixture for key {key!r}")
            text = self.fallback_response
            errors = () if text else ("fixture missing, empty fallback",)
            return BackendResult(
                text=text, latency=time.monotonic() - start, attempt_errors=errors
            )
        with self._lock:
            call_index = self._calls.get(key, 0)
            self._calls[key] = call_index + 1
        scripted = self.fixtures[key]
        if isinstance(scripted, str):
            text = scripted
        else:
            text = scripted[min(call_index, len(scripted) - 1)]
        errors = () if text else ("scripted empty response",)
        return BackendResult(text=text, latency=time.monotonic() - start, attempt_errors=errors)

    def reset(self) -> None:
        """Forget per-key call counts so the same fixtures replay from the top."""
        with self._lock:
            self._calls.clear()
