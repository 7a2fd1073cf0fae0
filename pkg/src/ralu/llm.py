"""Chat-completion clients.

Two backends share one interface (``client.complete(request)``):

* :class:`HttpBackend` talks to any OpenAI-compatible ``/chat/completions``
  endpoint, with retries, exponential backoff with jitter and an optional
  global rate cap.
* :class:`ReplayBackend` serves scripted responses from a JSON Lines fixture,
  strictly in order, for offline and deterministic runs.

Every client keeps a :class:`Usage` counter of successful calls.
:class:`SessionClient` wraps another client to give one task its own counter
and an exchange log that can be written back out as a replay fixture.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import httpx

from ralu.errors import RaluError

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.7
DEFAULT_FREQUENCY_PENALTY = 0.3
BACKOFF_BASE_S = 1.0
BACKOFF_CAP_S = 30.0
ROLES = ("system", "user", "assistant")


class LLMError(RaluError):
    pass


class Timeout(LLMError):
    pass


class BackendUnreachable(Timeout):
    pass


class RateLimited(LLMError):
    pass


class HttpError(LLMError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        super().__init__(f"HTTP {status}: {body[:200]}")


class DecodeError(LLMError):
    pass


class FixtureExhausted(LLMError):
    pass


class FixtureParseError(LLMError):
    pass


class FixtureMismatch(LLMError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role != "system" and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    model: str = "default"
    temperature: float = DEFAULT_TEMPERATURE
    frequency_penalty: float = DEFAULT_FREQUENCY_PENALTY
    want_logprobs: bool = False
    max_tokens: int = 2048

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @property
    def last_user(self) -> str:
        for m in reversed(self.messages):
            if m.role == "user":
                return m.content
        return ""


@dataclass(frozen=True)
class ChatResponse:
    text: str
    token_logprobs: tuple[float, ...] | None = None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: float = 0.0
    retries: int = 0

    def __post_init__(self):
        if self.token_logprobs is not None:
            lps = tuple(float(x) for x in self.token_logprobs)
            if any(lp > 0 for lp in lps):
                raise ValueError("log-probabilities must be <= 0")
            object.__setattr__(self, "token_logprobs", lps)
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")


@dataclass
class BackendConfig:
    endpoint_url: str = "http://localhost:8000/v1"
    api_key_env: str = "OPENAI_API_KEY"
    timeout_s: float = 60.0
    max_retries: int = 3
    requests_per_second: float | None = None

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")

    @property
    def completions_url(self) -> str:
        url = self.endpoint_url.rstrip("/")
        return url if url.endswith("/chat/completions") else url + "/chat/completions"


class Usage:
    """Thread-safe running totals over successful calls."""

    def __init__(self):
        self._lock = threading.Lock()
        self.prompt_tokens = 0
        self.completion_tokens = 0
        self.calls = 0

    def record(self, response: ChatResponse) -> None:
        with self._lock:
            self.prompt_tokens += response.prompt_tokens
            self.completion_tokens += response.completion_tokens
            self.calls += 1

    def report(self) -> tuple[int, int, int]:
        with self._lock:
            return (self.prompt_tokens, self.completion_tokens, self.calls)


class ChatClient:
    """Base class: subclasses implement :meth:`_complete`."""

    def __init__(self):
        self.usage = Usage()

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self._complete(request)
        self.usage.record(response)
        return response

    def _complete(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError

    def close(self) -> None:
        pass


def usage_report(client: ChatClient) -> tuple[int, int, int]:
    """``(total_prompt_tokens, total_completion_tokens, total_calls)``."""
    return client.usage.report()


class _RateLimiter:
    def __init__(self, per_second: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / per_second if per_second else 0.0
        self.clock = clock
        self.sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self.clock()
            slot = max(now, self._next)
            self._next = slot + self.interval
        if slot > now:
            self.sleep(slot - now)


def backoff_delay(attempt: int, rng: random.Random | None = None) -> float:
    """Full-jitter exponential backoff for retry ``attempt`` (0-based)."""
    ceiling = min(BACKOFF_CAP_S, BACKOFF_BASE_S * 2**attempt)
    return (rng or random).uniform(0.0, ceiling)


class HttpBackend(ChatClient):
    """OpenAI-compatible chat-completions client.

    The API key is read from the environment variable named by
    ``config.api_key_env`` and never stored in configuration.
    """

    RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        config: BackendConfig,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        super().__init__()
        self.config = config
        self.sleep = sleep
        self.retry_count = 0
        self._limiter = _RateLimiter(config.requests_per_second, sleep=sleep)
        self._http = httpx.Client(timeout=config.timeout_s, transport=transport)

    def close(self) -> None:
        self._http.close()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    @staticmethod
    def request_body(request: ChatRequest) -> dict:
        body = {
            "model": request.model,
            "messages": [m.to_dict() for m in request.messages],
            "temperature": request.temperature,
            "frequency_penalty": request.frequency_penalty,
            "max_tokens": request.max_tokens,
        }
        if request.want_logprobs:
            body["logprobs"] = True
            body["top_logprobs"] = 1
        return body

    def _complete(self, request: ChatRequest) -> ChatResponse:
        body = self.request_body(request)
        url = self.config.completions_url
        last_error: LLMError | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self.sleep(backoff_delay(attempt - 1))
            self._limiter.wait()
            started = time.perf_counter()
            try:
                resp = self._http.post(url, json=body, headers=self._headers())
            except httpx.TimeoutException as exc:
                last_error = Timeout(f"request to {url} timed out: {exc}")
                continue
            except httpx.TransportError as exc:
                last_error = BackendUnreachable(f"could not reach {url}: {exc}")
                continue
            latency = (time.perf_counter() - started) * 1000.0
            if resp.status_code == 429:
                last_error = RateLimited(f"rate limited by {url}")
                continue
            if resp.status_code in self.RETRY_STATUSES:
                last_error = HttpError(resp.status_code, resp.text)
                continue
            if resp.status_code >= 400:
                raise HttpError(resp.status_code, resp.text)
            self.retry_count += attempt
            return parse_completion(resp.content, latency_ms=latency, retries=attempt)
        assert last_error is not None
        raise last_error


def parse_completion(payload: bytes | str, latency_ms: float = 0.0, retries: int = 0) -> ChatResponse:
    """Decode an OpenAI-style chat-completion response body."""
    try:
        data = json.loads(payload)
        choice = data["choices"][0]
        text = choice["message"]["content"]
        if not isinstance(text, str):
            raise TypeError("message content is not a string")
        logprobs = None
        lp_block = choice.get("logprobs")
        if lp_block and lp_block.get("content") is not None:
            logprobs = tuple(min(float(t["logprob"]), 0.0) for t in lp_block["content"])
        usage = data.get("usage") or {}
        return ChatResponse(
            text=text,
            token_logprobs=logprobs,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            latency_ms=latency_ms,
            retries=retries,
        )
    except (ValueError, KeyError, IndexError, TypeError, AttributeError) as exc:
        raise DecodeError(f"malformed completion body: {exc}") from exc


@dataclass(frozen=True)
class FixtureEntry:
    response: str
    expect_user_contains: str | None = None
    logprobs: tuple[float, ...] | None = None
    usage: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        out = {
            "expect_user_contains": self.expect_user_contains,
            "response": self.response,
            "logprobs": list(self.logprobs) if self.logprobs is not None else None,
        }
        if self.usage is not None:
            out["usage"] = {"prompt_tokens": self.usage[0], "completion_tokens": self.usage[1]}
        return out


def parse_fixture_line(line: str, lineno: int = 0) -> FixtureEntry:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FixtureParseError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("response"), str):
        raise FixtureParseError(f"line {lineno}: entry needs a string 'response'")
    expect = obj.get("expect_user_contains")
    if expect is not None and not isinstance(expect, str):
        raise FixtureParseError(f"line {lineno}: 'expect_user_contains' must be text or null")
    lps = obj.get("logprobs")
    if lps is not None:
        if not isinstance(lps, list) or not all(isinstance(x, (int, float)) and x <= 0 for x in lps):
            raise FixtureParseError(f"line {lineno}: 'logprobs' must be a list of reals <= 0")
        lps = tuple(float(x) for x in lps)
    usage = obj.get("usage")
    if usage is not None:
        try:
            usage = (int(usage["prompt_tokens"]), int(usage["completion_tokens"]))
        except (KeyError, TypeError, ValueError):
            raise FixtureParseError(f"line {lineno}: malformed 'usage'") from None
    return FixtureEntry(obj["response"], expect, lps, usage)


def load_fixture(path: str | Path) -> list[FixtureEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                entries.append(parse_fixture_line(line, lineno))
    return entries


def write_fixture(path: str | Path, entries: Iterable[FixtureEntry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e.to_dict(), ensure_ascii=False) + "\n")


def _word_count(text: str) -> int:
    return len(text.split())


class ReplayBackend(ChatClient):
    """Serves fixture entries in order; a call past the end raises FixtureExhausted.

    Token usage comes from the entry's ``usage`` field when present and is
    otherwise estimated by whitespace word counts (completion tokens fall back
    to the number of scripted logprobs).
    """

    def __init__(self, entries: Sequence[FixtureEntry], name: str = "<replay>"):
        super().__init__()
        self.entries = list(entries)
        self.name = name
        self.position = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> ReplayBackend:
        return cls(load_fixture(path), name=str(path))

    def _complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            if self.position >= len(self.entries):
                raise FixtureExhausted(
                    f"{self.name}: fixture exhausted after {len(self.entries)} responses"
                )
            entry = self.entries[self.position]
            if entry.expect_user_contains is not None and entry.expect_user_contains not in request.last_user:
                raise FixtureMismatch(
                    f"{self.name}: entry {self.position + 1} expects the user turn to contain "
                    f"{entry.expect_user_contains[:80]!r}"
                )
            self.position += 1
        if entry.usage is not None:
            prompt, completion = entry.usage
        else:
            prompt = sum(_word_count(m.content) for m in request.messages)
            completion = len(entry.logprobs) if entry.logprobs else _word_count(entry.response)
        return ChatResponse(
            text=entry.response,
            token_logprobs=entry.logprobs if request.want_logprobs else None,
            prompt_tokens=prompt,
            completion_tokens=completion,
        )


@dataclass
class Exchange:
    request: ChatRequest
    response: ChatResponse

    def to_dict(self) -> dict:
        return {
            "messages": [m.to_dict() for m in self.request.messages],
            "want_logprobs": self.request.want_logprobs,
            "response": self.response.text,
            "logprobs": list(self.response.token_logprobs)
            if self.response.token_logprobs is not None
            else None,
            "usage": {
                "prompt_tokens": self.response.prompt_tokens,
                "completion_tokens": self.response.completion_tokens,
            },
        }


class SessionClient(ChatClient):
    """Per-task view of a shared client: own usage counter plus an exchange log."""

    def __init__(self, inner: ChatClient):
        super().__init__()
        self.inner = inner
        self.exchanges: list[Exchange] = []

    def _complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        self.exchanges.append(Exchange(request, response))
        return response

    def fixture_entries(self) -> list[FixtureEntry]:
        """The logged exchanges in replay-fixture form."""
        out = []
        for ex in self.exchanges:
            first_line = ex.request.last_user.strip().splitlines()
            out.append(
                FixtureEntry(
                    response=ex.response.text,
                    expect_user_contains=first_line[0][:120] if first_line else None,
                    logprobs=ex.response.token_logprobs,
                    usage=(ex.response.prompt_tokens, ex.response.completion_tokens),
                )
            )
        return out

    def write_trace(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for ex in self.exchanges:
                fh.write(json.dumps(ex.to_dict(), ensure_ascii=False) + "\n")
