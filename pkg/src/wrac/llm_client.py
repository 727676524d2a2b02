"""Chat-completions transport with a content-addressed record/replay cache.

Modes:
    replay  serve only from the cache; a miss raises PlannerUnavailable.
    record  serve from the cache, otherwise call the endpoint and store.
    live    always call the endpoint; nothing is read or written.

Environment:
    WRAC_LLM_ENDPOINT  full chat-completions URL
    WRAC_LLM_API_KEY   bearer token
    WRAC_LLM_MODE      record | replay | live (default replay)
    WRAC_LLM_MODEL     model name (default gpt-4.1)
    WRAC_CACHE_DIR     cache directory (default .wrac_cache)
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import httpx

from .tokens import count_tokens

logger = logging.getLogger(__name__)

MODES = ("record", "replay", "live")
DEFAULT_MODEL = "gpt-4.1"


class PlannerUnavailable(RuntimeError):
    """No model response can be obtained (replay miss or dead transport)."""


class TransportError(RuntimeError):
    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message if status is None else f"HTTP {status}: {message}")
        self.status = status


@dataclass(frozen=True)
class ChatRequest:
    model: str
    system: str
    user: str
    temperature: float = 0.0

    def cache_key(self) -> str:
        payload = json.dumps(
            {"model": self.model, "system": self.system, "user": self.user, "temperature": self.temperature},
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Usage:
    input_tokens: int = 0
    output_tokens: int = 0
    cached_tokens: int = 0

    def __post_init__(self):
        if min(self.input_tokens, self.output_tokens, self.cached_tokens) < 0:
            raise ValueError("token counts must be >= 0")
        if self.cached_tokens > self.input_tokens:
            raise ValueError("cached_tokens cannot exceed input_tokens")

    def __add__(self, other: "Usage") -> "Usage":
        return Usage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
            self.cached_tokens + other.cached_tokens,
        )


@dataclass(frozen=True)
class ChatExchange:
    request: ChatRequest
    response_text: str
    usage: Usage = field(default_factory=Usage)
    latency_ms: float = 0.0

    def to_record(self) -> dict:
        return {
            "request": asdict(self.request),
            "response_text": self.response_text,
            "usage": asdict(self.usage),
            "latency_ms": self.latency_ms,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ChatExchange":
        return cls(
            request=ChatRequest(**record["request"]),
            response_text=record["response_text"],
            usage=Usage(**record["usage"]),
            latency_ms=record.get("latency_ms", 0.0),
        )


class ExchangeCache:
    """One JSON file per cache key; writes go through a temp file + rename."""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    def path_for(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, request: ChatRequest) -> Optional[ChatExchange]:
        path = self.path_for(request.cache_key())
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        return ChatExchange.from_record(json.loads(text))

    def put(self, exchange: ChatExchange) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.path_for(exchange.request.cache_key())
        data = json.dumps(exchange.to_record(), ensure_ascii=False, indent=2, sort_keys=True)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return path

    def __len__(self) -> int:
        if not self.directory.exists():
            return 0
        return sum(1 for p in self.directory.glob("*.json") if not p.name.startswith(".tmp-"))


# (url, headers, json body) -> (status, decoded body)
Transport = Callable[[str, dict, dict], "tuple[int, dict]"]


def httpx_transport(timeout: float = 120.0) -> Transport:
    def post(url: str, headers: dict, body: dict) -> tuple[int, dict]:
        try:
            resp = httpx.post(url, headers=headers, json=body, timeout=timeout)
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        try:
            data = resp.json()
        except ValueError:
            data = {"error": resp.text}
        return resp.status_code, data

    return post


def usage_from_response(data: dict, request: ChatRequest, response_text: str) -> Usage:
    """Read provider-reported usage, estimating whatever is missing."""
    usage = data.get("usage") or {}
    input_tokens = usage.get("prompt_tokens", usage.get("input_tokens"))
    output_tokens = usage.get("completion_tokens", usage.get("output_tokens"))
    details = usage.get("prompt_tokens_details") or usage.get("input_tokens_details") or {}
    cached = details.get("cached_tokens", 0) or 0
    if input_tokens is None:
        input_tokens = count_tokens(request.system) + count_tokens(request.user)
    if output_tokens is None:
        output_tokens = count_tokens(response_text)
    return Usage(int(input_tokens), int(output_tokens), min(int(cached), int(input_tokens)))


class LLMClient:
    def __init__(
        self,
        mode: str = "replay",
        cache_dir: Union[str, Path, None] = None,
        endpoint: Optional[str] = None,
        api_key: Optional[str] = None,
        model: str = DEFAULT_MODEL,
        transport: Optional[Transport] = None,
        max_in_flight: int = 4,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.mode = mode
        self.cache = ExchangeCache(cache_dir) if cache_dir is not None else None
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.transport = transport or httpx_transport()
        self.network_calls = 0
        self._slots = threading.BoundedSemaphore(max(1, max_in_flight))
        self._lock = threading.Lock()

    @classmethod
    def from_env(cls, mode: Optional[str] = None, cache_dir: Union[str, Path, None] = None, **kwargs) -> "LLMClient":
        env = os.environ
        return cls(
            mode=mode or env.get("WRAC_LLM_MODE", "replay"),
            cache_dir=cache_dir or env.get("WRAC_CACHE_DIR", ".wrac_cache"),
            endpoint=env.get("WRAC_LLM_ENDPOINT"),
            api_key=env.get("WRAC_LLM_API_KEY"),
            model=env.get("WRAC_LLM_MODEL", DEFAULT_MODEL),
            **kwargs,
        )

    def request(self, system: str, user: str, temperature: float = 0.0) -> ChatRequest:
        return ChatRequest(model=self.model, system=system, user=user, temperature=temperature)

    def complete(self, request: ChatRequest) -> ChatExchange:
        if self.mode != "live" and self.cache is not None:
            hit = self.cache.get(request)
            if hit is not None:
                return hit
        if self.mode == "replay":
            raise PlannerUnavailable(f"replay cache miss for key {request.cache_key()[:12]}")
        if not self.endpoint:
            raise PlannerUnavailable("no endpoint configured (set WRAC_LLM_ENDPOINT)")
        exchange = self._post(request)
        if self.mode == "record" and self.cache is not None:
            self.cache.put(exchange)
        return exchange

    def _post(self, request: ChatRequest) -> ChatExchange:
        body = {
            "model": request.model,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        with self._slots:
            with self._lock:
                self.network_calls += 1
            started = time.perf_counter()
            status, data = self.transport(self.endpoint, headers, body)
            latency_ms = (time.perf_counter() - started) * 1000.0
        if status >= 400:
            raise TransportError(json.dumps(data)[:500], status)
        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError):
            raise TransportError(f"malformed completion body: {json.dumps(data)[:200]}", status) from None
        usage = usage_from_response(data, request, text)
        logger.debug("completion %s: %d in / %d out, %.0f ms", request.cache_key()[:12],
                     usage.input_tokens, usage.output_tokens, latency_ms)
        return ChatExchange(request=request, response_text=text, usage=usage, latency_ms=round(latency_ms, 3))


class StubClient:
    """In-process stand-in that answers from a callable; no network, no cache.

    Used by tests and for building replay fixtures deterministically.
    """

    def __init__(self, respond: Callable[[ChatRequest], str], model: str = DEFAULT_MODEL, latency_ms: float = 0.0):
        self.respond = respond
        self.model = model
        self.latency_ms = latency_ms
        self.calls: list[ChatRequest] = []

    def request(self, system: str, user: str, temperature: float = 0.0) -> ChatRequest:
        return ChatRequest(model=self.model, system=system, user=user, temperature=temperature)

    def complete(self, request: ChatRequest) -> ChatExchange:
        self.calls.append(request)
        text = self.respond(request)
        usage = Usage(count_tokens(request.system) + count_tokens(request.user), count_tokens(text), 0)
        return ChatExchange(request=request, response_text=text, usage=usage, latency_ms=self.latency_ms)


def stub_transport(respond: Callable[[dict], str]) -> Transport:
    """Wrap a body -> text function as a chat-completions transport."""

    def post(url: str, headers: dict, body: dict) -> tuple[int, dict]:
        text = respond(body)
        return 200, {"choices": [{"message": {"role": "assistant", "content": text}}]}

    return post
