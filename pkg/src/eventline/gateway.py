"""Chat-completion and embedding backends.

Three kinds of backend share one duck-typed surface (``complete_once`` and,
for embedders, ``embed_once``):

* :class:`OpenAICompatBackend` talks to any OpenAI-compatible HTTP server.
* :class:`ScriptedBackend` replays canned completions in order (tests).
* :class:`IdentityEmbedder` maps each distinct token to a one-hot vector.

:func:`complete` and :func:`embed` wrap a backend with retry, backoff and
rate limiting.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import httpx
import numpy as np

log = logging.getLogger(__name__)


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    """Network failure or a retryable server status (429, 5xx)."""


class AuthenticationError(GatewayError):
    """401/403 from the endpoint; never retried."""


class RequestRejected(GatewayError):
    """Non-retryable client error (4xx other than auth and 429)."""


class ScriptExhausted(GatewayError):
    pass


class DimensionMismatch(GatewayError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 2048
    model_name: str = ""
    # Local routing tag (e.g. "extraction", "feedback"); never sent on the wire.
    task: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature must be in [0, 1], got {self.temperature}")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ModelResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency: float = 0.0


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_backoff: float = 1.0
    max_requests_per_minute: int = 60

    def __post_init__(self) -> None:
        if self.max_attempts < 1 or self.max_requests_per_minute < 1:
            raise ValueError("max_attempts and max_requests_per_minute must be positive")
        if self.base_backoff < 0:
            raise ValueError("base_backoff must be non-negative")

    def backoff(self, attempt: int) -> float:
        """Delay between attempt ``attempt`` and ``attempt + 1`` (0-based)."""
        return self.base_backoff * 2**attempt


class RateLimiter:
    """Sliding-window limiter: at most ``limit`` acquisitions per ``window`` seconds."""

    def __init__(self, limit: int, window: float = 60.0, clock=time.monotonic, sleep=time.sleep):
        self.limit = limit
        self.window = window
        self._clock = clock
        self._sleep = sleep
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._clock()
                while self._stamps and now - self._stamps[0] >= self.window:
                    self._stamps.popleft()
                if len(self._stamps) < self.limit:
                    self._stamps.append(now)
                    return
                self._sleep(self.window - (now - self._stamps[0]))


class ScriptedBackend:
    """Replays canned completions strictly in order.

    Entries may be strings or callables ``request -> str`` (for responders
    that need to look at the prompt).  An entry that is an exception instance
    is raised instead of returned.
    """

    def __init__(self, responses: Sequence[str | Callable[[ChatRequest], str] | BaseException], name="scripted"):
        self.name = name
        self._responses = deque(responses)
        self.call_log: list[ChatRequest] = []
        self._lock = threading.Lock()

    @property
    def remaining(self) -> int:
        return len(self._responses)

    def complete_once(self, request: ChatRequest) -> ModelResponse:
        with self._lock:
            self.call_log.append(request)
            if not self._responses:
                raise ScriptExhausted(f"{self.name}: no scripted response left for call {len(self.call_log)}")
            entry = self._responses.popleft()
        if isinstance(entry, BaseException):
            raise entry
        text = entry(request) if callable(entry) else entry
        return ModelResponse(text=text)


class FunctionBackend:
    """Backend whose completion is a pure function of the request."""

    def __init__(self, fn: Callable[[ChatRequest], str], name="function"):
        self.name = name
        self.fn = fn
        self.call_log: list[ChatRequest] = []
        self._lock = threading.Lock()

    def complete_once(self, request: ChatRequest) -> ModelResponse:
        with self._lock:
            self.call_log.append(request)
        return ModelResponse(text=self.fn(request))


class IdentityEmbedder:
    """One-hot embedder over the distinct tokens of a single call.

    Equal tokens get equal vectors and distinct tokens orthogonal ones, so
    cosine similarity is exact string match.  The dimension is the number of
    distinct tokens in the call, which is why callers embed candidate and
    reference tokens together.
    """

    name = "identity"

    def embed_once(self, texts: Sequence[str]) -> np.ndarray:
        index: dict[str, int] = {}
        for t in texts:
            index.setdefault(t, len(index))
        out = np.zeros((len(texts), len(index)))
        out[np.arange(len(texts)), [index[t] for t in texts]] = 1.0
        return out


class OpenAICompatBackend:
    """Client for ``/chat/completions`` and ``/embeddings`` on an OpenAI-compatible server."""

    def __init__(
        self,
        base_url: str,
        model_name: str,
        api_key_env: str | None = None,
        timeout: float = 120.0,
        name: str = "openai",
        transport: httpx.BaseTransport | None = None,
    ):
        self.name = name
        self.base_url = base_url.rstrip("/")
        self.model_name = model_name
        # Only the variable name is stored; the value goes straight into the header.
        self.api_key_env = api_key_env
        headers = {"Content-Type": "application/json"}
        if api_key_env:
            key = os.environ.get(api_key_env)
            if key is None:
                raise AuthenticationError(f"environment variable {api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self.call_log: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"OpenAICompatBackend(base_url={self.base_url!r}, model_name={self.model_name!r})"

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, body: dict[str, Any]) -> dict[str, Any]:
        with self._lock:
            self.call_log.append({"path": path, "model": body.get("model")})
        try:
            r = self._client.post(self.base_url + path, json=body)
        except httpx.HTTPError as e:
            raise TransportError(f"{path}: {type(e).__name__}: {e}") from e
        if r.status_code in (401, 403):
            raise AuthenticationError(f"{path}: HTTP {r.status_code}")
        if r.status_code == 429 or r.status_code >= 500:
            raise TransportError(f"{path}: HTTP {r.status_code}")
        if r.status_code >= 400:
            raise RequestRejected(f"{path}: HTTP {r.status_code}: {r.text[:200]}")
        try:
            return r.json()
        except ValueError as e:
            raise TransportError(f"{path}: response is not JSON") from e

    def complete_once(self, request: ChatRequest) -> ModelResponse:
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.append({"role": "user", "content": request.user_prompt})
        body = {
            "model": request.model_name or self.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        t0 = time.perf_counter()
        data = self._post("/chat/completions", body)
        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as e:
            raise TransportError("malformed chat completion response") from e
        usage = data.get("usage") or {}
        return ModelResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            latency=time.perf_counter() - t0,
        )

    def embed_once(self, texts: Sequence[str]) -> np.ndarray:
        data = self._post("/embeddings", {"model": self.model_name, "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda d: d["index"])
            vectors = [row["embedding"] for row in rows]
        except (KeyError, TypeError) as e:
            raise TransportError("malformed embeddings response") from e
        if len(vectors) != len(texts):
            raise DimensionMismatch(f"asked for {len(texts)} embeddings, got {len(vectors)}")
        if len({len(v) for v in vectors}) > 1:
            raise DimensionMismatch("endpoint returned ragged embedding rows")
        return np.asarray(vectors, dtype=float)


@dataclass
class Gateway:
    """A backend plus the retry and rate-limit policy used to call it.

    Share one instance among workers; the limiter is the only synchronized part.
    """

    backend: Any
    policy: RetryPolicy = field(default_factory=RetryPolicy)
    sleep: Callable[[float], None] = time.sleep
    limiter: RateLimiter | None = None

    def __post_init__(self) -> None:
        if self.limiter is None:
            self.limiter = RateLimiter(self.policy.max_requests_per_minute)

    @property
    def name(self) -> str:
        return getattr(self.backend, "name", type(self.backend).__name__)

    def _call(self, fn, *args):
        for attempt in range(self.policy.max_attempts):
            # Only network-facing backends are rate limited.
            if isinstance(self.backend, OpenAICompatBackend):
                self.limiter.acquire()
            try:
                return fn(*args)
            except TransportError as e:
                if attempt + 1 == self.policy.max_attempts:
                    raise
                delay = self.policy.backoff(attempt)
                log.warning("%s: attempt %d failed (%s); retrying in %.2fs", self.name, attempt + 1, e, delay)
                self.sleep(delay)
        raise AssertionError("unreachable")

    def complete(self, request: ChatRequest) -> ModelResponse:
        return self._call(self.backend.complete_once, request)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            raise ValueError("embed() needs at least one text")
        matrix = np.asarray(self._call(self.backend.embed_once, list(texts)), dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != len(texts):
            raise DimensionMismatch(f"expected {len(texts)} rows, got shape {matrix.shape}")
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise DimensionMismatch("endpoint returned a zero embedding")
        return matrix / norms


def as_gateway(backend_or_gateway, policy: RetryPolicy | None = None) -> Gateway:
    if isinstance(backend_or_gateway, Gateway):
        return backend_or_gateway
    return Gateway(backend_or_gateway, policy or RetryPolicy(base_backoff=0.0))


def complete(backend, request: ChatRequest) -> ModelResponse:
    """Run one chat completion, retrying transport failures per the gateway policy."""
    return as_gateway(backend).complete(request)


def embed(backend, texts: Sequence[str]) -> np.ndarray:
    """Embed ``texts``; rows are re-normalized to unit length."""
    return as_gateway(backend).embed(texts)
