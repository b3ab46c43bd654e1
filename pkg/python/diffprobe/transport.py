"""
Chat-completion transport over HTTP JSON

Talks to any endpoint that accepts the common chat-completions request body
({"model", "messages", "temperature"}) and answers with
{"choices": [{"message": {"content": ...}}], "usage": {...}}.
"""

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import List, Optional

import httpx
from tenacity import (
    RetryError,
    Retrying,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from .errors import DiffProbeError

logger = logging.getLogger(__name__)

API_KEY_ENV = "DIFFPROBE_API_KEY"
RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class TransportError(DiffProbeError):
    """Raised when the endpoint cannot produce a completion"""

    def __init__(self, message: str, status_code: Optional[int] = None):
        self.status_code = status_code
        super().__init__(message)


class _RetryableError(TransportError):
    pass


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None
    latency_ms: float = 0.0


class ChatTransport:
    """
    Thread-safe chat-completion client

    At most max_in_flight requests run at once; each call is tried up to
    max_attempts times with exponential backoff on timeouts, connection
    errors, 429 and 5xx. The API key is read from DIFFPROBE_API_KEY only.

    Args:
        transport: optional httpx transport (httpx.MockTransport in tests)
    """

    def __init__(
        self,
        endpoint_url: str,
        timeout_s: float = 60.0,
        max_in_flight: int = 4,
        max_attempts: int = 3,
        backoff_s: float = 1.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        if not endpoint_url:
            raise ValueError("ChatTransport needs an endpoint URL")
        self.endpoint_url = endpoint_url
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s

        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(timeout=timeout_s, headers=headers, transport=transport)

        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self.calls = 0

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
        return False

    def complete(self, messages: List[dict], model_name: str, temperature: float = 1.0) -> CompletionResult:
        """
        One chat completion

        Raises:
            TransportError: non-2xx after retries, timeout, or malformed body
        """
        with self._lock:
            self.calls += 1

        body = {"model": model_name, "messages": messages, "temperature": temperature}
        retrying = Retrying(
            stop=stop_after_attempt(self.max_attempts),
            wait=wait_exponential(multiplier=self.backoff_s, max=30 * max(self.backoff_s, 0.01)),
            retry=retry_if_exception_type(_RetryableError),
            reraise=False,
        )
        with self._slots:
            try:
                for attempt in retrying:
                    with attempt:
                        return self._post(body, model_name)
            except RetryError as e:
                last = e.last_attempt.exception()
                raise TransportError(
                    f"Gave up after {self.max_attempts} attempts: {last}",
                    status_code=getattr(last, "status_code", None),
                ) from last

    def _post(self, body: dict, model_name: str) -> CompletionResult:
        start = time.perf_counter()
        try:
            response = self._client.post(self.endpoint_url, json=body)
        except httpx.TimeoutException as e:
            logger.warning("Completion request to %s timed out", self.endpoint_url)
            raise _RetryableError(f"timeout: {e}") from e
        except httpx.TransportError as e:
            logger.warning("Completion request to %s failed: %s", self.endpoint_url, e)
            raise _RetryableError(f"connection error: {e}") from e

        latency_ms = (time.perf_counter() - start) * 1000.0
        logger.info("POST %s model=%s status=%d latency=%.0fms",
                    self.endpoint_url, model_name, response.status_code, latency_ms)

        if response.status_code in RETRYABLE_STATUS:
            raise _RetryableError(f"HTTP {response.status_code}", status_code=response.status_code)
        if not response.is_success:
            raise TransportError(f"HTTP {response.status_code}", status_code=response.status_code)

        try:
            data = response.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise TransportError(f"Malformed completion body: {e}") from e
        if not isinstance(text, str):
            raise TransportError("Malformed completion body: content is not a string")

        usage = data.get("usage") or {}
        return CompletionResult(
            text=text,
            prompt_tokens=usage.get("prompt_tokens"),
            completion_tokens=usage.get("completion_tokens"),
            latency_ms=latency_ms,
        )
