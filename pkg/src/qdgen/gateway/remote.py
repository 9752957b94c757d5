"""Chat-completion HTTP backend with retries, backoff, and rate limiting."""

from __future__ import annotations

import logging
import os
import threading
import time
from typing import Callable, Optional

from ..errors import ConfigError, PermanentBackendError, TransportError
from .roles import RoleConfig

logger = logging.getLogger(__name__)

_RETRYABLE_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


class TokenBucket:
    """Blocking token bucket; refills at `rate` tokens per second."""

    def __init__(self, rate: float, capacity: Optional[float] = None, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ConfigError("rate limit must be positive")
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._stamp = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class RemoteBackend:
    """Talks to a chat-completion endpoint, one HTTP round-trip per call.

    Transport failures and retryable statuses are retried with exponential
    backoff up to `max_retries` extra attempts; a malformed response body is
    a permanent error. The bearer token is read from `api_key_env` at call
    time so credentials never land in configs or manifests.
    """

    name = "remote"

    def __init__(
        self,
        base_url: str,
        api_key_env: str = "QDGEN_API_KEY",
        requests_per_second: Optional[float] = None,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        timeout: float = 60.0,
        transport: Optional[Callable] = None,
        sleep=time.sleep,
    ):
        if not base_url:
            raise ConfigError("remote backend requires a base_url")
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._bucket = TokenBucket(requests_per_second) if requests_per_second else None
        self._transport = transport or self._requests_transport
        self._sleep = sleep
        self._local = threading.local()

    def identity(self) -> dict:
        return {"backend": self.name, "base_url": self.base_url}

    def _requests_transport(self, url: str, headers: dict, body: dict, timeout: float):
        import requests

        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        try:
            response = session.post(url, headers=headers, json=body, timeout=timeout)
        except requests.RequestException as exc:
            raise ConnectionError(str(exc)) from exc
        try:
            payload = response.json()
        except ValueError:
            payload = None
        return response.status_code, payload

    def complete(self, role: RoleConfig, prompt: str, substream_seed: int) -> str:
        if not role.model:
            raise ConfigError(f"role {role.role!r} has no remote model configured")
        body = {
            "model": role.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": role.decode.temperature,
            "max_tokens": role.decode.max_tokens,
            # Endpoints that honor a seed get reproducibility for free;
            # others silently ignore the field.
            "seed": substream_seed & 0x7FFFFFFF,
        }
        if role.decode.stop:
            body["stop"] = list(role.decode.stop)
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        url = f"{self.base_url}/chat/completions"

        attempts = 0
        last_error = "transport failure"
        while attempts <= self.max_retries:
            if self._bucket is not None:
                self._bucket.acquire()
            attempts += 1
            try:
                status, payload = self._transport(url, headers, body, self.timeout)
            except ConnectionError as exc:
                last_error = str(exc)
                status, payload = None, None
            else:
                if status is not None and status not in _RETRYABLE_STATUS and status != 200:
                    raise PermanentBackendError(
                        f"endpoint returned status {status}", role=role.role, attempts=attempts
                    )
                if status == 200:
                    return self._extract_text(payload, role.role, attempts)
                last_error = f"status {status}"
            if attempts <= self.max_retries:
                delay = self.backoff_base * (2 ** (attempts - 1))
                logger.debug("retrying %s after %s (%.2fs)", role.role, last_error, delay)
                self._sleep(delay)
        raise TransportError(last_error, role=role.role, attempts=attempts)

    @staticmethod
    def _extract_text(payload, role_name: str, attempts: int) -> str:
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise PermanentBackendError(
                "response body missing choices[0].message.content",
                role=role_name,
                attempts=attempts,
            ) from None
        if not isinstance(text, str):
            raise PermanentBackendError(
                "completion content is not text", role=role_name, attempts=attempts
            )
        return text
