"""OpenAI-style chat-completions client and the remote model backend."""

from __future__ import annotations

import base64
import logging
import os
import time
from dataclasses import dataclass
from typing import Any, Callable

import httpx

from ..clock import Clock
from ..errors import BackendTimeout, BackendUnavailable, ConfigError, MalformedReply
from ..stream import Frame
from .base import InferenceRequest, InferenceResult

logger = logging.getLogger(__name__)

MAX_RETRIES = 2
BACKOFF_BASE = 0.5


@dataclass(frozen=True)
class RemoteConfig:
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 120.0
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.base_url:
            raise ConfigError("remote backend needs a base_url")
        if not self.model:
            raise ConfigError("remote backend needs a model id")
        if self.timeout <= 0:
            raise ConfigError(f"timeout must be > 0, got {self.timeout}")


def _sniff_mime(payload: bytes) -> str:
    if payload.startswith(b"\x89PNG\r\n\x1a\n"):
        return "image/png"
    if payload.startswith(b"\xff\xd8\xff"):
        return "image/jpeg"
    if payload[:6] in (b"GIF87a", b"GIF89a"):
        return "image/gif"
    if payload[:4] == b"RIFF" and payload[8:12] == b"WEBP":
        return "image/webp"
    return "application/octet-stream"


def frame_to_part(frame: Frame) -> dict[str, Any]:
    data = base64.b64encode(frame.payload).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:{_sniff_mime(frame.payload)};base64,{data}"}}


def extract_text(reply: Any) -> str:
    """Pull the assistant text out of a chat-completions reply body."""
    try:
        choices = reply["choices"]
        if not choices:
            raise MalformedReply("reply has an empty choices array")
        content = choices[0]["message"]["content"]
    except (KeyError, TypeError, IndexError) as exc:
        raise MalformedReply(f"reply lacks message content: {exc!r}") from None
    if isinstance(content, list):
        parts = [p.get("text", "") for p in content if isinstance(p, dict) and p.get("type") == "text"]
        if not parts:
            raise MalformedReply("reply content has no text parts")
        return "".join(parts)
    if not isinstance(content, str):
        raise MalformedReply(f"reply content is {type(content).__name__}, not text")
    return content


class ChatClient:
    """Minimal chat-completions client with bounded retries.

    Connection errors and 5xx responses are retried ``MAX_RETRIES`` times with
    exponential backoff; other HTTP errors fail immediately.
    """

    def __init__(
        self,
        cfg: RemoteConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(cfg.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            base_url=cfg.base_url.rstrip("/"), headers=headers, timeout=cfg.timeout, transport=transport
        )
        self.requests_sent = 0
        self.retries = 0

    def close(self) -> None:
        self._client.close()

    def complete(self, body: dict[str, Any]) -> str:
        last_error: Exception | None = None
        for attempt in range(MAX_RETRIES + 1):
            if attempt:
                self.retries += 1
                self._sleep(BACKOFF_BASE * 2 ** (attempt - 1))
            self.requests_sent += 1
            try:
                resp = self._client.post("/chat/completions", json=body)
            except httpx.TimeoutException as exc:
                raise BackendTimeout(f"{self.cfg.model}: request timed out after {self.cfg.timeout}s") from exc
            except httpx.TransportError as exc:
                logger.warning("chat request failed (%s), attempt %d", exc, attempt + 1)
                last_error = exc
                continue
            if resp.status_code >= 500:
                logger.warning("chat request got HTTP %d, attempt %d", resp.status_code, attempt + 1)
                last_error = BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                payload = resp.json()
            except ValueError:
                raise MalformedReply("reply body is not JSON") from None
            return extract_text(payload)
        raise BackendUnavailable(f"{self.cfg.model}: giving up after {MAX_RETRIES} retries: {last_error}")


class RemoteBackend:
    is_remote = True

    def __init__(self, cfg: RemoteConfig, transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        self.cfg = cfg
        self.backend_id = f"remote:{cfg.model}"
        self.client = ChatClient(cfg, transport=transport, sleep=sleep)
        self.generate_calls = 0

    def build_body(self, req: InferenceRequest) -> dict[str, Any]:
        content: list[dict[str, Any]] = [{"type": "text", "text": req.prompt}]
        content.extend(frame_to_part(f) for f in req.context)
        body: dict[str, Any] = {"model": self.cfg.model, "messages": [{"role": "user", "content": content}]}
        if self.cfg.max_tokens is not None:
            body["max_tokens"] = self.cfg.max_tokens
        return body

    def generate(self, req: InferenceRequest, clock: Clock) -> InferenceResult:
        if clock.is_virtual:
            raise ConfigError("remote backends cannot run on a virtual clock")
        self.generate_calls += 1
        t0 = time.perf_counter()
        text = self.client.complete(self.build_body(req))
        return InferenceResult(text.strip(), latency=time.perf_counter() - t0, token_count=len(text.split()))
