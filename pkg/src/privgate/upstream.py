"""Generic chat-completion upstream client.

Speaks the common JSON wire format (messages in, choices out, SSE deltas when
streaming) against a configurable base URL, path, and model. The auth header
value comes from configuration only; it never originates from a browser.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterator

import httpx

from .errors import BackendUnavailable, UpstreamError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UpstreamTarget:
    name: str
    base_url: str
    model: str
    path: str = "/v1/chat/completions"
    authorization: str = ""
    timeout: float = 30.0


class ChatUpstream:
    """HTTP client for one upstream target."""

    def __init__(self, target: UpstreamTarget, transport: httpx.BaseTransport | None = None):
        self.target = target
        headers = {}
        if target.authorization:
            headers["Authorization"] = target.authorization
        self._client = httpx.Client(
            base_url=target.base_url,
            headers=headers,
            timeout=target.timeout,
            transport=transport,
        )

    def build_payload(self, messages: list[dict], stream: bool = False) -> dict:
        payload = {"model": self.target.model, "messages": messages}
        if stream:
            payload["stream"] = True
        return payload

    def complete(self, messages: list[dict]) -> str:
        """Non-streaming completion; returns the assistant message content."""
        payload = self.build_payload(messages)
        try:
            response = self._client.post(self.target.path, json=payload)
        except httpx.TransportError as exc:
            raise BackendUnavailable(f"upstream {self.target.name}: {exc}") from exc
        if response.status_code >= 400:
            raise UpstreamError(response.status_code, response.text)
        try:
            return response.json()["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise UpstreamError(502, f"malformed upstream reply: {exc}") from exc

    def open_stream(self, messages: list[dict]) -> "UpstreamStream":
        """Start a streaming completion; raises before any delta is consumed."""
        payload = self.build_payload(messages, stream=True)
        cm = self._client.stream("POST", self.target.path, json=payload)
        try:
            response = cm.__enter__()
        except httpx.TransportError as exc:
            raise BackendUnavailable(f"upstream {self.target.name}: {exc}") from exc
        if response.status_code >= 400:
            response.read()
            body = response.text
            cm.__exit__(None, None, None)
            raise UpstreamError(response.status_code, body)
        return UpstreamStream(cm, response, self.target.name)


class UpstreamStream:
    """Iterator over streamed content deltas; close() releases the connection."""

    def __init__(self, cm, response: httpx.Response, name: str):
        self._cm = cm
        self._response = response
        self._name = name

    def __iter__(self) -> Iterator[str]:
        try:
            for line in self._response.iter_lines():
                delta = parse_sse_delta(line)
                if delta:
                    yield delta
        except httpx.TransportError as exc:
            raise BackendUnavailable(f"upstream {self._name}: {exc}") from exc

    def close(self) -> None:
        self._cm.__exit__(None, None, None)


def parse_sse_delta(line: str) -> str:
    """Content delta carried by one SSE line, or '' for anything else."""
    line = line.strip()
    if not line.startswith("data:"):
        return ""
    data = line[len("data:"):].strip()
    if not data or data == "[DONE]":
        return ""
    try:
        event = json.loads(data)
    except json.JSONDecodeError:
        return ""
    try:
        choices = event.get("choices") or []
        if not choices:
            return ""
        delta = choices[0].get("delta") or {}
        return delta.get("content") or ""
    except AttributeError:
        return ""
