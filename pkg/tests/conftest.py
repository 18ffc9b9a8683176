import json
import threading

import httpx
import pytest
from fastapi.testclient import TestClient

from privgate.config import AppConfig
from privgate.gateway import create_app
from privgate.mapper import RedactionSession
from privgate.rules import default_rules
from privgate.store import SessionStore
from privgate.upstream import UpstreamTarget


@pytest.fixture(scope="session")
def rules():
    return default_rules()


@pytest.fixture
def session():
    return RedactionSession()


@pytest.fixture
def store(tmp_path):
    return SessionStore(root=tmp_path / "sessions")


class RecordingUpstream:
    """Mock chat-completion upstream: records every outbound payload.

    Behavior switches on the last user/system message content:
      - default: echoes the user message content back
      - text containing "???500???": returns HTTP 500
    Streaming requests are answered with SSE deltas split per `chunks`.
    """

    def __init__(self):
        self.requests: list[dict] = []
        self.raw_bodies: list[str] = []
        self.chunks: list[str] | None = None
        self.reply_override: str | None = None
        self.lock = threading.Lock()

    def _reply_text(self, payload: dict) -> str:
        if self.reply_override is not None:
            return self.reply_override
        users = [m["content"] for m in payload["messages"] if m["role"] == "user"]
        return users[-1] if users else ""

    def handler(self, request: httpx.Request) -> httpx.Response:
        body = request.content.decode("utf-8")
        payload = json.loads(body)
        with self.lock:
            self.raw_bodies.append(body)
            self.requests.append(payload)
        text = self._reply_text(payload)
        if "???500???" in body:
            return httpx.Response(500, json={"error": "boom"})
        if payload.get("stream"):
            chunks = self.chunks if self.chunks is not None else [text]
            sse = "".join(
                "data: " + json.dumps({"choices": [{"delta": {"content": c}}]}) + "\n\n"
                for c in chunks
            )
            sse += "data: [DONE]\n\n"
            return httpx.Response(200, content=sse, headers={"content-type": "text/event-stream"})
        return httpx.Response(
            200,
            json={"choices": [{"message": {"role": "assistant", "content": text}}]},
        )

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handler)


@pytest.fixture
def mock_upstream():
    return RecordingUpstream()


def make_config(tmp_path, **overrides) -> AppConfig:
    defaults = dict(
        store_dir=str(tmp_path / "sessions"),
        upstreams={
            "default": UpstreamTarget(
                name="default",
                base_url="http://upstream.test",
                model="test-model",
            )
        },
    )
    defaults.update(overrides)
    return AppConfig(**defaults)


@pytest.fixture
def app_config(tmp_path):
    return make_config(tmp_path)


@pytest.fixture
def client(app_config, mock_upstream):
    app = create_app(app_config, upstream_transport=mock_upstream.transport())
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c
