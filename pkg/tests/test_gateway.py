import json

import httpx
import pytest
from fastapi.testclient import TestClient

from privgate.config import AppConfig
from privgate.gateway import create_app
from privgate.upstream import UpstreamTarget

from conftest import make_config


class TestDetectEndpoint:
    def test_empty_text(self, client):
        r = client.post("/v1/detect", json={"text": ""})
        assert r.status_code == 200
        assert r.json()["spans"] == []

    def test_email_and_phone_over_the_wire(self, client):
        text = "Reach me at alice@example.com or 617-555-0142."
        r = client.post("/v1/detect", json={"text": text})
        spans = r.json()["spans"]
        got = {(s["start"], s["surface"], s["category"]) for s in spans}
        assert got == {
            (text.index("alice@example.com"), "alice@example.com", "Email"),
            (text.index("617-555-0142"), "617-555-0142", "PhoneNumber"),
        }

    def test_malformed_body_is_400_envelope(self, client):
        r = client.post("/v1/detect", json={"nope": 1})
        assert r.status_code == 400
        body = r.json()
        assert body["code"] == "invalid_request" and "message" in body

    def test_offsets_count_scalar_values_on_the_wire(self, client):
        # One emoji is one scalar; the UI depends on this convention.
        text = "🎉🎉 mail alice@example.com now"
        r = client.post("/v1/detect", json={"text": text})
        span = r.json()["spans"][0]
        scalars = list(text)
        assert "".join(scalars[span["start"]:span["end"]]) == "alice@example.com"
        assert span["start"] == 8  # not 10, which UTF-16 indexing would give


class TestRedactEndpoint:
    def test_redact_creates_session_and_replacements(self, client):
        r = client.post("/v1/redact", json={"text": "I study at MIT"})
        body = r.json()
        assert body["secured_text"] == "I study at School A"
        assert body["session_id"]
        rep = body["replacements"][0]
        assert rep["original"] == "MIT" and rep["placeholder"] == "School A"
        assert body["secured_text"][rep["secured_start"]:rep["secured_end"]] == "School A"

    def test_manual_span_with_substitute(self, client):
        r = client.post(
            "/v1/redact",
            json={
                "text": "Project Orion ships in May",
                "manual_spans": [{"start": 0, "end": 13, "substitute": "the project"}],
            },
        )
        assert r.json()["secured_text"] == "the project ships in May"

    def test_session_consistency_across_calls(self, client):
        first = client.post("/v1/redact", json={"text": "ask John Smith"}).json()
        sid = first["session_id"]
        second = client.post(
            "/v1/redact", json={"text": "John Smith again", "session_id": sid}
        ).json()
        assert "Person A" in first["secured_text"]
        assert "Person A" in second["secured_text"]

    def test_unknown_session_404(self, client):
        r = client.post("/v1/redact", json={"text": "x", "session_id": "missing-session-id"})
        assert r.status_code == 404
        assert r.json()["code"] == "not_found"


class TestRehydrateEndpoint:
    def test_round_trip_over_the_wire(self, client):
        secured = client.post("/v1/redact", json={"text": "ask John Smith"}).json()
        sid = secured["session_id"]
        r = client.post(
            "/v1/rehydrate",
            json={"text": "Dear Person A, hello.", "session_id": sid},
        )
        body = r.json()
        assert body["restored"] == "Dear John Smith, hello."
        assert body["hits"] == [
            {"start": 5, "end": 15, "placeholder": "Person A", "original": "John Smith"}
        ]


class TestFilesEndpoint:
    def test_rtf_in_txt_out(self, client):
        data = b"{\\rtf1 Contact John Smith \\par at MIT.}"
        r = client.post(
            "/v1/files/redact",
            files={"file": ("letter.rtf", data, "application/rtf")},
        )
        body = r.json()
        assert body["original_format"] == "rtf"
        assert body["outbound_format"] == "plain"
        assert body["outbound_filename"] == "letter.txt"
        assert "John Smith" not in body["secured_text"]
        assert "Person A" in body["secured_text"]

    def test_manual_regions_form_field(self, client):
        r = client.post(
            "/v1/files/redact",
            files={"file": ("notes.txt", b"keep the launch code safe", "text/plain")},
            data={"manual_regions": json.dumps([{"start": 9, "end": 24, "substitute": ""}])},
        )
        assert r.json()["secured_text"] == "keep the e"

    def test_unsupported_format_415(self, client):
        r = client.post("/v1/files/redact", files={"file": ("scan.pdf", b"%PDF", "application/pdf")})
        assert r.status_code == 415
        assert r.json()["code"] == "unsupported_format"

    def test_oversized_file_413(self, tmp_path, mock_upstream):
        config = make_config(tmp_path, max_file_bytes=10)
        app = create_app(config, upstream_transport=mock_upstream.transport())
        with TestClient(app, raise_server_exceptions=False) as client:
            r = client.post(
                "/v1/files/redact",
                files={"file": ("big.txt", b"x" * 11, "text/plain")},
            )
        assert r.status_code == 413


class TestChatPipeline:
    def test_end_to_end_echo_never_leaks(self, client, mock_upstream):
        r = client.post(
            "/v1/chat",
            json={"prompt": "My name is John Smith", "smokescreen": "off"},
        )
        body = r.json()
        # The upstream saw only the placeholder.
        assert len(mock_upstream.raw_bodies) == 1
        assert "Person A" in mock_upstream.raw_bodies[0]
        assert "John Smith" not in mock_upstream.raw_bodies[0]
        # The user sees the original again.
        assert body["reply"]["raw"] == "My name is Person A"
        assert body["reply"]["restored"] == "My name is John Smith"
        assert body["reply"]["hits"][0]["original"] == "John Smith"

    def test_passthrough_when_everything_off(self, client, mock_upstream):
        prompt = "Relay this exactly: nothing personal."
        r = client.post(
            "/v1/chat",
            json={"prompt": prompt, "redaction": False, "smokescreen": "off"},
        )
        sent = json.loads(mock_upstream.raw_bodies[-1])
        assert sent["messages"] == [{"role": "user", "content": prompt}]
        assert r.json()["reply"]["raw"] == prompt

    def test_upstream_5xx_maps_to_error_envelope(self, client, mock_upstream):
        r = client.post(
            "/v1/chat",
            json={"prompt": "please ???500??? now", "smokescreen": "off", "redaction": False},
        )
        assert r.status_code == 502
        body = r.json()
        assert body["code"] == "upstream_error"
        assert body["detail"]["upstream_status"] == 500

    def test_failed_relay_leaves_session_unchanged(self, client, mock_upstream):
        sid = client.post("/v1/redact", json={"text": "hello there"}).json()["session_id"]
        before = client.get(f"/v1/sessions/{sid}").json()
        r = client.post(
            "/v1/chat",
            json={
                "prompt": "ask ???500??? for Mary Jones",
                "session_id": sid,
                "smokescreen": "off",
            },
        )
        assert r.status_code == 502
        after = client.get(f"/v1/sessions/{sid}").json()
        assert after == before

    def test_smokescreen_auto_triggers_on_contextual(self, client, mock_upstream):
        r = client.post("/v1/chat", json={"prompt": "I feel exhausted and low"})
        body = r.json()
        assert body["surrogate"] is not None
        assert body["surrogate"]["persona"] == "Kevin"
        sent = json.loads(mock_upstream.raw_bodies[-1])
        assert sent["messages"][0]["role"] == "system"
        assert "My friend Kevin" in sent["messages"][0]["content"]
        assert sent["messages"][1]["content"].startswith("Please generate advice")

    def test_smokescreen_response_deframed(self, client, mock_upstream):
        mock_upstream.reply_override = "Kevin should try a consistent sleep schedule."
        r = client.post("/v1/chat", json={"prompt": "I feel exhausted and low"})
        assert r.json()["reply"]["restored"] == "You should try a consistent sleep schedule."

    def test_smokescreen_off_for_plain_prompt(self, client):
        r = client.post("/v1/chat", json={"prompt": "What is a monad?"})
        assert r.json()["surrogate"] is None

    def test_unknown_upstream_name_is_config_error(self, client):
        r = client.post("/v1/chat", json={"prompt": "hi", "upstream": "nowhere"})
        assert r.status_code == 400
        assert r.json()["code"] == "config_error"

    def test_leakage_guard_refuses_sabotaged_payload(self, client, mock_upstream):
        # Teach the session a name, then force a passthrough containing it:
        # the guard must refuse before anything reaches the upstream.
        sid = client.post("/v1/redact", json={"text": "ask John Smith"}).json()["session_id"]
        sent_before = len(mock_upstream.raw_bodies)
        r = client.post(
            "/v1/chat",
            json={
                "prompt": "say John Smith verbatim",
                "session_id": sid,
                "redaction": False,
                "smokescreen": "off",
            },
        )
        assert r.status_code == 400
        assert r.json()["code"] == "leakage_guard"
        assert len(mock_upstream.raw_bodies) == sent_before  # nothing was sent


class TestChatStreaming:
    def test_streamed_chunks_rehydrated(self, client, mock_upstream):
        mock_upstream.chunks = ["Dear Per", "son A, welcome ", "back!"]
        mock_upstream.reply_override = ""
        sid = client.post("/v1/redact", json={"text": "I am John Smith"}).json()["session_id"]
        with client.stream(
            "POST",
            "/v1/chat",
            json={"prompt": "greet me", "session_id": sid, "smokescreen": "off",
                  "stream": True},
        ) as response:
            assert response.status_code == 200
            events = [
                json.loads(line[len("data: "):])
                for line in response.iter_lines()
                if line.startswith("data: ")
            ]
        text = "".join(e.get("delta", "") for e in events)
        assert text == "Dear John Smith, welcome back!"
        done = events[-1]
        assert done["done"] is True
        assert done["hits"][0]["original"] == "John Smith"

    def test_streamed_equals_buffered_for_every_split(self, client, mock_upstream):
        sid = client.post("/v1/redact", json={"text": "I am John Smith"}).json()["session_id"]
        reply = "Person A met Person A at Person A's desk."
        expected = reply.replace("Person A", "John Smith")
        for cut in range(len(reply) + 1):
            mock_upstream.chunks = [reply[:cut], reply[cut:]]
            with client.stream(
                "POST",
                "/v1/chat",
                json={"prompt": "go", "session_id": sid, "smokescreen": "off", "stream": True},
            ) as response:
                events = [
                    json.loads(line[len("data: "):])
                    for line in response.iter_lines()
                    if line.startswith("data: ")
                ]
            text = "".join(e.get("delta", "") for e in events)
            assert text == expected, f"cut at {cut}"


class TestSessionAdmin:
    def test_show_entries_for_overlay(self, client):
        sid = client.post("/v1/redact", json={"text": "ask John Smith"}).json()["session_id"]
        body = client.get(f"/v1/sessions/{sid}").json()
        assert body["entries"] == [
            {
                "placeholder": "Person A",
                "original": "John Smith",
                "category": "PersonName",
                "origin": "auto",
                "allocated_turn": 0,
            }
        ]

    def test_delete_purges(self, client):
        sid = client.post("/v1/redact", json={"text": "ask John Smith"}).json()["session_id"]
        assert client.delete(f"/v1/sessions/{sid}").json() == {"purged": sid}
        assert client.get(f"/v1/sessions/{sid}").status_code == 404

    def test_delete_unknown_404(self, client):
        assert client.delete("/v1/sessions/who").status_code == 404


class TestLoopbackGuard:
    def test_non_loopback_client_refused(self, app_config, mock_upstream):
        app = create_app(app_config, upstream_transport=mock_upstream.transport())
        client = TestClient(
            app, raise_server_exceptions=False, client=("203.0.113.9", 4242)
        )
        r = client.get("/healthz")
        assert r.status_code == 403
        assert r.json()["code"] == "forbidden"

    def test_allow_remote_opens_up(self, tmp_path, mock_upstream):
        config = make_config(tmp_path, allow_remote=True)
        app = create_app(config, upstream_transport=mock_upstream.transport())
        client = TestClient(
            app, raise_server_exceptions=False, client=("203.0.113.9", 4242)
        )
        assert client.get("/healthz").status_code == 200


class TestSessionConcurrency:
    def test_parallel_redacts_never_share_a_placeholder(self, client):
        # Per-session serialization: the session must be loaded under its
        # lock, or two requests can both mint "Person A" for different names.
        import concurrent.futures

        sid = client.post("/v1/redact", json={"text": "warm up"}).json()["session_id"]
        names = [f"Zara{i} Quorn{i}" for i in range(8)]

        def redact_one(name: str) -> dict:
            body = client.post(
                "/v1/redact",
                json={
                    "text": f"call {name}",
                    "session_id": sid,
                    "manual_spans": [{"start": 5, "end": 5 + len(name)}],
                },
            ).json()
            return {r["placeholder"]: r["original"] for r in body["replacements"]}

        with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
            maps = list(pool.map(redact_one, names))

        combined: dict[str, str] = {}
        for m in maps:
            for placeholder, original in m.items():
                assert combined.setdefault(placeholder, original) == original, (
                    f"{placeholder} handed to two different originals"
                )
        # The persisted session holds one entry per distinct name.
        entries = client.get(f"/v1/sessions/{sid}").json()["entries"]
        stored = {e["original"] for e in entries}
        assert stored.issuperset(set(names))


class TestDegradedDetection:
    def test_llm_detection_unreachable_flags_degraded(self, tmp_path, mock_upstream):
        from privgate.config import LlmBackendConfig

        def dead(request):
            raise httpx.ConnectError("nobody home")

        config = make_config(
            tmp_path,
            detection_backend="llm",
            llm_backend=LlmBackendConfig(base_url="http://llm.test", model="m"),
        )
        app = create_app(
            config,
            upstream_transport=mock_upstream.transport(),
            llm_transport=httpx.MockTransport(dead),
        )
        with TestClient(app, raise_server_exceptions=False) as client:
            r = client.post("/v1/detect", json={"text": "Call 617-555-0142"})
            body = r.json()
        assert body["degraded"] is True
        assert body["backend"] == "rules"
        assert body["spans"][0]["category"] == "PhoneNumber"
