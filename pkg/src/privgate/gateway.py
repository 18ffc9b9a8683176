"""Loopback HTTP service exposing the redaction pipeline.

Endpoints (bit-exact schemas in docs/api.md):

    POST   /v1/detect        text -> spans
    POST   /v1/redact        text + manual spans -> secured text + replacements
    POST   /v1/rehydrate     placeholder text -> restored text + hits
    POST   /v1/files/redact  multipart upload -> redacted document summary
    POST   /v1/chat          full pipeline with upstream relay (optionally SSE)
    GET    /v1/sessions/{id} session entries for the overlay
    DELETE /v1/sessions/{id} purge one session

Every error is the envelope {"code", "message", "detail"?}. Nothing leaves the
process toward an upstream until the outbound payload passes the leakage
guard; a failing payload is refused locally.
"""

from __future__ import annotations

import json
import logging
from typing import Iterator, Literal

import httpx
from fastapi import FastAPI, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from .categories import PiiCategory, parse_category
from .config import AppConfig, ConfigError
from .detection import DetectionResult, HttpLlmBackend, RulesBackend, detect_with_backend
from .documents import format_from_filename, load_document, outbound_filename, redact_document
from .errors import (
    BackendUnavailable,
    ContractViolation,
    DocumentParseError,
    LeakageError,
    MappingConflictError,
    PrivgateError,
    RecordIntegrityError,
    RuleConfigError,
    SessionNotFound,
    SizeLimitError,
    StoreError,
    UnsupportedFormatError,
    UpstreamError,
)
from .mapper import (
    RedactionSession,
    RehydrationHit,
    SecuredPrompt,
    assert_no_leakage,
    leaking_surfaces,
    redact,
    register_manual,
    rehydrate,
)
from .rules import RuleManager
from .smokescreen import (
    SmokescreenPolicy,
    SurrogateBackend,
    SurrogatePrompt,
    deframe_response,
    make_surrogate_llm,
    make_surrogate_template,
    should_smokescreen,
)
from .spans import EntitySpan, resolve_overlaps
from .store import SessionStore
from .streaming import StreamRehydrator
from .upstream import ChatUpstream, UpstreamTarget

logger = logging.getLogger(__name__)

_LOOPBACK_HOSTS = frozenset({"127.0.0.1", "::1", "localhost", "testclient", "testserver"})


# -- wire models -----------------------------------------------------------


class ManualSpanModel(BaseModel):
    start: int
    end: int
    substitute: str | None = None
    category: str | None = None


class DetectRequest(BaseModel):
    text: str
    session_id: str | None = None


class RedactRequest(BaseModel):
    text: str
    manual_spans: list[ManualSpanModel] = Field(default_factory=list)
    session_id: str | None = None


class RehydrateRequest(BaseModel):
    text: str
    session_id: str


class ChatRequest(BaseModel):
    prompt: str
    session_id: str | None = None
    manual_spans: list[ManualSpanModel] = Field(default_factory=list)
    redaction: bool = True
    smokescreen: Literal["on", "off", "auto"] = "auto"
    upstream: str = "default"
    stream: bool = False


def span_dict(span: EntitySpan) -> dict:
    return {
        "start": span.start,
        "end": span.end,
        "surface": span.surface,
        "category": span.category.key,
        "confidence": span.confidence,
        "source": span.source,
    }


def replacement_dicts(secured: SecuredPrompt) -> list[dict]:
    return [
        {
            "source_start": r.source_start,
            "source_end": r.source_end,
            "original": r.original,
            "placeholder": r.placeholder,
            "secured_start": r.secured_start,
            "secured_end": r.secured_end,
        }
        for r in secured.replacements
    ]


def hit_dicts(hits: list[RehydrationHit]) -> list[dict]:
    return [
        {"start": h.start, "end": h.end, "placeholder": h.placeholder, "original": h.original}
        for h in hits
    ]


def surrogate_dict(surrogate: SurrogatePrompt) -> dict:
    return {
        "persona": surrogate.persona,
        "surrogate_text": surrogate.surrogate_text,
        "instruction_suffix": surrogate.instruction_suffix,
        "full_text": surrogate.full_text,
        "generator": surrogate.generator,
        "source_categories": sorted(surrogate.source_categories),
        "degraded": surrogate.degraded,
    }


# -- application state ---------------------------------------------------------


class GatewayState:
    def __init__(
        self,
        config: AppConfig,
        upstream_transport: httpx.BaseTransport | None = None,
        llm_transport: httpx.BaseTransport | None = None,
    ):
        self.config = config
        self.rules = RuleManager(config.rules_path)
        self.store = SessionStore(
            root=config.store_dir,
            memory_only=config.memory_sessions,
            purge_after_days=config.purge_after_days,
        )
        self.policy = SmokescreenPolicy(
            enabled_categories=frozenset(
                c for c in config.smokescreen_categories if not c.startswith("Custom:")
            ),
            contextual_custom_labels=frozenset(
                c[len("Custom:"):] for c in config.smokescreen_categories if c.startswith("Custom:")
            ),
        )
        self._upstream_transport = upstream_transport
        self._llm_transport = llm_transport
        self._upstreams: dict[str, ChatUpstream] = {}

        self.llm_detection: HttpLlmBackend | None = None
        self.surrogate_backend: SurrogateBackend | None = None
        if config.llm_backend is not None:
            lb = config.llm_backend
            if config.detection_backend == "llm":
                self.llm_detection = HttpLlmBackend(
                    lb.base_url, lb.model, lb.path, lb.timeout, transport=llm_transport
                )
            if config.smokescreen_generator == "llm":
                self.surrogate_backend = SurrogateBackend(
                    lb.base_url, lb.model, lb.path, lb.timeout, transport=llm_transport
                )

    def upstream(self, name: str) -> ChatUpstream:
        if name not in self._upstreams:
            target: UpstreamTarget = self.config.upstream(name)
            self._upstreams[name] = ChatUpstream(target, transport=self._upstream_transport)
        return self._upstreams[name]

    def detect(self, text: str) -> DetectionResult:
        rules_backend = RulesBackend(self.rules.current)
        if self.llm_detection is not None:
            return detect_with_backend(text, self.llm_detection, fallback=rules_backend)
        return detect_with_backend(text, rules_backend)


# -- error mapping ---------------------------------------------------------------

_ERROR_MAP: list[tuple[type, int, str]] = [
    (SessionNotFound, 404, "not_found"),
    (LeakageError, 400, "leakage_guard"),
    (SizeLimitError, 413, "too_large"),
    (UnsupportedFormatError, 415, "unsupported_format"),
    (DocumentParseError, 400, "parse_error"),
    (ContractViolation, 400, "invalid_request"),
    (MappingConflictError, 409, "mapping_conflict"),
    (RuleConfigError, 500, "rule_config"),
    (RecordIntegrityError, 500, "record_integrity"),
    (StoreError, 500, "store_error"),
    (ConfigError, 400, "config_error"),
    (UpstreamError, 502, "upstream_error"),
    (BackendUnavailable, 502, "upstream_unreachable"),
]


def error_response(exc: Exception) -> JSONResponse:
    for etype, status, code in _ERROR_MAP:
        if isinstance(exc, etype):
            detail = None
            if isinstance(exc, UpstreamError):
                detail = {"upstream_status": exc.status_code}
            if isinstance(exc, LeakageError):
                detail = {"surfaces": len(exc.surfaces)}
            body = {"code": code, "message": str(exc)}
            if detail is not None:
                body["detail"] = detail
            return JSONResponse(status_code=status, content=body)
    logger.exception("unhandled error", exc_info=exc)
    return JSONResponse(
        status_code=500, content={"code": "internal", "message": "internal error"}
    )


# -- app factory -------------------------------------------------------------------


def create_app(
    config: AppConfig | None = None,
    upstream_transport: httpx.BaseTransport | None = None,
    llm_transport: httpx.BaseTransport | None = None,
) -> FastAPI:
    state = GatewayState(config or AppConfig(), upstream_transport, llm_transport)
    app = FastAPI(title="privgate", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.gateway = state

    @app.middleware("http")
    async def loopback_guard(request: Request, call_next):
        client = request.client
        if (
            not state.config.allow_remote
            and client is not None
            and client.host not in _LOOPBACK_HOSTS
        ):
            return JSONResponse(
                status_code=403,
                content={"code": "forbidden", "message": "loopback clients only"},
            )
        return await call_next(request)

    @app.exception_handler(PrivgateError)
    async def domain_error_handler(_req: Request, exc: PrivgateError):
        return error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_req: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "invalid_request", "message": "malformed request body",
                     "detail": exc.errors()},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    # -- helpers ------------------------------------------------------------

    def check_text_size(text: str) -> None:
        if len(text.encode("utf-8")) > state.config.max_text_bytes:
            raise SizeLimitError(
                f"text exceeds the {state.config.max_text_bytes}-byte cap"
            )

    def acquire_session(session_id: str | None):
        """Lock first, then load, so concurrent requests never see stale state.

        Returns (session, lock) with the lock held; the caller releases it.
        A fresh session is created outside its lock (its id is unknown to
        anyone else until the response goes out).
        """
        if session_id:
            lock = state.store.lock(session_id)
            lock.acquire()
            try:
                return state.store.load(session_id), lock
            except BaseException:
                lock.release()
                raise
        session = state.store.create()
        lock = state.store.lock(session.session_id)
        lock.acquire()
        return session, lock

    def manual_entity_spans(
        text: str, session: RedactionSession, models: list[ManualSpanModel]
    ) -> list[EntitySpan]:
        spans = []
        for m in models:
            category = None
            if m.category:
                try:
                    category = parse_category(m.category)
                except ValueError as exc:
                    raise ContractViolation(f"unknown category {m.category!r}") from exc
            try:
                spans.append(
                    register_manual(session, text, m.start, m.end, m.substitute, category)
                )
            except ValueError as exc:
                raise ContractViolation(str(exc)) from exc
        return spans

    def guard_outbound(payload: dict, session: RedactionSession) -> None:
        serialized = json.dumps(payload, ensure_ascii=False)
        leaks = leaking_surfaces(serialized, session.originals())
        if leaks:
            raise LeakageError(
                "outbound payload failed the leakage guard; request refused locally",
                leaks,
            )

    # -- endpoints -----------------------------------------------------------

    @app.post("/v1/detect")
    def detect_endpoint(req: DetectRequest):
        check_text_size(req.text)
        result = state.detect(req.text)
        return {
            "spans": [span_dict(s) for s in result.spans],
            "backend": result.backend,
            "degraded": result.degraded,
        }

    @app.post("/v1/redact")
    def redact_endpoint(req: RedactRequest):
        check_text_size(req.text)
        session, lock = acquire_session(req.session_id)
        try:
            auto = state.detect(req.text)
            manual = manual_entity_spans(req.text, session, req.manual_spans)
            spans = resolve_overlaps(auto.spans + manual)
            secured = redact(req.text, spans, session)
            assert_no_leakage(secured.secured_text, session)
            state.store.save(session)
        finally:
            lock.release()
        return {
            "session_id": session.session_id,
            "secured_text": secured.secured_text,
            "replacements": replacement_dicts(secured),
            "spans": [span_dict(s) for s in spans],
            "degraded": auto.degraded,
        }

    @app.post("/v1/rehydrate")
    def rehydrate_endpoint(req: RehydrateRequest):
        check_text_size(req.text)
        session, lock = acquire_session(req.session_id)
        try:
            restored, hits = rehydrate(req.text, session)
        finally:
            lock.release()
        return {"restored": restored, "hits": hit_dicts(hits)}

    @app.post("/v1/files/redact")
    async def files_redact_endpoint(
        file: UploadFile,
        session_id: str | None = Form(None),
        manual_regions: str | None = Form(None),
    ):
        data = await file.read()
        if len(data) > state.config.max_file_bytes:
            raise SizeLimitError(
                f"file exceeds the {state.config.max_file_bytes}-byte cap"
            )
        regions: list[tuple[int, int, str | None]] = []
        if manual_regions:
            try:
                raw = json.loads(manual_regions)
                regions = [
                    (int(r["start"]), int(r["end"]), r.get("substitute")) for r in raw
                ]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ContractViolation(f"bad manual_regions: {exc}") from exc
        fmt = format_from_filename(file.filename or "upload.txt")
        doc = load_document(data, fmt)
        session, lock = acquire_session(session_id)
        try:
            redacted = redact_document(doc, session, state.rules.current, regions)
            assert_no_leakage(redacted.secured_text, session)
            state.store.save(session)
        finally:
            lock.release()
        return {
            "session_id": session.session_id,
            "filename": file.filename,
            "outbound_filename": outbound_filename(file.filename or "upload.txt"),
            "original_format": redacted.original_format,
            "outbound_format": redacted.outbound_format,
            "extracted_text": redacted.extracted_text,
            "extraction_map": [list(a) for a in redacted.extraction_map],
            "spans": [span_dict(s) for s in redacted.spans],
            "secured_text": redacted.secured_text,
            "replacements": replacement_dicts(redacted.secured),
        }

    @app.post("/v1/chat")
    def chat_endpoint(req: ChatRequest):
        check_text_size(req.prompt)
        upstream = state.upstream(req.upstream)
        session, lock = acquire_session(req.session_id)
        held = True
        try:
            degraded: dict[str, bool] = {}
            spans: list[EntitySpan] = []
            auto_degraded = False

            need_detection = req.redaction or req.smokescreen in ("on", "auto")
            if need_detection:
                auto = state.detect(req.prompt)
                auto_degraded = auto.degraded
                manual = manual_entity_spans(req.prompt, session, req.manual_spans)
                spans = resolve_overlaps(auto.spans + manual)
            if auto_degraded:
                degraded["detection"] = True

            if req.redaction:
                secured = redact(req.prompt, spans, session)
                secured_text = secured.secured_text
                replacements = replacement_dicts(secured)
            else:
                secured_text = req.prompt
                replacements = []

            surrogate: SurrogatePrompt | None = None
            wants_smokescreen = req.smokescreen == "on" or (
                req.smokescreen == "auto" and should_smokescreen(spans, state.policy)
            )
            if wants_smokescreen:
                triggered = frozenset(
                    s.category.key for s in spans if state.policy.triggers(s.category)
                )
                source = secured_text if state.config.smokescreen_compose else req.prompt
                if state.surrogate_backend is not None:
                    surrogate = make_surrogate_llm(
                        source, session, state.surrogate_backend, triggered
                    )
                else:
                    surrogate = make_surrogate_template(source, session, triggered)
                if surrogate.degraded:
                    degraded["smokescreen"] = True
                messages = [
                    {"role": "system", "content": surrogate.surrogate_text},
                    {"role": "user", "content": surrogate.instruction_suffix},
                ]
            else:
                messages = [{"role": "user", "content": secured_text}]

            payload = upstream.build_payload(messages, stream=req.stream)
            guard_outbound(payload, session)

            base_response = {
                "session_id": session.session_id,
                "secured_text": secured_text,
                "replacements": replacements,
                "spans": [span_dict(s) for s in spans],
                "surrogate": surrogate_dict(surrogate) if surrogate else None,
                "degraded": degraded,
            }

            if req.stream:
                opened = upstream.open_stream(messages)
                persona = surrogate.persona if surrogate else None
                generator = _sse_relay(state, session, opened, persona, base_response)
                held = False  # the generator releases the lock when done
                return StreamingResponse(
                    _locked_generator(generator, lock), media_type="text/event-stream"
                )

            raw = upstream.complete(messages)
            visible = deframe_response(raw, surrogate.persona) if surrogate else raw
            restored, hits = rehydrate(visible, session)
            state.store.save(session)
            base_response["reply"] = {
                "raw": raw,
                "restored": restored,
                "hits": hit_dicts(hits),
            }
            return base_response
        finally:
            if held:
                lock.release()

    @app.get("/v1/sessions/{session_id}")
    def session_show(session_id: str):
        session = state.store.load(session_id)
        return {
            "session_id": session.session_id,
            "turn": session.turn,
            "entries": [
                {
                    "placeholder": e.placeholder,
                    "original": e.original,
                    "category": e.category.key,
                    "origin": e.origin,
                    "allocated_turn": e.allocated_turn,
                }
                for e in session.entries
            ],
        }

    @app.delete("/v1/sessions/{session_id}")
    def session_purge(session_id: str):
        if not state.store.exists(session_id):
            raise SessionNotFound(f"no session {session_id!r}")
        state.store.purge(session_id)
        return {"purged": session_id}

    return app


def _sse_event(data: dict) -> str:
    return f"data: {json.dumps(data, ensure_ascii=False)}\n\n"


def _locked_generator(generator: Iterator[str], lock) -> Iterator[str]:
    try:
        yield from generator
    finally:
        lock.release()


def _sse_relay(
    state: GatewayState,
    session: RedactionSession,
    opened,
    persona: str | None,
    base_response: dict,
) -> Iterator[str]:
    """Rehydrate upstream deltas on the fly; smokescreened replies are buffered
    whole so deframing never splits across chunk boundaries."""
    rehydrator = StreamRehydrator.for_session(session)
    try:
        if persona is not None:
            raw = "".join(opened)
            visible = deframe_response(raw, persona)
            restored, hits = rehydrate(visible, session)
            if restored:
                yield _sse_event({"delta": restored})
            state.store.save(session)
            yield _sse_event(
                {"done": True, "session_id": session.session_id, "hits": hit_dicts(hits)}
            )
            return
        for delta in opened:
            out = rehydrator.feed(delta)
            if out:
                yield _sse_event({"delta": out})
        tail = rehydrator.flush()
        if tail:
            yield _sse_event({"delta": tail})
        state.store.save(session)
        yield _sse_event(
            {
                "done": True,
                "session_id": session.session_id,
                "hits": hit_dicts(rehydrator.hits),
            }
        )
    except (UpstreamError, BackendUnavailable) as exc:
        # Headers are already out; abort by flushing the held suffix verbatim.
        tail = rehydrator.held_back
        if tail:
            yield _sse_event({"delta": tail})
        yield _sse_event({"error": {"code": "upstream_error", "message": str(exc)}})
    finally:
        opened.close()
