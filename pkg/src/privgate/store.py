"""Durable per-session persistence for redaction state.

One record file per session under a data directory. A record is a version
header line followed by one line of canonical JSON (sorted keys, compact
separators, UTF-8): re-encoding a decoded record reproduces the bytes exactly.
Saves are atomic (temp file + rename) and record files are chmod 0600 where
the platform supports it. A memory-only mode keeps everything off disk.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .categories import parse_category
from .errors import RecordIntegrityError, SessionNotFound, StoreError
from .mapper import PlaceholderEntry, RedactionSession

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
HEADER = f"privgate-session/{SCHEMA_VERSION}"
RECORD_SUFFIX = ".session"


def default_store_dir() -> Path:
    """Per-user application data directory for session records."""
    if os.name == "nt":
        base = Path(os.environ.get("APPDATA", Path.home() / "AppData" / "Roaming"))
    else:
        base = Path(os.environ.get("XDG_DATA_HOME", Path.home() / ".local" / "share"))
    return base / "privgate" / "sessions"


def _now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass
class StoreRecord:
    session_id: str
    created_at: str
    updated_at: str
    schema_version: int
    payload: dict


def session_to_payload(session: RedactionSession) -> dict:
    return {
        "counters": dict(sorted(session.counters.items())),
        "entries": [
            {
                "allocated_turn": e.allocated_turn,
                "category": e.category.key,
                "origin": e.origin,
                "original": e.original,
                "placeholder": e.placeholder,
            }
            for e in session.entries
        ],
        "seen_source_digests": sorted(session.collision_digests),
        "turn": session.turn,
    }


def payload_to_session(session_id: str, payload: dict) -> RedactionSession:
    session = RedactionSession(session_id)
    try:
        session.turn = int(payload["turn"])
        session.counters = {str(k): int(v) for k, v in payload["counters"].items()}
        session.collision_digests = set(payload["seen_source_digests"])
        for item in payload["entries"]:
            session.entries.append(
                PlaceholderEntry(
                    placeholder=item["placeholder"],
                    original=item["original"],
                    category=parse_category(item["category"]),
                    allocated_turn=int(item["allocated_turn"]),
                    origin=item["origin"],
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordIntegrityError(f"malformed session payload: {exc}") from exc
    session.rebuild_indexes()
    return session


def encode_record(record: StoreRecord) -> bytes:
    body = {
        "created_at": record.created_at,
        "payload": record.payload,
        "schema_version": record.schema_version,
        "session_id": record.session_id,
        "updated_at": record.updated_at,
    }
    line = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return f"{HEADER}\n{line}\n".encode("utf-8")


def decode_record(data: bytes) -> StoreRecord:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise RecordIntegrityError(f"record is not UTF-8: {exc}") from exc
    lines = text.split("\n")
    if len(lines) < 2 or lines[0] != HEADER:
        raise RecordIntegrityError(f"bad or missing record header (expected {HEADER!r})")
    try:
        body = json.loads(lines[1])
    except json.JSONDecodeError as exc:
        raise RecordIntegrityError(f"record body is not valid JSON: {exc}") from exc
    try:
        if int(body["schema_version"]) != SCHEMA_VERSION:
            raise RecordIntegrityError(
                f"unsupported schema version {body['schema_version']}"
            )
        return StoreRecord(
            session_id=body["session_id"],
            created_at=body["created_at"],
            updated_at=body["updated_at"],
            schema_version=int(body["schema_version"]),
            payload=body["payload"],
        )
    except (KeyError, TypeError) as exc:
        raise RecordIntegrityError(f"record is missing fields: {exc}") from exc


class SessionStore:
    """File-backed (or memory-only) session records with per-session locking."""

    def __init__(
        self,
        root: str | Path | None = None,
        memory_only: bool = False,
        purge_after_days: float | None = None,
    ):
        self.memory_only = memory_only
        self.root = Path(root) if root else default_store_dir()
        self._memory: dict[str, bytes] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._created: dict[str, str] = {}
        if not memory_only:
            try:
                self.root.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise StoreError(f"cannot create store directory {self.root}: {exc}") from exc
            self._restrict(self.root, 0o700)
        if purge_after_days is not None:
            self.apply_retention(purge_after_days)

    @staticmethod
    def _restrict(path: Path, mode: int) -> None:
        try:
            os.chmod(path, mode)
        except OSError:  # pragma: no cover - platform-dependent
            logger.debug("could not restrict permissions on %s", path)

    def lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    @contextmanager
    def locked(self, session_id: str):
        lock = self.lock(session_id)
        with lock:
            yield

    def _path(self, session_id: str) -> Path:
        if "/" in session_id or "\\" in session_id or session_id.startswith("."):
            raise SessionNotFound(f"invalid session id {session_id!r}")
        return self.root / f"{session_id}{RECORD_SUFFIX}"

    # -- operations -------------------------------------------------------

    def create(self) -> RedactionSession:
        session = RedactionSession()
        self.save(session)
        return session

    def save(self, session: RedactionSession) -> None:
        created = self._created.get(session.session_id)
        if created is None:
            created = self._existing_created_at(session.session_id) or _now_iso()
            self._created[session.session_id] = created
        record = StoreRecord(
            session_id=session.session_id,
            created_at=created,
            updated_at=_now_iso(),
            schema_version=SCHEMA_VERSION,
            payload=session_to_payload(session),
        )
        data = encode_record(record)
        if self.memory_only:
            self._memory[session.session_id] = data
            return
        path = self._path(session.session_id)
        tmp = path.with_name(path.name + f".tmp-{os.getpid()}-{threading.get_ident()}")
        try:
            tmp.write_bytes(data)
            self._restrict(tmp, 0o600)
            os.replace(tmp, path)
        except OSError as exc:
            tmp.unlink(missing_ok=True)
            raise StoreError(f"cannot write session record {path}: {exc}") from exc

    def _existing_created_at(self, session_id: str) -> str | None:
        try:
            data = self._read(session_id)
        except (SessionNotFound, RecordIntegrityError):
            return None
        return decode_record(data).created_at

    def _read(self, session_id: str) -> bytes:
        if self.memory_only:
            data = self._memory.get(session_id)
            if data is None:
                raise SessionNotFound(f"no session {session_id!r}")
            return data
        path = self._path(session_id)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise SessionNotFound(f"no session {session_id!r}") from None
        except OSError as exc:
            raise StoreError(f"cannot read session record {path}: {exc}") from exc

    def load(self, session_id: str) -> RedactionSession:
        record = decode_record(self._read(session_id))
        if record.session_id != session_id:
            raise RecordIntegrityError(
                f"record id {record.session_id!r} does not match file {session_id!r}"
            )
        self._created.setdefault(session_id, record.created_at)
        return payload_to_session(record.session_id, record.payload)

    def exists(self, session_id: str) -> bool:
        try:
            self._read(session_id)
            return True
        except SessionNotFound:
            return False

    def list_ids(self) -> list[str]:
        if self.memory_only:
            return sorted(self._memory)
        return sorted(
            p.name[: -len(RECORD_SUFFIX)]
            for p in self.root.glob(f"*{RECORD_SUFFIX}")
            if p.is_file()
        )

    def purge(self, session_id: str) -> None:
        if self.memory_only:
            self._memory.pop(session_id, None)
        else:
            self._path(session_id).unlink(missing_ok=True)
        self._created.pop(session_id, None)

    def purge_all(self) -> None:
        for session_id in self.list_ids():
            self.purge(session_id)

    def apply_retention(self, max_age_days: float) -> int:
        """Delete records whose last update is older than max_age_days."""
        cutoff = time.time() - max_age_days * 86400
        removed = 0
        for session_id in self.list_ids():
            try:
                record = decode_record(self._read(session_id))
                updated = datetime.strptime(
                    record.updated_at, "%Y-%m-%dT%H:%M:%S.%fZ"
                ).replace(tzinfo=timezone.utc)
            except (SessionNotFound, RecordIntegrityError, ValueError):
                continue
            if updated.timestamp() < cutoff:
                self.purge(session_id)
                removed += 1
        if removed:
            logger.info("retention removed %d session record(s)", removed)
        return removed
