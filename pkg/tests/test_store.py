import os
import re
import string

import pytest
from hypothesis import given, settings, strategies as st

from privgate.categories import PiiCategory, TAG_ORDER
from privgate.errors import RecordIntegrityError, SessionNotFound
from privgate.mapper import RedactionSession
from privgate.store import (
    HEADER,
    SessionStore,
    decode_record,
    encode_record,
    payload_to_session,
    session_to_payload,
)


class TestCreateLoad:
    def test_two_creates_are_distinct(self, store):
        assert store.create().session_id != store.create().session_id

    def test_created_record_decodes_to_empty_session(self, store):
        session = store.create()
        loaded = store.load(session.session_id)
        assert loaded.entries == [] and loaded.turn == 0 and loaded.counters == {}

    def test_id_is_url_safe_and_long_enough(self, store):
        sid = store.create().session_id
        assert len(sid) >= 16
        assert re.fullmatch(r"[A-Za-z0-9_-]+", sid)

    def test_load_unknown_is_not_found(self, store):
        with pytest.raises(SessionNotFound):
            store.load("no-such-session-xx")

    def test_write_then_read_contains_entry(self, store):
        session = store.create()
        session.allocate_placeholder(PiiCategory("PersonName"), "John Smith")
        store.save(session)
        loaded = store.load(session.session_id)
        assert loaded.find_placeholder(PiiCategory("PersonName"), "John Smith") == "Person A"

    def test_corrupt_record_is_integrity_error_never_reset(self, store):
        session = store.create()
        path = store.root / f"{session.session_id}.session"
        path.write_bytes(b"garbage")
        with pytest.raises(RecordIntegrityError):
            store.load(session.session_id)

    def test_wrong_version_rejected(self, store):
        session = store.create()
        path = store.root / f"{session.session_id}.session"
        data = path.read_text(encoding="utf-8").replace(HEADER, "privgate-session/99")
        path.write_text(data, encoding="utf-8")
        with pytest.raises(RecordIntegrityError):
            store.load(session.session_id)


class TestAtomicity:
    def test_crash_between_temp_write_and_rename_keeps_previous(self, store):
        session = store.create()
        session.allocate_placeholder(PiiCategory("PersonName"), "John Smith")
        store.save(session)
        path = store.root / f"{session.session_id}.session"
        # Simulate the crash: a temp file exists but the rename never ran.
        (store.root / f"{session.session_id}.session.tmp-dead").write_bytes(b"half-written")
        loaded = store.load(session.session_id)
        assert loaded.find_placeholder(PiiCategory("PersonName"), "John Smith") == "Person A"
        assert path.exists()

    def test_no_temp_files_survive_a_save(self, store):
        session = store.create()
        store.save(session)
        leftovers = [p for p in store.root.iterdir() if ".tmp-" in p.name]
        assert leftovers == []


class TestPurge:
    def test_purge_makes_load_not_found(self, store):
        sid = store.create().session_id
        store.purge(sid)
        with pytest.raises(SessionNotFound):
            store.load(sid)

    def test_purge_all(self, store):
        ids = [store.create().session_id for _ in range(3)]
        store.purge_all()
        for sid in ids:
            with pytest.raises(SessionNotFound):
                store.load(sid)

    def test_retention_removes_old_records(self, store):
        sid = store.create().session_id
        # Backdate the record.
        path = store.root / f"{sid}.session"
        data = path.read_text(encoding="utf-8")
        data = re.sub(r'"updated_at":"[^"]+"', '"updated_at":"2001-01-01T00:00:00.000000Z"', data)
        path.write_text(data, encoding="utf-8")
        removed = store.apply_retention(max_age_days=30)
        assert removed == 1
        assert not store.exists(sid)


class TestPermissions:
    @pytest.mark.skipif(os.name == "nt", reason="POSIX permission bits")
    def test_record_files_owner_only(self, store):
        sid = store.create().session_id
        mode = (store.root / f"{sid}.session").stat().st_mode & 0o777
        assert mode == 0o600
        assert store.root.stat().st_mode & 0o777 == 0o700


class TestMemoryMode:
    def test_memory_store_round_trip(self):
        store = SessionStore(memory_only=True)
        session = store.create()
        session.allocate_placeholder(PiiCategory("Email"), "a@b.co")
        store.save(session)
        loaded = store.load(session.session_id)
        assert loaded.find_placeholder(PiiCategory("Email"), "a@b.co") == "Email A"
        store.purge(session.session_id)
        with pytest.raises(SessionNotFound):
            store.load(session.session_id)

    def test_memory_store_touches_no_disk(self, tmp_path):
        store = SessionStore(root=tmp_path / "never", memory_only=True)
        store.create()
        assert not (tmp_path / "never").exists()


# -- canonical codec property ---------------------------------------------------

_SURFACES = st.text(
    alphabet=st.characters(codec="utf-8", exclude_categories=("Cs",)), min_size=1, max_size=20
).filter(lambda s: s.strip())
_CATS = st.sampled_from([PiiCategory(t) for t in TAG_ORDER if t != "Custom"])


@st.composite
def sessions(draw):
    session = RedactionSession()
    session.turn = draw(st.integers(0, 50))
    for _ in range(draw(st.integers(0, 8))):
        category = draw(_CATS)
        surface = draw(_SURFACES)
        if session.find_placeholder(category, surface) is None:
            session.allocate_placeholder(category, surface)
    if draw(st.booleans()):
        session.register_persona("Kevin")
    session.note_source_text(draw(st.text(max_size=40)) + " Person A")
    return session


@settings(max_examples=100, deadline=None)
@given(sessions())
def test_write_then_read_equality(session):
    payload = session_to_payload(session)
    restored = payload_to_session(session.session_id, payload)
    assert session_to_payload(restored) == payload
    assert restored.turn == session.turn
    assert restored.counters == session.counters
    assert restored.collision_digests == session.collision_digests
    assert [
        (e.placeholder, e.original, e.category.key, e.origin, e.allocated_turn)
        for e in restored.entries
    ] == [
        (e.placeholder, e.original, e.category.key, e.origin, e.allocated_turn)
        for e in session.entries
    ]


@settings(max_examples=100, deadline=None)
@given(sessions())
def test_reencoding_decoded_record_is_byte_identical(session):
    from privgate.store import StoreRecord, SCHEMA_VERSION

    record = StoreRecord(
        session_id=session.session_id,
        created_at="2026-08-11T00:00:00.000000Z",
        updated_at="2026-08-11T00:00:01.000000Z",
        schema_version=SCHEMA_VERSION,
        payload=session_to_payload(session),
    )
    data = encode_record(record)
    assert encode_record(decode_record(data)) == data


def test_store_round_trip_through_files(store):
    session = store.create()
    session.allocate_placeholder(PiiCategory("PersonName"), "Zoë Quinn-Báthory")
    session.register_persona("Kevin")
    session.note_source_text("already says Person A")
    session.turn = 7
    store.save(session)
    loaded = store.load(session.session_id)
    assert session_to_payload(loaded) == session_to_payload(session)
