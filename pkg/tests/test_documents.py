from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from privgate.documents import (
    extract_text,
    format_from_filename,
    load_document,
    outbound_filename,
    redact_document,
    restore_document,
)
from privgate.errors import DocumentParseError, UnsupportedFormatError
from privgate.mapper import RedactionSession, leaking_surfaces

CORPUS = Path(__file__).parent / "data" / "rtf_corpus"


class TestExtractPlain:
    def test_identity(self):
        text, anchors = extract_text(b"hello", "plain")
        assert text == "hello"
        assert anchors == [(0, 0), (5, 5)]

    def test_empty_file(self):
        assert extract_text(b"", "plain") == ("", [])
        assert extract_text(b"", "rtf") == ("", [])

    def test_markdown_treated_as_plain(self):
        text, _ = extract_text(b"# Title\n\nBody", "markdown")
        assert text == "# Title\n\nBody"

    def test_invalid_utf8_names_offset(self):
        with pytest.raises(DocumentParseError) as err:
            extract_text(b"ok\xff!", "plain")
        assert err.value.byte_offset == 2

    def test_unsupported_format(self):
        with pytest.raises(UnsupportedFormatError):
            extract_text(b"x", "pdf")


class TestExtractRtfCorpus:
    @pytest.mark.parametrize("case", sorted(p.stem for p in CORPUS.glob("*.rtf")))
    def test_mini_corpus(self, case):
        data = (CORPUS / f"{case}.rtf").read_bytes()
        expected = (CORPUS / f"{case}.expected").read_text(encoding="utf-8")
        text, anchors = extract_text(data, "rtf")
        assert text == expected
        for (e0, b0), (e1, b1) in zip(anchors, anchors[1:]):
            assert e0 < e1 and b0 < b1

    def test_info_group_stripped(self):
        data = (CORPUS / "06_info.rtf").read_bytes()
        text, _ = extract_text(data, "rtf")
        assert "Jane" not in text and "Secret" not in text

    def test_not_rtf_names_offset_zero(self):
        with pytest.raises(DocumentParseError) as err:
            extract_text(b"plain words", "rtf")
        assert err.value.byte_offset == 0

    def test_unbalanced_group_names_offset(self):
        data = b"{\\rtf1 oops"
        with pytest.raises(DocumentParseError) as err:
            extract_text(data, "rtf")
        assert err.value.byte_offset == len(data)

    def test_bad_hex_escape(self):
        with pytest.raises(DocumentParseError):
            extract_text(b"{\\rtf1 \\'zz}", "rtf")

    def test_deterministic(self):
        data = (CORPUS / "10_paragraphs.rtf").read_bytes()
        assert extract_text(data, "rtf") == extract_text(data, "rtf")


@settings(max_examples=80, deadline=None)
@given(st.text(max_size=200))
def test_plain_extraction_map_monotone(body):
    data = body.encode("utf-8")
    _, anchors = extract_text(data, "plain")
    for (e0, b0), (e1, b1) in zip(anchors, anchors[1:]):
        assert e0 < e1 and b0 < b1


class TestFormats:
    def test_filename_mapping(self):
        assert format_from_filename("a.TXT") == "plain"
        assert format_from_filename("a.md") == "markdown"
        assert format_from_filename("letter.rtf") == "rtf"
        with pytest.raises(UnsupportedFormatError):
            format_from_filename("scan.pdf")

    def test_outbound_is_always_txt(self):
        assert outbound_filename("letter.rtf") == "letter.txt"
        assert outbound_filename("notes.md") == "notes.txt"
        assert outbound_filename("bare") == "bare.txt"


class TestRedactDocument:
    def test_rtf_in_plaintext_out(self, rules, session):
        data = b"{\\rtf1 Contact John Smith \\par at MIT.}"
        doc = load_document(data, "rtf")
        redacted = redact_document(doc, session, rules)
        assert redacted.outbound_format == "plain"
        assert "John Smith" not in redacted.secured_text
        assert "Person A" in redacted.secured_text and "School A" in redacted.secured_text

    def test_no_spans_means_identity(self, rules, session):
        doc = load_document(b"nothing sensitive here", "plain")
        redacted = redact_document(doc, session, rules)
        assert redacted.secured_text == doc.extracted_text

    def test_manual_region_wins_over_auto(self, rules, session):
        text = b"ask John Smith about it"
        doc = load_document(text, "plain")
        redacted = redact_document(
            doc, session, rules, manual_regions=[(4, 14, "the colleague")]
        )
        assert redacted.secured_text == "ask the colleague about it"
        assert [s.source for s in redacted.spans] == ["manual"]

    def test_outbound_passes_leakage_check(self, rules, session):
        doc = load_document(b"mail alice@example.com or call 617-555-0142", "plain")
        redacted = redact_document(doc, session, rules)
        assert leaking_surfaces(redacted.secured_text, session.originals()) == []


class TestRestoreDocument:
    def test_echo_round_trip(self, rules, session):
        original = "Dear John Smith, the MIT deadline moved."
        doc = load_document(original.encode("utf-8"), "plain")
        redacted = redact_document(doc, session, rules)
        echoed = redacted.secured_text  # the mock model returns its input
        assert restore_document(echoed, session) == original

    def test_dropped_placeholder_simply_absent(self, rules, session):
        doc = load_document(b"ask John Smith today", "plain")
        redact_document(doc, session, rules)
        restored = restore_document("The request was declined.", session)
        assert restored == "The request was declined."

    def test_unallocated_placeholder_left_verbatim(self, rules, session):
        doc = load_document(b"ask John Smith today", "plain")
        redact_document(doc, session, rules)
        restored = restore_document("Person Z was unavailable.", session)
        assert restored == "Person Z was unavailable."
