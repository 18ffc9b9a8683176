"""File redaction: text extraction, span redaction, and restoration.

Supported inputs: plain text, markdown (treated as plain text), and a rich-text
subset (groups, escapes, \\par -> newline; unknown control words skipped; one
space after a control word is consumed). The outbound payload is always plain
text, so a secured .rtf upload leaves the machine as .txt. Restoration applies
the session's rehydration to the model's edited text.
"""

from __future__ import annotations

from dataclasses import dataclass

from .detection import detect
from .errors import DocumentParseError, UnsupportedFormatError
from .mapper import RedactionSession, SecuredPrompt, redact, register_manual, rehydrate
from .rules import RuleSet
from .spans import EntitySpan, resolve_overlaps

FORMAT_PLAIN = "plain"
FORMAT_MARKDOWN = "markdown"
FORMAT_RTF = "rtf"
SUPPORTED_FORMATS = (FORMAT_PLAIN, FORMAT_MARKDOWN, FORMAT_RTF)

_EXTENSIONS = {
    ".txt": FORMAT_PLAIN,
    ".text": FORMAT_PLAIN,
    ".md": FORMAT_MARKDOWN,
    ".markdown": FORMAT_MARKDOWN,
    ".rtf": FORMAT_RTF,
}

# Anchor: (offset into extracted text, byte offset into the original file).
ExtractionMap = list[tuple[int, int]]


def format_from_filename(name: str) -> str:
    lowered = name.lower()
    for ext, fmt in _EXTENSIONS.items():
        if lowered.endswith(ext):
            return fmt
    raise UnsupportedFormatError(f"unsupported file type for {name!r} (txt, md, rtf)")


def outbound_filename(name: str) -> str:
    stem = name.rsplit(".", 1)[0] if "." in name else name
    return f"{stem}.txt"


@dataclass
class ExtractedDocument:
    original_bytes: bytes
    original_format: str
    extracted_text: str
    extraction_map: ExtractionMap


@dataclass
class RedactedDocument:
    original_bytes: bytes
    original_format: str
    extracted_text: str
    extraction_map: ExtractionMap
    spans: list[EntitySpan]
    secured_text: str
    secured: SecuredPrompt
    outbound_format: str = FORMAT_PLAIN


# -- extraction ---------------------------------------------------------------

# Group destinations whose content never reaches the visible text. The info
# group (document metadata, author fields) is stripped defensively.
_SKIP_DESTINATIONS = frozenset(
    {
        "fonttbl", "colortbl", "stylesheet", "info", "pict", "object",
        "header", "footer", "generator", "themedata", "xmlnstbl", "listtable",
        "listoverridetable", "revtbl", "filetbl",
    }
)


class _RtfParser:
    """Minimal RTF-subset reader producing visible text plus byte anchors."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.out: list[str] = []
        self.anchors: ExtractionMap = []
        self._expected_byte = -1  # byte continuing the current run
        self._uc_skip = [1]  # chars to skip after \uN, per group
        self._skip_depth: int | None = None
        self._depth = 0

    def fail(self, message: str, offset: int | None = None) -> DocumentParseError:
        return DocumentParseError(message, self.pos if offset is None else offset)

    def _emit(self, text: str, src_start: int, src_len: int) -> None:
        if self._skip_depth is not None:
            return
        if src_start != self._expected_byte:
            self.anchors.append((len(self.out), src_start))
        self.out.extend(text)
        self._expected_byte = src_start + src_len

    def _skipping(self) -> bool:
        return self._skip_depth is not None

    def parse(self) -> tuple[str, ExtractionMap]:
        data = self.data
        if not data.startswith(b"{\\rtf"):
            raise self.fail("not a rich-text document", 0)
        n = len(data)
        pending_uc = 0
        while self.pos < n:
            byte = data[self.pos]
            if byte == 0x7B:  # {
                self._depth += 1
                self._uc_skip.append(self._uc_skip[-1])
                self.pos += 1
            elif byte == 0x7D:  # }
                self._depth -= 1
                if self._depth < 0:
                    raise self.fail("unbalanced closing brace")
                if self._skip_depth is not None and self._depth < self._skip_depth:
                    self._skip_depth = None
                self._uc_skip.pop()
                self.pos += 1
            elif byte == 0x5C:  # backslash
                pending_uc = self._control(pending_uc)
            else:
                ch = chr(byte)
                self.pos += 1
                if ch in "\r\n":
                    continue
                if pending_uc > 0:
                    pending_uc -= 1
                    continue
                self._emit(ch, self.pos - 1, 1)
        if self._depth != 0:
            raise self.fail("unbalanced group at end of file", len(data))
        return "".join(self.out), self.anchors

    def _control(self, pending_uc: int) -> int:
        data = self.data
        start = self.pos
        self.pos += 1
        if self.pos >= len(data):
            raise self.fail("dangling backslash at end of file", start)
        byte = data[self.pos]
        ch = chr(byte)

        if ch.isalpha():
            word_start = self.pos
            while self.pos < len(data) and chr(data[self.pos]).isalpha():
                self.pos += 1
            word = data[word_start:self.pos].decode("ascii")
            param_start = self.pos
            if self.pos < len(data) and (chr(data[self.pos]) == "-" or chr(data[self.pos]).isdigit()):
                self.pos += 1
                while self.pos < len(data) and chr(data[self.pos]).isdigit():
                    self.pos += 1
            raw_param = data[param_start:self.pos].decode("ascii")
            param = int(raw_param) if raw_param else None
            # One space after a control word belongs to the word.
            if self.pos < len(data) and data[self.pos] == 0x20:
                self.pos += 1
            return self._control_word(word, param, start, pending_uc)

        self.pos += 1
        if ch == "'":
            if self.pos + 2 > len(data):
                raise self.fail("truncated hex escape", start)
            hex_digits = data[self.pos:self.pos + 2]
            try:
                value = int(hex_digits.decode("ascii"), 16)
            except (UnicodeDecodeError, ValueError):
                raise self.fail("bad hex escape", start) from None
            self.pos += 2
            if pending_uc > 0:
                return pending_uc - 1
            self._emit(bytes([value]).decode("cp1252", errors="replace"), start, 4)
            return pending_uc
        if ch in "\\{}":
            if pending_uc > 0:
                return pending_uc - 1
            self._emit(ch, start, 2)
            return pending_uc
        if ch == "*":
            self._start_skip()
            return pending_uc
        if ch == "~":
            self._emit(" ", start, 2)
            return pending_uc
        if ch == "_":
            self._emit("-", start, 2)
            return pending_uc
        if ch in "\r\n":
            self._emit("\n", start, 2)
            return pending_uc
        # Unknown control symbol: skipped.
        return pending_uc

    def _control_word(self, word: str, param: int | None, start: int, pending_uc: int) -> int:
        token_len = self.pos - start
        if word in ("par", "line"):
            self._emit("\n", start, token_len)
        elif word == "tab":
            self._emit("\t", start, token_len)
        elif word == "emdash":
            self._emit("—", start, token_len)
        elif word == "endash":
            self._emit("–", start, token_len)
        elif word == "uc":
            self._uc_skip[-1] = param if param is not None else 1
        elif word == "u":
            if param is None:
                raise self.fail("\\u without a code point", start)
            code = param + 65536 if param < 0 else param
            self._emit(chr(code), start, token_len)
            return self._uc_skip[-1]
        elif word in _SKIP_DESTINATIONS:
            self._start_skip()
        # Every other control word is skipped.
        return pending_uc

    def _start_skip(self) -> None:
        if self._skip_depth is None:
            self._skip_depth = self._depth


def _extract_plain(data: bytes) -> tuple[str, ExtractionMap]:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DocumentParseError("invalid UTF-8", exc.start) from exc
    if not text:
        return "", []
    return text, [(0, 0), (len(text), len(data))]


def extract_text(data: bytes, fmt: str) -> tuple[str, ExtractionMap]:
    """Pull visible text from a document; anchors mark each run boundary."""
    if fmt in (FORMAT_PLAIN, FORMAT_MARKDOWN):
        return _extract_plain(data)
    if fmt == FORMAT_RTF:
        if not data:
            return "", []
        text, anchors = _RtfParser(data).parse()
        if text and (not anchors or anchors[-1][0] < len(text)):
            anchors.append((len(text), len(data)))
        return text, anchors
    raise UnsupportedFormatError(f"unsupported document format {fmt!r}")


def load_document(data: bytes, fmt: str) -> ExtractedDocument:
    text, anchors = extract_text(data, fmt)
    return ExtractedDocument(data, fmt, text, anchors)


# -- redaction / restoration ---------------------------------------------------


def redact_document(
    doc: ExtractedDocument,
    session: RedactionSession,
    rules: RuleSet,
    manual_regions: list[tuple[int, int, str | None]] | None = None,
) -> RedactedDocument:
    """Detect and redact over the extracted text; manual regions win on overlap."""
    auto = detect(doc.extracted_text, rules)
    manual = [
        register_manual(session, doc.extracted_text, start, end, substitute)
        for start, end, substitute in (manual_regions or [])
    ]
    spans = resolve_overlaps(auto + manual)
    secured = redact(doc.extracted_text, spans, session)
    return RedactedDocument(
        original_bytes=doc.original_bytes,
        original_format=doc.original_format,
        extracted_text=doc.extracted_text,
        extraction_map=doc.extraction_map,
        spans=spans,
        secured_text=secured.secured_text,
        secured=secured,
    )


def restore_document(model_output_text: str, session: RedactionSession) -> str:
    """User-facing restored document: placeholders remapped to originals."""
    restored, _ = rehydrate(model_output_text, session)
    return restored
