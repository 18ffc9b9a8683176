"""Incremental rehydration for streamed replies.

Chunks are emitted as they arrive except for a held-back suffix one character
shorter than the longest allocated placeholder, so a placeholder split across
chunk boundaries is always reassembled before substitution. Two cases extend
the hold by the tail itself: a match whose right-hand boundary is still
undecided (more label letters may follow), and a maximal-length match flush
against the buffer end. One already-emitted character is kept as lookbehind
context so boundary checks see the true preceding character. Concatenated
output equals buffered rehydration for every possible chunking; flush() drains
the tail at stream end or abort, with any incomplete placeholder passed
through verbatim.
"""

from __future__ import annotations

import re

from .mapper import RedactionSession, RehydrationHit, placeholder_pattern


class StreamRehydrator:
    """Single-consumer transform over one streamed reply."""

    def __init__(self, mapping: dict[str, str]):
        self._mapping = dict(mapping)
        self._pattern: re.Pattern | None = placeholder_pattern(self._mapping)
        self._max_len = max((len(p) for p in self._mapping), default=0)
        self._pending = ""
        self._context = ""  # last emitted raw character, for lookbehind only
        self._out_len = 0
        self.hits: list[RehydrationHit] = []

    @classmethod
    def for_session(cls, session: RedactionSession) -> "StreamRehydrator":
        return cls(session.rehydration_map())

    @property
    def held_back(self) -> str:
        return self._pending

    def feed(self, chunk: str) -> str:
        self._pending += chunk
        return self._drain(final=False)

    def flush(self) -> str:
        return self._drain(final=True)

    def _emit(self, parts: list[str], text: str) -> None:
        parts.append(text)
        self._out_len += len(text)

    def _drain(self, final: bool) -> str:
        if self._pattern is None:
            out, self._pending = self._pending, ""
            self._out_len += len(out)
            return out
        if not self._pending:
            return ""

        ctx_len = len(self._context)
        scan = self._context + self._pending
        if final:
            safe = len(scan)
        else:
            safe_raw = len(self._pending) - (self._max_len - 1)
            if safe_raw <= 0:
                return ""
            safe = ctx_len + safe_raw

        parts: list[str] = []
        consumed = ctx_len  # scan offset; the context prefix is never re-emitted
        for m in self._pattern.finditer(scan):
            start, end = m.span()
            if start < ctx_len:
                continue
            if not final:
                if start >= safe:
                    break
                if end == len(scan):
                    # Right boundary undecided: a longer placeholder may still
                    # complete, or a letter may follow. Hold from the match on.
                    safe = start
                    break
            self._emit(parts, scan[consumed:start])
            original = self._mapping[m.group(0)]
            self.hits.append(
                RehydrationHit(self._out_len, self._out_len + len(original), m.group(0), original)
            )
            self._emit(parts, original)
            consumed = end

        emit_to = len(scan) if final else max(consumed, safe)
        self._emit(parts, scan[consumed:emit_to])
        self._pending = scan[emit_to:]
        if emit_to > 0:
            self._context = scan[emit_to - 1]
        return "".join(parts)
