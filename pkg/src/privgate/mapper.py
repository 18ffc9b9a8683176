"""Session-consistent placeholder allocation, redaction, and rehydration.

One session owns a bidirectional map between original surfaces and placeholder
labels ("Person A", "School B", ...). The same (category, surface) pair always
yields the same placeholder; distinct pairs never share one. Rehydration
replaces placeholders in model output with their originals, longest placeholder
first, exact case, and never inside a longer letter run (so an allocated
"School A" leaves the literal text "School AA" untouched).
"""

from __future__ import annotations

import hashlib
import re
import secrets
from dataclasses import dataclass, field

from .categories import PLACEHOLDER_NOUNS, PiiCategory
from .errors import ContractViolation, LeakageError, MappingConflictError
from .spans import EntitySpan, MANUAL

ORIGIN_AUTO = "auto"
ORIGIN_MANUAL = "manual"
ORIGIN_MANUAL_SUBSTITUTE = "manual_substitute"
ORIGIN_PERSONA = "persona"

_ORIGINS = (ORIGIN_AUTO, ORIGIN_MANUAL, ORIGIN_MANUAL_SUBSTITUTE, ORIGIN_PERSONA)

# Second-person referent a persona registration maps back to.
PERSONA_REFERENT = "you"


def label_for_index(index: int) -> str:
    """0 -> A, 25 -> Z, 26 -> AA, 27 -> AB, ... (bijective base 26)."""
    if index < 0:
        raise ValueError("label index must be >= 0")
    out = ""
    n = index + 1
    while n:
        n, rem = divmod(n - 1, 26)
        out = chr(ord("A") + rem) + out
    return out


@dataclass
class PlaceholderEntry:
    placeholder: str
    original: str
    category: PiiCategory
    allocated_turn: int
    origin: str = ORIGIN_AUTO

    def __post_init__(self):
        if self.origin not in _ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.allocated_turn < 0:
            raise ValueError("allocated_turn must be >= 0")
        if not self.original:
            raise ValueError("original surface must be non-empty")


@dataclass(frozen=True)
class Replacement:
    """One substitution: where the original sat and where its stand-in sits."""

    source_start: int
    source_end: int
    original: str
    placeholder: str
    secured_start: int
    secured_end: int


@dataclass(frozen=True)
class SecuredPrompt:
    secured_text: str
    replacements: tuple[Replacement, ...]
    session_id: str

    def restore_source(self) -> str:
        """Reapply replacements right to left; must reproduce the source text."""
        text = self.secured_text
        for rep in sorted(self.replacements, key=lambda r: r.secured_start, reverse=True):
            text = text[: rep.secured_start] + rep.original + text[rep.secured_end :]
        return text


@dataclass(frozen=True)
class RehydrationHit:
    """A placeholder occurrence replaced during rehydration, in restored coordinates."""

    start: int
    end: int
    placeholder: str
    original: str


def new_session_id() -> str:
    return secrets.token_urlsafe(16)


def _digest(value: str) -> str:
    return hashlib.sha256(value.encode("utf-8")).hexdigest()


class RedactionSession:
    """Per-conversation placeholder state. Not thread-safe; callers serialize."""

    def __init__(self, session_id: str | None = None):
        self.session_id = session_id or new_session_id()
        self.entries: list[PlaceholderEntry] = []
        self.counters: dict[str, int] = {}
        self.turn = 0
        # Digests of placeholder-shaped strings seen in source texts; labels
        # rendering to one of these are skipped so rehydration never rewrites
        # text the user actually typed.
        self.collision_digests: set[str] = set()
        self._by_key: dict[tuple[str, str], PlaceholderEntry] = {}
        self._by_placeholder: dict[str, PlaceholderEntry] = {}

    # -- lookups ---------------------------------------------------------

    def _lookup_key(self, category: PiiCategory, original: str) -> tuple[str, str]:
        trimmed = original.strip()
        # Degenerate all-whitespace surfaces key on their verbatim form.
        return (category.key, trimmed if trimmed else original)

    def find_placeholder(self, category: PiiCategory, original: str) -> str | None:
        entry = self._by_key.get(self._lookup_key(category, original))
        return entry.placeholder if entry else None

    def entry_for_placeholder(self, placeholder: str) -> PlaceholderEntry | None:
        return self._by_placeholder.get(placeholder)

    def originals(self) -> list[str]:
        """Original surfaces known to this session (persona registrations excluded)."""
        return [e.original for e in self.entries if e.origin != ORIGIN_PERSONA]

    def person_name_surfaces(self) -> set[str]:
        return {
            e.original.strip().lower()
            for e in self.entries
            if e.category.key == "PersonName" and e.origin != ORIGIN_PERSONA
        }

    def rehydration_map(self) -> dict[str, str]:
        """placeholder -> original for every non-persona entry."""
        return {
            e.placeholder: e.original for e in self.entries if e.origin != ORIGIN_PERSONA
        }

    def persona_names(self) -> list[str]:
        return [e.placeholder for e in self.entries if e.origin == ORIGIN_PERSONA]

    # -- collision tracking ----------------------------------------------

    def _known_nouns(self) -> set[str]:
        nouns = set(PLACEHOLDER_NOUNS.values())
        nouns.update(e.category.noun for e in self.entries if e.category.tag == "Custom")
        nouns.add("manual")
        return nouns

    def note_source_text(self, text: str) -> None:
        """Record placeholder-shaped strings occurring in a source text."""
        if not text:
            return
        nouns = sorted(self._known_nouns(), key=len, reverse=True)
        body = "|".join(re.escape(n) for n in nouns)
        pattern = re.compile(rf"(?<![A-Za-z])(?:{body}) [A-Z]{{1,4}}(?![A-Za-z])")
        for m in pattern.finditer(text):
            self.collision_digests.add(_digest(m.group(0)))

    def _collides(self, rendered: str) -> bool:
        return _digest(rendered) in self.collision_digests or rendered in self._by_placeholder

    # -- allocation --------------------------------------------------------

    def allocate_placeholder(
        self,
        category: PiiCategory,
        original: str,
        origin: str = ORIGIN_AUTO,
    ) -> str:
        """Return the existing placeholder for (category, original) or mint the next label."""
        if not original:
            raise ValueError("original surface must be non-empty")
        key = self._lookup_key(category, original)
        existing = self._by_key.get(key)
        if existing is not None:
            return existing.placeholder

        noun = category.noun
        index = self.counters.get(category.key, 0)
        while True:
            rendered = f"{noun} {label_for_index(index)}"
            index += 1
            if not self._collides(rendered):
                break
        self.counters[category.key] = index

        entry = PlaceholderEntry(rendered, original, category, self.turn, origin)
        self._append_entry(entry)
        return rendered

    def register_substitute(self, category: PiiCategory, original: str, term: str) -> str:
        """Map a manual substitute term to its original for later rehydration."""
        if not term:
            raise ValueError("substitute term must be non-empty")
        key = self._lookup_key(category, original)
        existing = self._by_key.get(key)
        if existing is not None:
            if existing.placeholder != term:
                raise MappingConflictError(
                    f"{original!r} is already mapped to {existing.placeholder!r}"
                )
            return term
        clash = self._by_placeholder.get(term)
        if clash is not None and clash.original.strip() != original.strip():
            raise MappingConflictError(
                f"substitute {term!r} already stands for a different surface"
            )
        entry = PlaceholderEntry(term, original, category, self.turn, ORIGIN_MANUAL_SUBSTITUTE)
        self._append_entry(entry)
        return term

    def register_persona(self, persona: str) -> None:
        if persona in self._by_placeholder:
            return
        entry = PlaceholderEntry(
            persona, PERSONA_REFERENT, PiiCategory("PersonName"), self.turn, ORIGIN_PERSONA
        )
        self._append_entry(entry)

    def _append_entry(self, entry: PlaceholderEntry) -> None:
        if entry.placeholder in self._by_placeholder:
            raise MappingConflictError(f"placeholder {entry.placeholder!r} already allocated")
        self.entries.append(entry)
        self._by_placeholder[entry.placeholder] = entry
        if entry.origin != ORIGIN_PERSONA:
            self._by_key[self._lookup_key(entry.category, entry.original)] = entry

    def rebuild_indexes(self) -> None:
        """Recompute derived lookups after deserialization."""
        self._by_key.clear()
        self._by_placeholder.clear()
        entries, self.entries = self.entries, []
        for entry in entries:
            self._append_entry(entry)


# -- leakage check ---------------------------------------------------------


def leaking_surfaces(text: str, originals: list[str]) -> list[str]:
    """Original surfaces still present in text.

    Case-insensitive for surfaces of length >= 4; exact for shorter ones so
    two-letter fragments ("MA") do not trip the check.
    """
    lowered = text.lower()
    leaks = []
    for surface in originals:
        probe = surface.strip()
        if not probe:
            continue
        if len(probe) >= 4:
            if probe.lower() in lowered:
                leaks.append(surface)
        elif probe in text:
            leaks.append(surface)
    return leaks


def assert_no_leakage(text: str, session: RedactionSession, context: str = "secured text") -> None:
    leaks = leaking_surfaces(text, session.originals())
    if leaks:
        raise LeakageError(f"{context} still contains {len(leaks)} original surface(s)", leaks)


# -- redact / rehydrate -----------------------------------------------------


def redact(text: str, spans: list[EntitySpan], session: RedactionSession) -> SecuredPrompt:
    """Replace each span's surface with its placeholder (or manual substitute).

    Spans must be non-overlapping, sorted, and valid for the text (the output
    of resolve_overlaps); anything else is a contract violation. All other
    characters pass through untouched, and a surface's outer whitespace is
    re-emitted around the placeholder so restoration is exact. The session
    gains any new mappings and advances one turn. The no-leakage invariant is
    enforced at the gateway boundary, where a failing payload is refused.
    """
    last_end = -1
    for span in spans:
        if not span.matches_text(text):
            raise ContractViolation(
                f"span [{span.start}, {span.end}) does not match the text"
            )
        if span.start < last_end:
            raise ContractViolation("spans overlap or are unsorted")
        last_end = span.end

    session.note_source_text(text)

    parts: list[str] = []
    replacements: list[Replacement] = []
    cursor = 0
    out_len = 0
    for span in spans:
        gap = text[cursor:span.start]
        parts.append(gap)
        out_len += len(gap)

        if span.substitute == "":
            stand_in = ""
        elif span.substitute is not None:
            stand_in = session.register_substitute(span.category, span.surface, span.substitute)
        else:
            origin = ORIGIN_MANUAL if span.source == MANUAL else ORIGIN_AUTO
            core = span.surface.strip() or span.surface
            lead = span.surface[: len(span.surface) - len(span.surface.lstrip())]
            trail = span.surface[len(lead) + len(core):]
            if not span.surface.strip():
                lead = trail = ""
            placeholder = session.allocate_placeholder(span.category, core, origin)
            stand_in = f"{lead}{placeholder}{trail}"

        replacements.append(
            Replacement(
                source_start=span.start,
                source_end=span.end,
                original=span.surface,
                placeholder=stand_in,
                secured_start=out_len,
                secured_end=out_len + len(stand_in),
            )
        )
        parts.append(stand_in)
        out_len += len(stand_in)
        cursor = span.end
    parts.append(text[cursor:])

    secured = SecuredPrompt("".join(parts), tuple(replacements), session.session_id)
    session.turn += 1
    return secured


def placeholder_pattern(mapping: dict[str, str]) -> re.Pattern | None:
    """Longest-first, exact-case matcher that never fires inside a letter run."""
    if not mapping:
        return None
    ordered = sorted(mapping, key=len, reverse=True)
    body = "|".join(re.escape(p) for p in ordered)
    return re.compile(rf"(?<![A-Za-z])(?:{body})(?![A-Za-z])")


def rehydrate(text: str, session: RedactionSession) -> tuple[str, list[RehydrationHit]]:
    """Replace allocated placeholders with their originals.

    Returns the restored text plus one hit per replacement with its position
    in the restored text. Placeholder-shaped strings this session never
    allocated are left untouched; persona registrations are handled by the
    smokescreen deframer, not here.
    """
    mapping = session.rehydration_map()
    pattern = placeholder_pattern(mapping)
    if pattern is None:
        return text, []

    parts: list[str] = []
    hits: list[RehydrationHit] = []
    cursor = 0
    out_len = 0
    for m in pattern.finditer(text):
        gap = text[cursor:m.start()]
        parts.append(gap)
        out_len += len(gap)
        original = mapping[m.group(0)]
        hits.append(RehydrationHit(out_len, out_len + len(original), m.group(0), original))
        parts.append(original)
        out_len += len(original)
        cursor = m.end()
    parts.append(text[cursor:])
    return "".join(parts), hits


def register_manual(
    session: RedactionSession,
    text: str,
    start: int,
    end: int,
    substitute: str | None = None,
    category: PiiCategory | None = None,
) -> EntitySpan:
    """Turn a user-selected range into a manual span for the next redact call."""
    if not (0 <= start < end <= len(text)):
        raise ValueError(f"range [{start}, {end}) is outside the text")
    del session  # mapping happens when the span is redacted
    return EntitySpan(
        start=start,
        end=end,
        surface=text[start:end],
        category=category or PiiCategory.custom("manual"),
        confidence=1.0,
        source=MANUAL,
        substitute=substitute,
    )
