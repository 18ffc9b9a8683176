"""Layered PII detection: pattern rules, gazetteers, name heuristic, context windows.

Detection is a pure function of (text, rules). The optional LLM backend sits
behind the same span contract; its output is validated by re-locating every
returned surface in the text, and transport failures fall back to the rules
backend with a degraded flag.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Protocol

import httpx

from .categories import PERSON_NAME, PiiCategory, parse_category
from .errors import BackendUnavailable, SizeLimitError
from .rules import (
    CONTEXT_CONFIDENCE,
    GAZETTEER_CONFIDENCE,
    NAME_HEURISTIC_CONFIDENCE,
    RuleSet,
)
from .spans import AUTO, EntitySpan, resolve_overlaps

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\S+")
# Zero-width so overlapping bigrams all become candidates ("Ask John" must
# not shadow "John Smith"); overlap resolution picks the dominant one.
_BIGRAM_RE = re.compile(r"(?=((?<![A-Za-z])[A-Z][a-z]+ [A-Z][a-z]+(?![A-Za-z])))")
_SENTENCE_END = ".!?"

# Capitalized sentence-openers that are never treated as a name's first token.
_NAME_STOPWORDS = frozenset(
    {
        "the", "this", "that", "these", "those", "a", "an", "my", "your",
        "our", "their", "his", "her", "its", "dear", "hello", "hi", "please",
        "ask", "tell", "call", "email", "contact", "meet", "see", "thank",
        "thanks", "remind", "send", "greet", "write",
        "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
        "sunday", "january", "february", "march", "april", "may", "june",
        "july", "august", "september", "october", "november", "december",
    }
)


def _check_size(text: str, rules: RuleSet) -> None:
    if len(text.encode("utf-8")) > rules.max_text_bytes:
        raise SizeLimitError(
            f"text exceeds the {rules.max_text_bytes}-byte detection cap"
        )


def _pattern_spans(text: str, rules: RuleSet) -> list[EntitySpan]:
    spans = []
    for rule in rules.pattern_rules:
        for m in rule.compiled.finditer(text):
            if m.start() == m.end():
                continue
            spans.append(
                EntitySpan(m.start(), m.end(), m.group(0), rule.category, rule.confidence)
            )
    return spans


def _gazetteer_spans(text: str, rules: RuleSet) -> list[EntitySpan]:
    spans = []
    for category, pattern in rules.gazetteer_patterns.items():
        if not rules.gazetteers.get(category):
            continue
        for m in pattern.finditer(text):
            spans.append(
                EntitySpan(m.start(), m.end(), m.group(0), category, GAZETTEER_CONFIDENCE)
            )
    return spans


def _at_sentence_start(text: str, pos: int) -> bool:
    i = pos - 1
    while i >= 0 and text[i].isspace():
        i -= 1
    return i < 0 or text[i] in _SENTENCE_END


def _name_heuristic_spans(text: str, rules: RuleSet) -> list[EntitySpan]:
    """Capitalized bigrams; at a sentence start one token must be a known given name."""
    given = rules.given_names()
    spans = []
    for m in _BIGRAM_RE.finditer(text):
        start, end = m.start(1), m.end(1)
        first, second = m.group(1).split(" ")
        if first.lower() in _NAME_STOPWORDS:
            continue
        if _at_sentence_start(text, start):
            if first.lower() not in given and second.lower() not in given:
                continue
        spans.append(
            EntitySpan(start, end, m.group(1), PERSON_NAME, NAME_HEURISTIC_CONFIDENCE)
        )
    return spans


def _context_spans(text: str, rules: RuleSet) -> list[EntitySpan]:
    """A trigger hit marks the trigger plus a window of +/- N whitespace tokens."""
    if not rules.context_lexicons:
        return []
    tokens = [(m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]
    if not tokens:
        return []
    starts = [s for s, _ in tokens]

    def token_index(pos: int) -> int:
        # Index of the token containing or preceding pos.
        lo, hi = 0, len(tokens) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if starts[mid] <= pos:
                lo = mid
            else:
                hi = mid - 1
        return lo

    spans = []
    for category, lexicon in rules.context_lexicons.items():
        for m in lexicon.compiled.finditer(text):
            first = max(0, token_index(m.start()) - lexicon.window)
            last = min(len(tokens) - 1, token_index(m.end() - 1) + lexicon.window)
            start, end = tokens[first][0], tokens[last][1]
            spans.append(EntitySpan(start, end, text[start:end], category, CONTEXT_CONFIDENCE))
    return spans


def detect(text: str, rules: RuleSet) -> list[EntitySpan]:
    """Find PII spans in text: non-overlapping, sorted by start, deterministic.

    The confidence threshold applies after overlap resolution so that raising
    it can only remove spans, never uncover previously dominated ones.
    """
    _check_size(text, rules)
    if not text:
        return []
    candidates = _pattern_spans(text, rules)
    candidates += _gazetteer_spans(text, rules)
    if rules.name_heuristic:
        candidates += _name_heuristic_spans(text, rules)
    candidates += _context_spans(text, rules)
    resolved = resolve_overlaps(candidates)
    return [s for s in resolved if s.confidence >= rules.threshold]


@dataclass(frozen=True)
class DetectionResult:
    spans: list[EntitySpan]
    backend: str
    degraded: bool = False


class DetectionBackend(Protocol):
    name: str

    def detect(self, text: str) -> list[EntitySpan]: ...


class RulesBackend:
    """Always-available backend wrapping a compiled rule set."""

    name = "rules"

    def __init__(self, rules: RuleSet):
        self.rules = rules

    def detect(self, text: str) -> list[EntitySpan]:
        return detect(text, self.rules)


_LLM_DETECT_INSTRUCTIONS = (
    "You label personal information in text. Reply with a JSON array only; "
    "each element is {\"surface\": <exact substring>, \"category\": <one of "
    "PersonName, Institution, Location, PhoneNumber, Email, GovernmentId, "
    "DirectoryPath, Medical, MentalHealth, Financial, Travel>}. "
    "Return [] when nothing applies."
)


class HttpLlmBackend:
    """Local-model detection over the generic chat-completion wire format.

    Returned items are validated against the source text: the surface must
    occur verbatim, and every occurrence becomes a span. Items with unknown
    categories or unlocatable surfaces are dropped.
    """

    name = "llm"

    def __init__(
        self,
        base_url: str,
        model: str,
        path: str = "/v1/chat/completions",
        timeout: float = 10.0,
        confidence: float = 0.8,
        transport: httpx.BaseTransport | None = None,
    ):
        self.model = model
        self.path = path
        self.confidence = confidence
        self._client = httpx.Client(base_url=base_url, timeout=timeout, transport=transport)

    def detect(self, text: str) -> list[EntitySpan]:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": _LLM_DETECT_INSTRUCTIONS},
                {"role": "user", "content": text},
            ],
        }
        try:
            response = self._client.post(self.path, json=payload)
            response.raise_for_status()
        except (httpx.TransportError, httpx.HTTPStatusError) as exc:
            raise BackendUnavailable(f"llm detection backend: {exc}") from exc
        content = response.json()["choices"][0]["message"]["content"]
        return self._validate(text, content)

    def _validate(self, text: str, content: str) -> list[EntitySpan]:
        items = _parse_json_array(content)
        spans: list[EntitySpan] = []
        for item in items:
            if not isinstance(item, dict):
                continue
            surface = item.get("surface")
            category_key = item.get("category")
            if not surface or not isinstance(surface, str):
                continue
            try:
                category = parse_category(str(category_key))
            except ValueError:
                logger.debug("dropping llm item with unknown category %r", category_key)
                continue
            pos = text.find(surface)
            if pos < 0:
                logger.debug("dropping llm item with unlocatable surface %r", surface)
                continue
            while pos >= 0:
                spans.append(
                    EntitySpan(pos, pos + len(surface), surface, category, self.confidence)
                )
                pos = text.find(surface, pos + len(surface))
        return resolve_overlaps(spans)


def _parse_json_array(content: str) -> list:
    try:
        parsed = json.loads(content)
        return parsed if isinstance(parsed, list) else []
    except json.JSONDecodeError:
        pass
    start, end = content.find("["), content.rfind("]")
    if 0 <= start < end:
        try:
            parsed = json.loads(content[start:end + 1])
            return parsed if isinstance(parsed, list) else []
        except json.JSONDecodeError:
            return []
    return []


def detect_with_backend(
    text: str,
    backend: DetectionBackend,
    fallback: RulesBackend | None = None,
) -> DetectionResult:
    """Run a backend with the detect() contract; fall back to rules when it fails."""
    try:
        return DetectionResult(backend.detect(text), backend.name)
    except BackendUnavailable as exc:
        if fallback is None:
            raise
        logger.warning("detection backend %s unavailable, using rules: %s", backend.name, exc)
        return DetectionResult(fallback.detect(text), fallback.name, degraded=True)
