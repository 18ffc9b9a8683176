"""Entity spans and deterministic overlap resolution."""

from __future__ import annotations

from dataclasses import dataclass

from .categories import PiiCategory

AUTO = "auto"
MANUAL = "manual"


@dataclass(frozen=True)
class EntitySpan:
    """One detected or manually marked PII occurrence.

    Offsets are Unicode scalar-value indices into the source text (Python
    string indices), start inclusive, end exclusive. ``substitute`` is set
    only on manual spans: a term to use instead of an allocated placeholder,
    or the empty string to delete the surface outright.
    """

    start: int
    end: int
    surface: str
    category: PiiCategory
    confidence: float
    source: str = AUTO
    substitute: str | None = None

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span range [{self.start}, {self.end})")
        if len(self.surface) != self.end - self.start:
            raise ValueError("surface length does not match span range")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.source not in (AUTO, MANUAL):
            raise ValueError(f"unknown span source {self.source!r}")
        if self.source == MANUAL and self.confidence != 1.0:
            raise ValueError("manual spans carry confidence 1.0")
        if self.substitute is not None and self.source != MANUAL:
            raise ValueError("only manual spans may carry a substitute")

    @property
    def length(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start < other.end and other.start < self.end

    def matches_text(self, text: str) -> bool:
        return 0 <= self.start < self.end <= len(text) and text[self.start:self.end] == self.surface


def precedence_key(span: EntitySpan) -> tuple:
    """Dominance order: manual, then longer, earlier, more confident, category order."""
    return (
        0 if span.source == MANUAL else 1,
        -span.length,
        span.start,
        -span.confidence,
        span.category.order_index(),
    )


def resolve_overlaps(spans: list[EntitySpan]) -> list[EntitySpan]:
    """Drop dominated spans until no two overlap; result is sorted by start.

    Total function: every dropped span overlaps a kept span that strictly
    precedes it under :func:`precedence_key` (exact duplicates collapse to one).
    """
    seen: set[EntitySpan] = set()
    unique = []
    for span in spans:
        if span not in seen:
            seen.add(span)
            unique.append(span)

    kept: list[EntitySpan] = []
    for span in sorted(unique, key=precedence_key):
        if not any(span.overlaps(k) for k in kept):
            kept.append(span)
    kept.sort(key=lambda s: s.start)
    return kept
