"""Declarative detection rules: pattern regexes, gazetteers, context lexicons.

Rule files are UTF-8 and line-oriented. ``#`` starts a comment unless escaped
inside a regex (comments are stripped only when the ``#`` begins the line or
follows whitespace at the start). Sections:

    [options]                key=value lines (threshold, case flags, ...)
    [custom]                 label <TAB> direct|contextual
    [patterns]               category <TAB> confidence <TAB> regex
    [gazetteer:<category>]   one surface per line
    [context:<category>]     window=<N> line, then one trigger term per line

The bit-exact grammar lives in docs/rules-format.md.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .categories import CONTEXTUAL_TAGS, PiiCategory, TAG_ORDER
from .errors import RuleConfigError

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 6
DEFAULT_THRESHOLD = 0.5
DEFAULT_MAX_TEXT_BYTES = 1024 * 1024

# Default confidences for rule layers that do not set their own.
PATTERN_CONFIDENCE = 0.95
GAZETTEER_CONFIDENCE = 0.9
NAME_HEURISTIC_CONFIDENCE = 0.6
CONTEXT_CONFIDENCE = 0.5


@dataclass(frozen=True)
class PatternRule:
    category: PiiCategory
    pattern: str
    confidence: float
    compiled: re.Pattern = field(repr=False, compare=False, hash=False)


@dataclass(frozen=True)
class ContextLexicon:
    window: int
    triggers: tuple[str, ...]
    compiled: re.Pattern = field(repr=False, compare=False, hash=False)


@dataclass(frozen=True)
class RuleSet:
    """Compiled, immutable detection configuration; safe to share across threads."""

    pattern_rules: tuple[PatternRule, ...]
    gazetteers: dict[PiiCategory, tuple[str, ...]]
    context_lexicons: dict[PiiCategory, ContextLexicon]
    custom_classes: dict[str, str]  # label -> "direct" | "contextual"
    threshold: float = DEFAULT_THRESHOLD
    gazetteer_ignore_case: bool = False
    name_heuristic: bool = True
    max_text_bytes: int = DEFAULT_MAX_TEXT_BYTES
    gazetteer_patterns: dict[PiiCategory, re.Pattern] = field(
        default_factory=dict, repr=False, compare=False, hash=False
    )

    def is_contextual(self, category: PiiCategory) -> bool:
        if category.tag == "Custom":
            return self.custom_classes.get(category.label or "") == "contextual"
        return category.tag in CONTEXTUAL_TAGS

    def given_names(self) -> frozenset[str]:
        """Lower-cased PersonName gazetteer entries, used by the bigram heuristic."""
        names = self.gazetteers.get(PiiCategory("PersonName"), ())
        return frozenset(n.lower() for n in names)


def _compile_gazetteer(entries: tuple[str, ...], ignore_case: bool) -> re.Pattern:
    # Longest-first so multiword surfaces win over their own prefixes.
    ordered = sorted(entries, key=len, reverse=True)
    body = "|".join(re.escape(e) for e in ordered)
    flags = re.IGNORECASE if ignore_case else 0
    return re.compile(rf"(?<!\w)(?:{body})(?!\w)", flags)


def _compile_triggers(triggers: tuple[str, ...]) -> re.Pattern:
    ordered = sorted(triggers, key=len, reverse=True)
    body = "|".join(re.escape(t) for t in ordered)
    return re.compile(rf"(?<!\w)(?:{body})(?!\w)", re.IGNORECASE)


def build_rule_set(
    pattern_rules: list[tuple[PiiCategory, str, float]],
    gazetteers: dict[PiiCategory, list[str]],
    context_lexicons: dict[PiiCategory, tuple[int, list[str]]],
    custom_classes: dict[str, str] | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    gazetteer_ignore_case: bool = False,
    name_heuristic: bool = True,
    max_text_bytes: int = DEFAULT_MAX_TEXT_BYTES,
) -> RuleSet:
    """Validate and compile a rule set; raises RuleConfigError on bad input."""
    if not (0.0 <= threshold <= 1.0):
        raise RuleConfigError(f"threshold {threshold} outside [0, 1]")

    compiled_patterns = []
    for category, pattern, confidence in pattern_rules:
        if not (0.0 <= confidence <= 1.0):
            raise RuleConfigError(
                f"pattern confidence {confidence} for {category.key} outside [0, 1]"
            )
        try:
            compiled = re.compile(pattern)
        except re.error as exc:
            raise RuleConfigError(f"pattern for {category.key} does not compile: {exc}") from exc
        compiled_patterns.append(PatternRule(category, pattern, confidence, compiled))

    clean_gazetteers: dict[PiiCategory, tuple[str, ...]] = {}
    gazetteer_patterns: dict[PiiCategory, re.Pattern] = {}
    for category, entries in gazetteers.items():
        for entry in entries:
            if not entry.strip():
                raise RuleConfigError(f"empty gazetteer entry under {category.key}")
        deduped = tuple(dict.fromkeys(entries))
        clean_gazetteers[category] = deduped
        gazetteer_patterns[category] = _compile_gazetteer(deduped, gazetteer_ignore_case)

    lexicons: dict[PiiCategory, ContextLexicon] = {}
    for category, (window, triggers) in context_lexicons.items():
        if window < 0:
            raise RuleConfigError(f"context window for {category.key} must be >= 0")
        for trigger in triggers:
            if not trigger.strip():
                raise RuleConfigError(f"empty context trigger under {category.key}")
        deduped = tuple(dict.fromkeys(triggers))
        lexicons[category] = ContextLexicon(window, deduped, _compile_triggers(deduped))

    custom_classes = dict(custom_classes or {})
    for label, cls in custom_classes.items():
        if not label:
            raise RuleConfigError("custom label must be non-empty")
        if cls not in ("direct", "contextual"):
            raise RuleConfigError(f"custom class for {label!r} must be direct|contextual")

    return RuleSet(
        pattern_rules=tuple(compiled_patterns),
        gazetteers=clean_gazetteers,
        context_lexicons=lexicons,
        custom_classes=custom_classes,
        threshold=threshold,
        gazetteer_ignore_case=gazetteer_ignore_case,
        name_heuristic=name_heuristic,
        max_text_bytes=max_text_bytes,
        gazetteer_patterns=gazetteer_patterns,
    )


_SECTION_RE = re.compile(r"^\[(?P<name>[^\]]+)\]$")
_OPTION_BOOLS = {"true": True, "false": False}


def _parse_category_token(token: str, custom_classes: dict[str, str], line_no: int) -> PiiCategory:
    token = token.strip()
    if token in TAG_ORDER and token != "Custom":
        return PiiCategory(token)
    if token in custom_classes:
        return PiiCategory.custom(token)
    raise RuleConfigError(f"line {line_no}: unknown category {token!r} (declare customs in [custom])")


def parse_rules(text: str, source: str = "<rules>") -> RuleSet:
    """Parse rule-file text. Custom labels may be declared anywhere in the file."""
    lines = text.splitlines()

    # First pass: collect custom declarations so later sections can use them.
    custom_classes: dict[str, str] = {}
    section = None
    for idx, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group("name")
            continue
        if section == "custom":
            parts = line.split("\t")
            if len(parts) != 2:
                raise RuleConfigError(f"{source} line {idx}: expected 'label<TAB>direct|contextual'")
            label, cls = parts[0].strip(), parts[1].strip()
            if label in custom_classes:
                raise RuleConfigError(f"{source} line {idx}: duplicate custom label {label!r}")
            custom_classes[label] = cls

    pattern_rules: list[tuple[PiiCategory, str, float]] = []
    gazetteers: dict[PiiCategory, list[str]] = {}
    context_lexicons: dict[PiiCategory, tuple[int, list[str]]] = {}
    options: dict[str, str] = {}

    section = None
    section_category: PiiCategory | None = None
    for idx, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _SECTION_RE.match(stripped)
        if m:
            name = m.group("name")
            if name in ("options", "custom", "patterns"):
                section, section_category = name, None
            elif name.startswith("gazetteer:"):
                section = "gazetteer"
                section_category = _parse_category_token(name.split(":", 1)[1], custom_classes, idx)
                gazetteers.setdefault(section_category, [])
            elif name.startswith("context:"):
                section = "context"
                section_category = _parse_category_token(name.split(":", 1)[1], custom_classes, idx)
                context_lexicons.setdefault(section_category, (DEFAULT_WINDOW, []))
            else:
                raise RuleConfigError(f"{source} line {idx}: unknown section [{name}]")
            continue

        if section == "options":
            if "=" not in stripped:
                raise RuleConfigError(f"{source} line {idx}: options take key=value")
            key, _, value = stripped.partition("=")
            options[key.strip()] = value.strip()
        elif section == "custom":
            continue  # handled in the first pass
        elif section == "patterns":
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise RuleConfigError(
                    f"{source} line {idx}: expected 'category<TAB>confidence<TAB>regex'"
                )
            category = _parse_category_token(parts[0], custom_classes, idx)
            try:
                confidence = float(parts[1])
            except ValueError as exc:
                raise RuleConfigError(f"{source} line {idx}: bad confidence {parts[1]!r}") from exc
            pattern_rules.append((category, parts[2], confidence))
        elif section == "gazetteer":
            assert section_category is not None
            gazetteers[section_category].append(stripped)
        elif section == "context":
            assert section_category is not None
            window, triggers = context_lexicons[section_category]
            if stripped.startswith("window="):
                try:
                    window = int(stripped[len("window="):])
                except ValueError as exc:
                    raise RuleConfigError(f"{source} line {idx}: bad window value") from exc
                context_lexicons[section_category] = (window, triggers)
            else:
                triggers.append(stripped)
        else:
            raise RuleConfigError(f"{source} line {idx}: content outside any section")

    def _bool_option(key: str, default: bool) -> bool:
        if key not in options:
            return default
        value = options[key].lower()
        if value not in _OPTION_BOOLS:
            raise RuleConfigError(f"{source}: option {key} must be true|false")
        return _OPTION_BOOLS[value]

    try:
        threshold = float(options.get("threshold", DEFAULT_THRESHOLD))
    except ValueError as exc:
        raise RuleConfigError(f"{source}: bad threshold {options['threshold']!r}") from exc
    try:
        max_text_bytes = int(options.get("max_text_bytes", DEFAULT_MAX_TEXT_BYTES))
    except ValueError as exc:
        raise RuleConfigError(f"{source}: bad max_text_bytes") from exc

    try:
        return build_rule_set(
            pattern_rules,
            gazetteers,
            context_lexicons,
            custom_classes=custom_classes,
            threshold=threshold,
            gazetteer_ignore_case=_bool_option("gazetteer_ignore_case", False),
            name_heuristic=_bool_option("name_heuristic", True),
            max_text_bytes=max_text_bytes,
        )
    except RuleConfigError as exc:
        raise RuleConfigError(f"{source}: {exc}") from exc


def load_rules(path: str | Path) -> RuleSet:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise RuleConfigError(f"cannot read rule file {path}: {exc}") from exc
    return parse_rules(text, source=str(path))


def default_rules() -> RuleSet:
    """Rule set bundled with the package."""
    text = resources.files("privgate.data").joinpath("default.rules").read_text(encoding="utf-8")
    return parse_rules(text, source="default.rules")


class RuleManager:
    """Holds the active rule set; reload happens only via an explicit call."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path else None
        self._current = load_rules(self._path) if self._path else default_rules()

    @property
    def current(self) -> RuleSet:
        return self._current

    def reload(self) -> RuleSet:
        if self._path is None:
            self._current = default_rules()
        else:
            self._current = load_rules(self._path)
        logger.info("rules reloaded from %s", self._path or "bundled defaults")
        return self._current
