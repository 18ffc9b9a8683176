"""Smokescreen reframing: third-person surrogate prompts and response deframing.

The forward rewrite turns first-person statements into statements about a
fabricated persona using a fixed, case-aware substitution table (documented in
docs/smokescreen.md); the inverse table turns persona references in the reply
back into second person. No syntactic parsing: the contract is persona-free
output, not grammatical perfection.
"""

from __future__ import annotations

import dataclasses
import logging
import re
from dataclasses import dataclass
from importlib import resources

import httpx

from .categories import CONTEXTUAL_TAGS, PiiCategory
from .errors import BackendUnavailable
from .mapper import RedactionSession, leaking_surfaces
from .spans import EntitySpan

logger = logging.getLogger(__name__)

GENERATOR_TEMPLATE = "template"
GENERATOR_LOCAL_MODEL = "local_model"


def load_personas() -> tuple[str, ...]:
    text = resources.files("privgate.data").joinpath("personas.txt").read_text(encoding="utf-8")
    names = [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]
    return tuple(names)


def surrogate_system_prompt() -> str:
    return (
        resources.files("privgate.data")
        .joinpath("surrogate_system_prompt.txt")
        .read_text(encoding="utf-8")
    )


@dataclass(frozen=True)
class SmokescreenPolicy:
    """Which contextual categories trigger a smokescreen."""

    enabled_categories: frozenset[str] = frozenset(CONTEXTUAL_TAGS)
    contextual_custom_labels: frozenset[str] = frozenset()

    def triggers(self, category: PiiCategory) -> bool:
        if category.tag == "Custom":
            return (category.label or "") in self.contextual_custom_labels
        return category.tag in CONTEXTUAL_TAGS and category.tag in self.enabled_categories


@dataclass(frozen=True)
class SurrogatePrompt:
    persona: str
    surrogate_text: str
    instruction_suffix: str
    source_categories: frozenset[str] = frozenset()
    generator: str = GENERATOR_TEMPLATE
    degraded: bool = False

    @property
    def full_text(self) -> str:
        return f"{self.surrogate_text} {self.instruction_suffix}"


def should_smokescreen(spans: list[EntitySpan], policy: SmokescreenPolicy) -> bool:
    """True iff any span's category is contextual and enabled by the policy."""
    return any(policy.triggers(span.category) for span in spans)


# -- forward rewrite ---------------------------------------------------------

# Verbs left untouched after "I" (no third-person -s form).
_AUX_KEEP = frozenset(
    {
        "will", "would", "can", "could", "may", "might", "must", "shall",
        "should", "cannot", "can't", "won't", "wouldn't", "couldn't",
        "shouldn't", "mustn't", "did", "didn't", "was", "had", "used",
        "ought", "never", "also", "always", "often", "sometimes", "really",
        "just", "still", "usually", "rarely", "already",
    }
)
_AUX_MAP = {"am": "is", "have": "has", "do": "does", "don't": "doesn't", "be": "is", "go": "goes"}

_FORWARD_RE = re.compile(
    r"I'm|I’m|I've|I’ve|I'll|I’ll|I'd|I’d"
    r"|\bI\b[ \t]+[A-Za-z][A-Za-z'’]*"
    r"|\bI\b"
    r"|\b[Mm]yself\b|\b[Mm]ine\b|\b[Mm]y\b|\b[Mm]e\b"
)


def _third_person_verb(verb: str) -> str:
    if verb in _AUX_KEEP:
        return verb
    if verb in _AUX_MAP:
        return _AUX_MAP[verb]
    if re.search(r"(s|x|z|ch|sh)$", verb):
        return verb + "es"
    if re.search(r"[^aeiou]y$", verb):
        return verb[:-1] + "ies"
    return verb + "s"


def reframe_third_person(text: str, persona: str) -> str:
    """Apply the documented first-person -> persona substitution table."""

    def repl(m: re.Match) -> str:
        token = m.group(0)
        lowered = token.lower()
        if lowered in ("i'm", "i’m"):
            return f"{persona} is"
        if lowered in ("i've", "i’ve"):
            return f"{persona} has"
        if lowered in ("i'll", "i’ll"):
            return f"{persona} will"
        if lowered in ("i'd", "i’d"):
            return f"{persona} would"
        if token == "I":
            return persona
        if token.startswith("I") and token[1].isspace():
            sep_and_word = token[1:]
            word = sep_and_word.lstrip()
            sep = sep_and_word[: len(sep_and_word) - len(word)]
            if word[0].isupper():
                return f"{persona}{sep}{word}"
            return f"{persona}{sep}{_third_person_verb(word)}"
        if lowered == "my" or lowered == "mine":
            return f"{persona}'s"
        if lowered == "me":
            return persona
        if lowered == "myself":
            return "themselves"
        return token

    return _FORWARD_RE.sub(repl, text)


# -- persona selection -------------------------------------------------------


def pick_persona(session: RedactionSession, personas: tuple[str, ...] | None = None) -> str:
    """Reuse the session's persona, else the first name disjoint from its known people."""
    registered = session.persona_names()
    if registered:
        return registered[0]
    personas = personas or load_personas()
    known = session.person_name_surfaces()
    taken = {p.lower() for p in registered}
    for candidate in personas:
        if candidate.lower() in known or candidate.lower() in taken:
            continue
        return candidate
    raise RuntimeError("fabricated-name list exhausted")


# -- surrogate builders -------------------------------------------------------


def _assemble(persona: str, body: str) -> tuple[str, str]:
    body = body.strip()
    terminal = "" if body.endswith((".", "!", "?")) else "."
    surrogate_text = f"My friend {persona} reports the following: {body}{terminal}"
    instruction = f"Please generate advice directed to {persona}."
    return surrogate_text, instruction


def make_surrogate_template(
    prompt: str,
    session: RedactionSession,
    triggered: frozenset[str] = frozenset(),
    personas: tuple[str, ...] | None = None,
) -> SurrogatePrompt:
    """Deterministic template surrogate; registers the persona in the session."""
    persona = pick_persona(session, personas)
    body = reframe_third_person(prompt.strip(), persona)
    surrogate_text, instruction = _assemble(persona, body)
    session.register_persona(persona)
    return SurrogatePrompt(
        persona=persona,
        surrogate_text=surrogate_text,
        instruction_suffix=instruction,
        source_categories=triggered,
        generator=GENERATOR_TEMPLATE,
    )


_FIRST_PERSON_RE = re.compile(
    r"\bI\b|I'm|I’m|I've|I’ve|I'll|I’ll|I'd|I’d"
    r"|\b[Mm]y\b|\b[Mm]e\b|\b[Mm]ine\b|\b[Mm]yself\b"
)


class SurrogateBackend:
    """Local completion backend speaking the generic chat-completion format."""

    def __init__(
        self,
        base_url: str,
        model: str,
        path: str = "/v1/chat/completions",
        timeout: float = 10.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.model = model
        self.path = path
        self._client = httpx.Client(base_url=base_url, timeout=timeout, transport=transport)

    def generate(self, prompt: str, persona: str) -> str:
        system = surrogate_system_prompt().replace("{persona}", persona)
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": prompt},
            ],
        }
        try:
            response = self._client.post(self.path, json=payload)
            response.raise_for_status()
        except (httpx.TransportError, httpx.HTTPStatusError) as exc:
            raise BackendUnavailable(f"surrogate backend: {exc}") from exc
        return response.json()["choices"][0]["message"]["content"]


def validate_surrogate(text: str, persona: str, session: RedactionSession) -> str | None:
    """Reason the candidate surrogate is unusable, or None when it passes."""
    if persona not in text:
        return "persona missing from surrogate"
    # The required shape itself opens with "My friend <persona>"; only other
    # first-person tokens count as leaked framing.
    body = text.replace(f"My friend {persona}", "")
    if _FIRST_PERSON_RE.search(body):
        return "surrogate keeps first-person framing"
    leaks = leaking_surfaces(text, session.originals())
    if leaks:
        return f"surrogate leaks {len(leaks)} redacted surface(s)"
    return None


def make_surrogate_llm(
    prompt: str,
    session: RedactionSession,
    backend: SurrogateBackend,
    triggered: frozenset[str] = frozenset(),
    personas: tuple[str, ...] | None = None,
) -> SurrogatePrompt:
    """LLM-generated surrogate with validation; falls back to the template."""
    persona = pick_persona(session, personas)
    try:
        candidate = backend.generate(prompt.strip(), persona).strip()
    except BackendUnavailable as exc:
        logger.warning("surrogate backend unavailable, using template: %s", exc)
        fallback = make_surrogate_template(prompt, session, triggered, personas)
        return dataclasses.replace(fallback, degraded=True)

    problem = validate_surrogate(candidate, persona, session)
    if problem is not None:
        logger.warning("surrogate rejected (%s), using template", problem)
        return make_surrogate_template(prompt, session, triggered, personas)

    session.register_persona(persona)
    instruction = f"Please generate advice directed to {persona}."
    return SurrogatePrompt(
        persona=persona,
        surrogate_text=candidate,
        instruction_suffix=instruction,
        source_categories=triggered,
        generator=GENERATOR_LOCAL_MODEL,
    )


# -- response deframing --------------------------------------------------------

_INVERSE_AGREEMENT = {"is": "are", "was": "were", "has": "have", "does": "do"}


def deframe_response(text: str, persona: str) -> str:
    """Rewrite persona references back to second person.

    Inverse table: "<persona>'s" -> "your"; "<persona> is/was/has/does" fixes
    agreement; bare "<persona>" -> "You" at a sentence start, "you" elsewhere.
    Output contains no occurrence of the persona. Matching is case-insensitive
    so a lowercased echo of the persona is still removed.
    """
    if not persona:
        return text
    p = re.escape(persona)
    pattern = re.compile(
        rf"(?<![A-Za-z])(?:{p}['’]s|{p}[ \t]+(?:is|was|has|does)\b|{p})(?![A-Za-z])",
        re.IGNORECASE,
    )

    def at_sentence_start(pos: int) -> bool:
        i = pos - 1
        while i >= 0 and text[i].isspace():
            i -= 1
        return i < 0 or text[i] in ".!?"

    def repl(m: re.Match) -> str:
        token = m.group(0)
        rest = token[len(persona):]
        if rest.startswith(("'", "’")):
            return "your"
        you = "You" if at_sentence_start(m.start()) else "you"
        if rest:
            verb = rest.strip().lower()
            return f"{you} {_INVERSE_AGREEMENT[verb]}"
        return you

    return pattern.sub(repl, text)
