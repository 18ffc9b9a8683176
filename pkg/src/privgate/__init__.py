"""privgate: a local privacy gateway for LLM chat traffic.

Detects PII in prompts and documents, swaps it for session-consistent
placeholders before anything reaches an upstream model, remaps placeholders
back to originals in replies (streamed or buffered), and can wrap sensitive
prompts in third-person surrogate personas.
"""

from .categories import PiiCategory, parse_category
from .detection import detect, detect_with_backend, DetectionResult, RulesBackend
from .documents import extract_text, load_document, redact_document, restore_document
from .errors import PrivgateError
from .mapper import (
    RedactionSession,
    SecuredPrompt,
    redact,
    register_manual,
    rehydrate,
)
from .rules import RuleSet, default_rules, load_rules, parse_rules
from .smokescreen import (
    SmokescreenPolicy,
    SurrogatePrompt,
    deframe_response,
    make_surrogate_llm,
    make_surrogate_template,
    should_smokescreen,
)
from .spans import EntitySpan, resolve_overlaps
from .store import SessionStore
from .streaming import StreamRehydrator

__version__ = "0.1.0"

__all__ = [
    "DetectionResult",
    "EntitySpan",
    "PiiCategory",
    "PrivgateError",
    "RedactionSession",
    "RuleSet",
    "RulesBackend",
    "SecuredPrompt",
    "SessionStore",
    "SmokescreenPolicy",
    "StreamRehydrator",
    "SurrogatePrompt",
    "deframe_response",
    "default_rules",
    "detect",
    "detect_with_backend",
    "extract_text",
    "load_document",
    "load_rules",
    "make_surrogate_llm",
    "make_surrogate_template",
    "parse_category",
    "parse_rules",
    "redact",
    "redact_document",
    "register_manual",
    "rehydrate",
    "resolve_overlaps",
    "restore_document",
    "should_smokescreen",
    "__version__",
]
