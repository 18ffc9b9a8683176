"""PII category taxonomy: direct identifiers, contextual categories, and custom labels."""

from __future__ import annotations

from dataclasses import dataclass

# Tags in declaration order; the order doubles as the final precedence
# tie-break when overlapping spans are otherwise equal.
TAG_ORDER = (
    "PersonName",
    "Institution",
    "Location",
    "PhoneNumber",
    "Email",
    "GovernmentId",
    "DirectoryPath",
    "Medical",
    "MentalHealth",
    "Financial",
    "Travel",
    "Custom",
)

DIRECT_TAGS = frozenset(
    {
        "PersonName",
        "Institution",
        "Location",
        "PhoneNumber",
        "Email",
        "GovernmentId",
        "DirectoryPath",
    }
)

CONTEXTUAL_TAGS = frozenset({"Medical", "MentalHealth", "Financial", "Travel"})

# Noun used when rendering placeholder labels ("Person A", "School B", ...).
PLACEHOLDER_NOUNS = {
    "PersonName": "Person",
    "Institution": "School",
    "Location": "Place",
    "PhoneNumber": "Phone",
    "Email": "Email",
    "GovernmentId": "ID",
    "DirectoryPath": "Path",
    "Medical": "Medical Detail",
    "MentalHealth": "Emotional Detail",
    "Financial": "Financial Detail",
    "Travel": "Trip",
}


@dataclass(frozen=True)
class PiiCategory:
    """One detection category; ``Custom`` carries a configuration-defined label."""

    tag: str
    label: str | None = None

    def __post_init__(self):
        if self.tag not in TAG_ORDER:
            raise ValueError(f"unknown category tag {self.tag!r}")
        if self.tag == "Custom":
            if not self.label:
                raise ValueError("Custom category requires a non-empty label")
        elif self.label is not None:
            raise ValueError(f"{self.tag} does not take a label")

    @classmethod
    def custom(cls, label: str) -> "PiiCategory":
        return cls("Custom", label)

    @property
    def key(self) -> str:
        """Stable string form used on the wire and in stored records."""
        return f"Custom:{self.label}" if self.tag == "Custom" else self.tag

    @property
    def noun(self) -> str:
        """Placeholder noun for this category ('Person', 'School', ...)."""
        if self.tag == "Custom":
            return self.label  # type: ignore[return-value]
        return PLACEHOLDER_NOUNS[self.tag]

    @property
    def is_builtin_contextual(self) -> bool:
        return self.tag in CONTEXTUAL_TAGS

    def order_index(self) -> tuple[int, str]:
        """Precedence position: declaration order, customs tie-broken by label."""
        return (TAG_ORDER.index(self.tag), self.label or "")

    def __str__(self) -> str:
        return self.key


def parse_category(key: str) -> PiiCategory:
    """Inverse of :attr:`PiiCategory.key`; raises ValueError on unknown keys."""
    if key.startswith("Custom:"):
        return PiiCategory.custom(key[len("Custom:"):])
    return PiiCategory(key)


# Singletons for the builtin categories.
PERSON_NAME = PiiCategory("PersonName")
INSTITUTION = PiiCategory("Institution")
LOCATION = PiiCategory("Location")
PHONE_NUMBER = PiiCategory("PhoneNumber")
EMAIL = PiiCategory("Email")
GOVERNMENT_ID = PiiCategory("GovernmentId")
DIRECTORY_PATH = PiiCategory("DirectoryPath")
MEDICAL = PiiCategory("Medical")
MENTAL_HEALTH = PiiCategory("MentalHealth")
FINANCIAL = PiiCategory("Financial")
TRAVEL = PiiCategory("Travel")
