"""Detector evaluation over annotated corpora, plus the synthetic-corpus generator.

A corpus directory holds one ``<case>.txt`` per case and a ``<case>.spans``
sidecar: tab-separated ``start  end  category  surface`` lines, offsets in
Unicode scalar values, ``#`` for comments (format: docs/corpus-format.md).
A prediction counts only when (start, end, category) match a gold span
exactly. Metrics are reported per category plus a micro average.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .categories import PiiCategory, parse_category
from .detection import detect
from .errors import CorpusError
from .rules import RuleSet
from .spans import EntitySpan

BUNDLED_CORPUS = "builtin"
GENERATOR_SEED = 20250811


@dataclass(frozen=True)
class GoldSpan:
    start: int
    end: int
    category: PiiCategory


@dataclass
class CorpusCase:
    case_id: str
    text: str
    gold: list[GoldSpan]


@dataclass
class CategoryMetrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0


def _parse_sidecar(case_id: str, text: str, sidecar: str) -> list[GoldSpan]:
    gold = []
    for idx, raw in enumerate(sidecar.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise CorpusError(
                f"{case_id}.spans line {idx}: expected 'start<TAB>end<TAB>category<TAB>surface'"
            )
        try:
            start, end = int(parts[0]), int(parts[1])
            category = parse_category(parts[2])
        except ValueError as exc:
            raise CorpusError(f"{case_id}.spans line {idx}: {exc}") from exc
        if not (0 <= start < end <= len(text)):
            raise CorpusError(f"{case_id}.spans line {idx}: range outside the text")
        if text[start:end] != parts[3]:
            raise CorpusError(
                f"{case_id}.spans line {idx}: surface {parts[3]!r} does not match the text"
            )
        gold.append(GoldSpan(start, end, category))
    return gold


def load_corpus_dir(path: Path) -> list[CorpusCase]:
    cases = []
    for txt in sorted(path.glob("*.txt")):
        case_id = txt.stem
        sidecar = txt.with_suffix(".spans")
        if not sidecar.exists():
            raise CorpusError(f"case {case_id} has no .spans sidecar")
        text = txt.read_text(encoding="utf-8")
        cases.append(CorpusCase(case_id, text, _parse_sidecar(case_id, text, sidecar.read_text(encoding="utf-8"))))
    if not cases:
        raise CorpusError(f"corpus directory {path} holds no cases")
    return cases


def load_corpus(spec: str | Path) -> list[CorpusCase]:
    """Load a corpus directory; the name 'builtin' loads the bundled corpus."""
    if str(spec) == BUNDLED_CORPUS:
        root = resources.files("privgate.data").joinpath("corpus")
        with resources.as_file(root) as path:
            return load_corpus_dir(Path(path))
    path = Path(spec)
    if not path.is_dir():
        raise CorpusError(f"{path} is not a corpus directory")
    return load_corpus_dir(path)


def evaluate(cases: list[CorpusCase], rules: RuleSet) -> dict[str, CategoryMetrics]:
    """Strict-span precision/recall/F1 per category, with a 'micro' rollup."""
    metrics: dict[str, CategoryMetrics] = {}

    def bucket(key: str) -> CategoryMetrics:
        return metrics.setdefault(key, CategoryMetrics())

    for case in cases:
        predicted = detect(case.text, rules)
        gold_keys = {(g.start, g.end, g.category.key) for g in case.gold}
        pred_keys = {(s.start, s.end, s.category.key) for s in predicted}
        for start, end, key in gold_keys & pred_keys:
            bucket(key).tp += 1
        for start, end, key in pred_keys - gold_keys:
            bucket(key).fp += 1
        for start, end, key in gold_keys - pred_keys:
            bucket(key).fn += 1

    micro = CategoryMetrics(
        tp=sum(m.tp for m in metrics.values()),
        fp=sum(m.fp for m in metrics.values()),
        fn=sum(m.fn for m in metrics.values()),
    )
    metrics["micro"] = micro
    return metrics


def audit_sample(cases: list[CorpusCase], rules: RuleSet, n: int, seed: int = 7) -> list[str]:
    """Human-auditable report lines for n randomly chosen cases."""
    rng = random.Random(seed)
    chosen = rng.sample(cases, min(n, len(cases)))
    lines = []
    for case in chosen:
        predicted = detect(case.text, rules)
        lines.append(f"== {case.case_id}: {case.text}")
        for g in case.gold:
            lines.append(f"   gold {g.category.key} [{g.start},{g.end}) {case.text[g.start:g.end]!r}")
        for s in predicted:
            lines.append(f"   pred {s.category.key} [{s.start},{s.end}) {s.surface!r}")
    return lines


# -- synthetic corpus generator --------------------------------------------------
#
# Deterministic template filler; the bundled corpus under data/corpus/ was
# produced by generate_corpus(seed=GENERATOR_SEED) and is committed as-is.
# Contextual tails carry exactly one lexicon trigger so the annotated window
# is unambiguous; a fixed share of person-name cases uses out-of-lexicon
# names to keep the recall numbers honest.

_GIVEN = [
    "John", "Mary", "Kevin", "Sarah", "David", "Laura", "Brian", "Emma",
    "Peter", "Nancy", "Oliver", "Grace", "Henry", "Alice", "Thomas", "Helen",
]
_HARD_NAMES = ["Yusuf Okonkwo", "Ilka Szabo", "Bren Callahan", "Odile Ferrant", "Tariq Mensah"]
_SURNAMES = [
    "Smith", "Johnson", "Brown", "Miller", "Davis", "Wilson", "Clark",
    "Lewis", "Walker", "Hall", "Young", "King", "Wright", "Scott", "Baker",
]
_INSTITUTIONS = [
    "MIT", "Harvard University", "Stanford", "Yale University", "Princeton",
    "Google", "Microsoft", "Amazon", "Boston University", "Caltech",
    "Cornell University", "UCLA", "Oracle", "Netflix", "Georgia Tech",
]
_LOCATIONS = [
    "Boston", "Cambridge", "New York", "Seattle", "Chicago", "Portland",
    "Denver", "London", "Paris", "Berlin", "Tokyo", "Toronto", "Madrid",
    "Dublin", "Sydney",
]
_EMAIL_USERS = ["alice", "bob.jones", "carol_w", "dan99", "eve.adams", "frank"]
_EMAIL_HOSTS = ["example.com", "mail.org", "work.net", "campus.edu"]

# (tail text, the single trigger it contains, category key)
_CONTEXT_TAILS = [
    ("coping with asthma most evenings", "asthma", "Medical"),
    ("prescribed a low dose yesterday", "prescribed", "Medical"),
    ("managing a migraine most evenings", "migraine", "Medical"),
    ("recovering from surgery next week", "surgery", "Medical"),
    ("struggling with anxiety at work", "anxiety", "MentalHealth"),
    ("feeling depressed most mornings", "depressed", "MentalHealth"),
    ("seeing a therapist every week", "therapist", "MentalHealth"),
    ("exhausted by the smallest errands", "exhausted", "MentalHealth"),
    ("behind on my mortgage payments", "mortgage", "Financial"),
    ("carrying too much credit card balance", "credit card", "Financial"),
    ("worried about my credit score", "credit score", "Financial"),
    ("trying to grow my savings slowly", "savings", "Financial"),
    ("booked a flight to see family", "flight", "Travel"),
    ("building an itinerary for spring", "itinerary", "Travel"),
    ("waiting on a hotel confirmation", "hotel", "Travel"),
    ("planning a long road trip soon", "road trip", "Travel"),
]
_FILLER = [
    "The weather stayed mild all week.",
    "Nothing else changed since the last update.",
    "The meeting ran long and ended without notes.",
    "Dinner was quiet and the house settled early.",
    "The garden needs water twice a day in summer.",
]

_TOKEN_RE = re.compile(r"\S+")


def _context_window_span(text: str, trigger_start: int, trigger_end: int, window: int = 6):
    """Annotate the documented +/- N token window around a trigger occurrence."""
    tokens = [(m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]
    first = last = 0
    for i, (s, e) in enumerate(tokens):
        if s <= trigger_start < e:
            first = i
        if s <= trigger_end - 1 < e:
            last = i
    first = max(0, first - window)
    last = min(len(tokens) - 1, last + window)
    return tokens[first][0], tokens[last][1]


def generate_corpus(out_dir: Path, n: int = 220, seed: int = GENERATOR_SEED) -> int:
    """Write n annotated cases into out_dir; returns the number written."""
    rng = random.Random(seed)
    out_dir.mkdir(parents=True, exist_ok=True)

    def phone() -> str:
        return f"{rng.randint(210, 989)}-555-{rng.randint(0, 9999):04d}"

    def ssn() -> str:
        return f"{rng.randint(100, 899)}-{rng.randint(10, 99)}-{rng.randint(1000, 9999)}"

    def email() -> str:
        return f"{rng.choice(_EMAIL_USERS)}@{rng.choice(_EMAIL_HOSTS)}"

    def path_() -> str:
        user = rng.choice(_EMAIL_USERS).replace(".", "")
        return f"/home/{user}/projects/report-{rng.randint(1, 99)}.txt"

    written = 0
    for i in range(n):
        kind = i % 11
        prefix = suffix = ""
        surface = key = None
        if kind == 0:
            surface, key = f"{rng.choice(_GIVEN)} {rng.choice(_SURNAMES)}", "PersonName"
            prefix, suffix = "My name is ", " and I sent the files."
        elif kind == 1:
            # A quarter of the sentence-start cases use out-of-lexicon names.
            if i % 44 == 1:
                surface = rng.choice(_HARD_NAMES)
            else:
                surface = f"{rng.choice(_GIVEN)} {rng.choice(_SURNAMES)}"
            key = "PersonName"
            suffix = " signed the lease yesterday."
        elif kind == 2:
            surface, key = rng.choice(_INSTITUTIONS), "Institution"
            prefix, suffix = "I study at ", " this semester."
        elif kind == 3:
            surface, key = rng.choice(_LOCATIONS), "Location"
            prefix, suffix = "We moved to ", " two years ago."
        elif kind == 4:
            surface, key = email(), "Email"
            prefix, suffix = "Reach me at ", " anytime."
        elif kind == 5:
            surface, key = phone(), "PhoneNumber"
            prefix, suffix = "Call me at ", " after lunch."
        elif kind == 6:
            surface, key = ssn(), "GovernmentId"
            prefix, suffix = "The form lists ", " as my id."
        elif kind == 7:
            surface, key = path_(), "DirectoryPath"
            prefix, suffix = "The draft lives in ", " on my laptop."

        gold: list[tuple[int, int, str]] = []
        if kind in (8, 9):
            tail, trigger, ckey = _CONTEXT_TAILS[(i // 11 + kind) % len(_CONTEXT_TAILS)]
            prefix = "I have been " if kind == 8 else "Lately I am "
            text = f"{prefix}{tail}."
            trigger_start = text.index(trigger)
            s, e = _context_window_span(text, trigger_start, trigger_start + len(trigger))
            gold.append((s, e, ckey))
        elif kind == 10:
            text = _FILLER[(i // 11) % len(_FILLER)]
        else:
            assert surface is not None and key is not None
            text = f"{prefix}{surface}{suffix}"
            gold.append((len(prefix), len(prefix) + len(surface), key))

        case_id = f"case{i:03d}"
        (out_dir / f"{case_id}.txt").write_text(text, encoding="utf-8")
        lines = ["# start\tend\tcategory\tsurface"]
        for s, e, gkey in gold:
            lines.append(f"{s}\t{e}\t{gkey}\t{text[s:e]}")
        (out_dir / f"{case_id}.spans").write_text("\n".join(lines) + "\n", encoding="utf-8")
        written += 1
    return written
