"""Named-entity mentions and per-transcript keyword selection.

The bundled recognizer is a capitalization heuristic; an external tagger can
be plugged in through :class:`ExternalRecognizer`, which speaks line-delimited
JSON over a subprocess's standard streams.
"""

from __future__ import annotations

import json
import logging
import re
import shlex
import subprocess
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import RecognizerUnavailable
from .ingest import Transcript

log = logging.getLogger(__name__)

PERSON, ORG, PLACE, OTHER, EXCLUDED = "PERSON", "ORG", "PLACE", "OTHER", "EXCLUDED"
LABELS = (PERSON, ORG, PLACE, OTHER, EXCLUDED)

MAX_KEYWORDS = 5
MIN_SENTENCES = 3

_MONTHS = ("January February March April May June July August September October November December "
           "Jan Feb Mar Apr Jun Jul Aug Sep Sept Oct Nov Dec")
_WEEKDAYS = "Monday Tuesday Wednesday Thursday Friday Saturday Sunday"
_DIRECTIONS = ("North South East West Northeast Northwest Southeast Southwest "
               "Northern Southern Eastern Western")
_NUMBER_WORDS = ("one two three four five six seven eight nine ten eleven twelve twenty thirty forty "
                 "fifty hundred thousand million billion trillion first second third fourth fifth "
                 "half dozen")

_alt = lambda words: "|".join(sorted(words.split(), key=len, reverse=True))  # noqa: E731

# Order matters: longer, more specific families first.
EXCLUSION_PATTERNS = [
    ("money", re.compile(r"\$\s?\d[\d,]*(?:\.\d+)?(?:\s+(?:million|billion|trillion|thousand))?"
                         r"|\b\d[\d,]*(?:\.\d+)?\s+(?:dollars|cents)\b", re.I)),
    ("percent", re.compile(r"\b\d[\d,]*(?:\.\d+)?\s?(?:%|percent\b|per cent\b)", re.I)),
    ("time", re.compile(r"\b\d{1,2}(?::\d{2})?\s?(?:a\.m\.|p\.m\.|am\b|pm\b)"
                        r"|\b\d{1,2}:\d{2}\b|\b(?:noon|midnight)\b", re.I)),
    ("date", re.compile(rf"\b(?:{_alt(_WEEKDAYS)}|{_alt(_MONTHS)})\b(?:\s+\d{{1,2}}(?:st|nd|rd|th)?)?"
                        rf"(?:,?\s+\d{{4}})?")),
    ("direction", re.compile(rf"\b(?:{_alt(_DIRECTIONS)})\b(?!\s+[A-Z])")),
    ("quantity", re.compile(rf"\b\d[\d,]*(?:\.\d+)?(?:st|nd|rd|th)?\b(?:\s+(?:{_alt(_NUMBER_WORDS)}))?"
                            rf"|\b(?:{_alt(_NUMBER_WORDS)})\b", re.I)),
]

# Capitalized words that are never entity material on their own.
STOPWORDS = frozenset("""
a an the and or but nor so yet for of in on at to by from with about as into over under after before
i i'm i've i'll i'd me my we we're we've us our you you're your he he's him his she she's her it it's its
they they're them their this that these those there here what who whom whose which when where why how
is are was were be been being do does did have has had will would shall should can could may might must
not no yes if then than also just now well okay ok oh so very all any some every each both many much more
most other another such only own same too mr mrs ms dr sir madam tonight today tomorrow yesterday
let let's please thank thanks hello hi good great right look listen but because and
""".split())

TITLES = frozenset("""
president vice senator sen. governor gov. mayor representative rep. congressman congresswoman speaker
secretary mr. mrs. ms. dr. judge justice general gen. attorney director chairman chairwoman leader
""".split())

ORG_CUES = frozenset("""
house senate congress department committee party news network agency administration court council
university association bureau corporation company inc. corp. campaign democrats republicans democratic
republican commission institute foundation organization union
""".split())

PLACES = frozenset("""
america united states china russia iran iraq israel mexico canada ukraine europe asia africa
washington california texas florida new york georgia michigan pennsylvania wisconsin arizona ohio
minnesota nevada north carolina virginia iowa chicago seattle atlanta portland minneapolis wuhan
kentucky louisiana colorado oregon illinois massachusetts jersey
""".split())


def canonicalize(surface: str, aliases: Mapping[str, str] | None = None) -> str:
    """Normalize an entity surface form.

    >>> canonicalize("the White House")
    'White House'
    >>> canonicalize("  JOE   BIDEN ")
    'Joe Biden'
    """
    s = " ".join(surface.split())
    s = s.strip(" \t\"',;:!?()[]")
    if not re.search(r"(?:^|\s)(?:[A-Za-z]\.){2,}$", s):
        s = s.rstrip(".")
    s = s.lstrip(".")
    s = re.sub(r"^(?:the|a|an)\s+", "", s, flags=re.I)
    s = re.sub(r"(?:'s|’s|s'|')$", lambda m: "s" if m.group(0) == "s'" else "", s)
    tokens = s.split()
    if len(tokens) > 1:
        shout = s.isupper()
        tokens = [t[:1].upper() + (t[1:].lower() if shout else t[1:]) for t in tokens]
        s = " ".join(tokens)
    if aliases:
        s = aliases.get(s, s)
    return s or surface.strip()


@dataclass(frozen=True)
class EntityMention:
    surface: str
    canonical: str
    label: str
    transcript_id: str
    statement_index: int
    sentence_index: int

    def __post_init__(self):
        if not self.canonical:
            raise ValueError("canonical form must be non-empty")
        if self.label not in LABELS:
            raise ValueError(f"unknown entity label {self.label!r}")


@dataclass(frozen=True)
class Keyword:
    text: str
    count: int
    sentences: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class KeywordAssignment:
    """Keywords chosen for one transcript; the selection rules are checked on construction."""

    transcript_id: str
    keywords: tuple[Keyword, ...]
    program: str = ""
    network: str = ""
    month: str = ""

    def __post_init__(self):
        if len(self.keywords) > MAX_KEYWORDS:
            raise ValueError(f"at most {MAX_KEYWORDS} keywords allowed, got {len(self.keywords)}")
        for kw in self.keywords:
            if len(set(kw.sentences)) < MIN_SENTENCES:
                raise ValueError(f"keyword {kw.text!r} is supported by fewer than {MIN_SENTENCES} sentences")
        order = [(-kw.count, kw.text) for kw in self.keywords]
        if order != sorted(order):
            raise ValueError("keywords must be sorted by count descending, then text")

    @property
    def texts(self) -> list[str]:
        return [kw.text for kw in self.keywords]

    def to_json(self) -> dict:
        return {
            "transcript_id": self.transcript_id,
            "program": self.program,
            "network": self.network,
            "month": self.month,
            "keywords": [{"text": k.text, "count": k.count, "sentences": [list(r) for r in k.sentences]}
                         for k in self.keywords],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KeywordAssignment":
        kws = tuple(Keyword(k["text"], int(k["count"]), tuple(tuple(r) for r in k["sentences"]))
                    for k in obj["keywords"])
        return cls(obj["transcript_id"], kws, obj.get("program", ""), obj.get("network", ""), obj.get("month", ""))


# -- recognizers -------------------------------------------------------------

@dataclass(frozen=True)
class Span:
    text: str
    label: str
    start: int
    end: int


class EntityRecognizer(Protocol):
    def __call__(self, sentence: str, context: "RecognizerContext") -> list[Span]: ...


@dataclass
class RecognizerContext:
    """Transcript-level facts a sentence-level recognizer may consult."""

    midsentence_capitals: frozenset = frozenset()


_TOKEN_RE = re.compile(r"[A-Za-z][\w'’.\-&]*")


def exclusion_spans(sentence: str) -> list[Span]:
    spans: list[Span] = []
    for _, pattern in EXCLUSION_PATTERNS:
        for m in pattern.finditer(sentence):
            a, b = m.start(), m.end()
            if any(a < s.end and s.start < b for s in spans):
                continue
            spans.append(Span(m.group(0).strip(), EXCLUDED, a, b))
    return sorted(spans, key=lambda s: s.start)


def _strip_trailing(tok: str) -> str:
    tok = tok.rstrip("-&")
    # keep the final period of dotted acronyms such as "U.S."
    if tok.endswith(".") and "." not in tok[:-1]:
        tok = tok[:-1]
    return tok


def _clean_token(tok: str) -> str:
    return re.sub(r"(?:'s|’s|')$", "", _strip_trailing(tok))


def _is_capitalized(tok: str) -> bool:
    clean = _clean_token(tok)
    if len(clean) > 1 and clean.isupper():
        return True  # acronyms such as "WHO" shadow stopwords
    return tok[:1].isupper() and clean.lower() not in STOPWORDS


def _guess_label(tokens: list[str], prev: str | None) -> str:
    low = [_clean_token(t).lower() for t in tokens]
    if prev is not None and prev.lower() in TITLES:
        return PERSON
    if low[0] in TITLES and len(tokens) > 1:
        return PERSON
    if " ".join(low) in PLACES or all(t in PLACES for t in low):
        return PLACE
    if any(t in ORG_CUES for t in low) or all(_clean_token(t).replace(".", "").isupper() and len(t) > 1
                                             for t in tokens):
        return ORG
    if len(tokens) <= 3 and all(t[:1].isupper() for t in tokens):
        return PERSON
    return OTHER


class HeuristicRecognizer:
    """Maximal runs of capitalized tokens, excluding sentence-initial words.

    A sentence-initial token still counts when the same word appears
    capitalized mid-sentence somewhere else in the transcript.
    """

    name = "heuristic"

    def __call__(self, sentence: str, context: RecognizerContext | None = None) -> list[Span]:
        context = context or RecognizerContext()
        excluded = exclusion_spans(sentence)
        tokens = [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(sentence)]
        spans = list(excluded)

        run: list[tuple[str, int, int]] = []
        prev_word: str | None = None

        def flush():
            nonlocal run
            if run:
                words = [t for t, _, _ in run]
                a, b = run[0][1], run[-1][2]
                text = _strip_trailing(sentence[a:b])
                spans.append(Span(text, _guess_label(words, prev_word), a, a + len(text)))
            run = []

        for idx, (tok, a, b) in enumerate(tokens):
            inside_excluded = any(s.start <= a < s.end for s in excluded)
            initial = idx == 0 or _sentence_initial(sentence, a)
            ok = (not inside_excluded and _is_capitalized(tok)
                  and (not initial or _clean_token(tok) in context.midsentence_capitals))
            # a run is broken by punctuation between tokens
            if run and (not ok or sentence[run[-1][2]:a].strip()):
                flush()
            if ok:
                if not run and idx > 0:
                    prev_word = _clean_token(tokens[idx - 1][0])
                elif not run:
                    prev_word = None
                run.append((tok, a, b))
        flush()
        return sorted(spans, key=lambda s: s.start)


def _sentence_initial(sentence: str, pos: int) -> bool:
    return not sentence[:pos].strip(" \"'([")


def midsentence_capitals(transcript: Transcript) -> frozenset:
    words = set()
    for _, _, sent in transcript.sentences():
        toks = list(_TOKEN_RE.finditer(sent))
        for m in toks[1:]:
            if _is_capitalized(m.group(0)):
                words.add(_clean_token(m.group(0)))
    return frozenset(words)


_SPACY_LABELS = {
    "PERSON": PERSON, "ORG": ORG, "NORP": ORG, "GPE": PLACE, "LOC": PLACE, "FAC": PLACE,
    "DATE": EXCLUDED, "TIME": EXCLUDED, "PERCENT": EXCLUDED, "MONEY": EXCLUDED,
    "QUANTITY": EXCLUDED, "ORDINAL": EXCLUDED, "CARDINAL": EXCLUDED,
}


class ExternalRecognizer:
    """Adapter for an external tagger process.

    Protocol, one JSON object per line each way:
    ``{"sentence": ...}`` in, ``{"entities": [{"text", "label", "start", "end"}]}`` out.
    Tagger labels are mapped onto the five internal classes; the exclusion
    regexes are applied on top so the filtering does not depend on the tagger.
    """

    def __init__(self, command: str | Sequence[str], timeout: float = 30.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.name = "external:" + " ".join(self.command)
        self._proc: subprocess.Popen | None = None

    def _ensure(self):
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                              text=True, bufsize=1)
            except OSError as exc:
                raise RecognizerUnavailable(f"cannot start {self.command!r}: {exc}") from exc
        return self._proc

    def __call__(self, sentence: str, context: RecognizerContext | None = None) -> list[Span]:
        proc = self._ensure()
        try:
            proc.stdin.write(json.dumps({"sentence": sentence}) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
            reply = json.loads(line)
            ents = reply["entities"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            self.close()
            raise RecognizerUnavailable(f"external recognizer failed: {exc}") from exc

        excluded = exclusion_spans(sentence)
        spans = list(excluded)
        for e in ents:
            a, b = int(e["start"]), int(e["end"])
            label = _SPACY_LABELS.get(str(e.get("label", "")).upper(), OTHER)
            if label != EXCLUDED and any(a < s.end and s.start < b for s in excluded):
                continue
            spans.append(Span(e["text"], label, a, b))
        return sorted(spans, key=lambda s: s.start)

    def close(self):
        if self._proc is not None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=self.timeout)
            except Exception:  # noqa: BLE001
                self._proc.kill()
            self._proc = None


class FallbackRecognizer:
    """Try ``primary``; on :class:`RecognizerUnavailable` switch to ``fallback`` for good."""

    def __init__(self, primary, fallback):
        self.primary, self.fallback = primary, fallback
        self.failed = False
        self.name = primary.name

    def __call__(self, sentence, context=None):
        if not self.failed:
            try:
                return self.primary(sentence, context)
            except RecognizerUnavailable as exc:
                log.warning("%s; falling back to %s", exc, self.fallback.name)
                self.failed = True
        return self.fallback(sentence, context)


def make_recognizer(choice: str = "heuristic", fallback: bool = True):
    if choice == "heuristic":
        return HeuristicRecognizer()
    if choice.startswith("external:"):
        ext = ExternalRecognizer(choice[len("external:"):])
        return FallbackRecognizer(ext, HeuristicRecognizer()) if fallback else ext
    raise ValueError(f"unknown recognizer {choice!r}")


# -- operations --------------------------------------------------------------

def recognize_entities(transcript: Transcript, recognizer=None,
                       aliases: Mapping[str, str] | None = None) -> list[EntityMention]:
    recognizer = recognizer or HeuristicRecognizer()
    ctx = RecognizerContext(midsentence_capitals(transcript))
    mentions = []
    for i, j, sent in transcript.sentences():
        for span in recognizer(sent, ctx):
            if span.label == EXCLUDED:
                canonical = " ".join(span.text.split())
            else:
                canonical = canonicalize(span.text, aliases)
            if not canonical:
                continue
            mentions.append(EntityMention(span.text, canonical, span.label, transcript.id, i, j))
    return mentions


def select_keywords(mentions: Iterable[EntityMention], transcript_id: str | None = None,
                    max_keywords: int = MAX_KEYWORDS, min_sentences: int = MIN_SENTENCES) -> KeywordAssignment:
    """Rank non-excluded entities by mention count, keep the top five, then
    drop those seen in fewer than three distinct sentences."""
    counts: dict[str, int] = defaultdict(int)
    refs: dict[str, set] = defaultdict(set)
    ids = set()
    for m in mentions:
        ids.add(m.transcript_id)
        if m.label == EXCLUDED:
            continue
        counts[m.canonical] += 1
        refs[m.canonical].add((m.statement_index, m.sentence_index))
    if len(ids) > 1:
        raise ValueError(f"mentions span several transcripts: {sorted(ids)}")
    if transcript_id is None:
        transcript_id = ids.pop() if ids else ""

    ranked = sorted(counts, key=lambda c: (-counts[c], c))[:max_keywords]
    keywords = tuple(Keyword(c, counts[c], tuple(sorted(refs[c]))) for c in ranked
                     if len(refs[c]) >= min_sentences)
    return KeywordAssignment(transcript_id, keywords)


def extract_keywords(transcript: Transcript, recognizer=None,
                     aliases: Mapping[str, str] | None = None) -> KeywordAssignment:
    mentions = recognize_entities(transcript, recognizer, aliases)
    ka = select_keywords(mentions, transcript.id)
    return KeywordAssignment(ka.transcript_id, ka.keywords, transcript.program, transcript.network,
                             transcript.month_key)
