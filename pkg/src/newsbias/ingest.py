"""Transcript parsing, sentence segmentation and monthly bucketing.

Canonical plain-text transcript format::

    PROGRAM: Tucker Carlson Tonight
    NETWORK: FOX
    DATE: 2020-04-15

    TUCKER CARLSON: Good evening. Welcome to the show.
    continuation lines are appended to the previous statement
    GUEST NAME: Thank you for having me.

The header is a block of ``KEY: value`` lines ended by the first blank line.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyBody, IngestError, MissingHeaderField, UnknownNetwork, UnparsableDate

log = logging.getLogger(__name__)

DEFAULT_NETWORKS = frozenset({"CNN", "FOX", "MSNBC"})
REQUIRED_FIELDS = ("PROGRAM", "NETWORK", "DATE")
UNKNOWN_SPEAKER = "UNKNOWN"

# lower-cased, with the trailing period
ABBREVIATIONS = frozenset("""
mr. mrs. ms. dr. prof. sr. jr. st. mt. ft. gen. gov. sen. rep. rev. hon. pres.
lt. col. capt. sgt. cmdr. adm. maj. supt. atty. amb. sec.
u.s. u.k. u.n. e.u. d.c. l.a. n.y. u.s.a.
a.m. p.m. e.g. i.e. etc. vs. v. no. inc. corp. co. ltd. dept. est. approx. fig.
jan. feb. mar. apr. jun. jul. aug. sep. sept. oct. nov. dec.
""".split())

_SPEAKER_RE = re.compile(r"^([A-Z][A-Z .\-]*?)\s*:(?:\s+|$)(.*)$")
_HEADER_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_ ]*?)\s*:\s*(.*)$")
_TERMINATOR_RE = re.compile(r"[.?!]+[\"')\]]*(?=\s|$)")
_WS_RE = re.compile(r"\s+")

_DATE_FORMATS = ("%Y-%m-%d", "%B %d, %Y", "%b %d, %Y", "%m/%d/%Y", "%d %B %Y")


@dataclass(frozen=True)
class TranscriptHeader:
    program_name: str
    network: str
    air_date: dt.date

    def __post_init__(self):
        if not self.program_name.strip():
            raise ValueError("program_name must be non-empty")


@dataclass(frozen=True)
class Statement:
    speaker: str
    text: str
    sentence_spans: tuple[tuple[int, int], ...]

    @classmethod
    def from_text(cls, speaker: str, text: str) -> "Statement":
        text = normalize_whitespace(text)
        return cls(speaker, text, tuple(segment_sentences(text)))

    @property
    def sentences(self) -> list[str]:
        return [self.text[a:b] for a, b in self.sentence_spans]


@dataclass(frozen=True)
class Transcript:
    id: str
    header: TranscriptHeader
    statements: tuple[Statement, ...]

    @property
    def month_key(self) -> str:
        return self.header.air_date.strftime("%Y-%m")

    @property
    def program(self) -> str:
        return self.header.program_name

    @property
    def network(self) -> str:
        return self.header.network

    @property
    def program_id(self) -> str:
        return program_id(self.header.network, self.header.program_name)

    def sentences(self):
        """Yield ``(statement_index, sentence_index, sentence_text)`` in document order."""
        for i, st in enumerate(self.statements):
            for j, (a, b) in enumerate(st.sentence_spans):
                yield i, j, st.text[a:b]

    def sentence(self, statement_index: int, sentence_index: int) -> str:
        st = self.statements[statement_index]
        a, b = st.sentence_spans[sentence_index]
        return st.text[a:b]


def program_id(network: str, program_name: str) -> str:
    """Stable program identifier; networks never contain a colon."""
    return f"{network}:{program_name}"


def split_program_id(pid: str) -> tuple[str, str]:
    network, _, name = pid.partition(":")
    return network, name


def normalize_whitespace(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


def _is_abbreviation(text: str, period_end: int) -> bool:
    # period_end is the index just past a single '.'
    start = period_end - 1
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    token = text[start:period_end].lstrip("\"'([").lower()
    if token in ABBREVIATIONS:
        return True
    # single initials such as the "J." in "Donald J. Trump"
    return len(token) == 2 and token[0].isalpha()


def segment_sentences(text: str) -> list[tuple[int, int]]:
    """Split ``text`` into sentence spans.

    A sentence ends at a run of ``.``/``?``/``!`` (optionally followed by
    closing quotes or brackets) that is followed by whitespace or the end of
    the text, unless the run is a single period closing a known abbreviation.
    Text after the last terminator becomes a final sentence.
    """
    spans = []
    start = 0
    for m in _TERMINATOR_RE.finditer(text):
        punct = m.group(0).rstrip("\"')]")
        if punct == "." and _is_abbreviation(text, m.start() + 1) and m.end() < len(text):
            continue
        spans.append((start, m.end()))
        start = m.end()
    spans.append((start, len(text)))

    out = []
    for a, b in spans:
        while a < b and text[a].isspace():
            a += 1
        while b > a and text[b - 1].isspace():
            b -= 1
        if a < b:
            out.append((a, b))
    return out


def parse_date(value: str, source: str = "") -> dt.date:
    value = value.strip()
    # NexisUni-style headers append the weekday: "April 15, 2020 Wednesday"
    candidates = [value, re.sub(r"\s+[A-Za-z]+day$", "", value)]
    for cand in candidates:
        for fmt in _DATE_FORMATS:
            try:
                return dt.datetime.strptime(cand, fmt).date()
            except ValueError:
                continue
    raise UnparsableDate(value, source)


def _speaker_tag(line: str):
    m = _SPEAKER_RE.match(line)
    if not m:
        return None
    tag = normalize_whitespace(m.group(1))
    if not any(c.isalpha() for c in tag) or len(tag.split()) > 6:
        return None
    return tag, m.group(2)


def make_transcript_id(source: str, header: TranscriptHeader) -> str:
    blob = json.dumps([source, header.program_name, header.network, header.air_date.isoformat()])
    return hashlib.sha1(blob.encode("utf-8")).hexdigest()[:16]


def parse_transcript(raw: str, source: str = "", networks: Iterable[str] = DEFAULT_NETWORKS) -> Transcript:
    """Parse one canonical-format transcript document."""
    lines = raw.splitlines()
    i = 0
    while i < len(lines) and not lines[i].strip():
        i += 1

    fields: dict[str, str] = {}
    while i < len(lines) and lines[i].strip():
        m = _HEADER_RE.match(lines[i].strip())
        if not m:
            break
        fields.setdefault(m.group(1).strip().upper(), m.group(2).strip())
        i += 1
    for name in REQUIRED_FIELDS:
        if not fields.get(name):
            raise MissingHeaderField(name, source)

    allowed = {n.upper() for n in networks}
    network = fields["NETWORK"].upper()
    if network not in allowed:
        raise UnknownNetwork(network, allowed)
    header = TranscriptHeader(
        program_name=normalize_whitespace(fields["PROGRAM"]),
        network=network,
        air_date=parse_date(fields["DATE"], source),
    )

    chunks: list[list] = []
    for line in lines[i:]:
        if not line.strip():
            continue
        tagged = _speaker_tag(line.strip())
        if tagged is not None:
            chunks.append([tagged[0], [tagged[1]]])
        elif chunks:
            chunks[-1][1].append(line)
        else:
            chunks.append([UNKNOWN_SPEAKER, [line]])

    statements = []
    for speaker, parts in chunks:
        st = Statement.from_text(speaker, " ".join(parts))
        if st.sentence_spans:
            statements.append(st)
    if not statements:
        raise EmptyBody(source)
    return Transcript(make_transcript_id(source, header), header, tuple(statements))


def serialize_transcript(t: Transcript) -> str:
    """Render a transcript in the canonical text format."""
    h = t.header
    out = [f"PROGRAM: {h.program_name}", f"NETWORK: {h.network}", f"DATE: {h.air_date.isoformat()}", ""]
    out += [f"{st.speaker}: {st.text}" for st in t.statements]
    return "\n".join(out) + "\n"


def bucket_by_month(transcripts: Iterable[Transcript]) -> dict[str, list[Transcript]]:
    buckets: dict[str, list[Transcript]] = {}
    for t in transcripts:
        buckets.setdefault(t.month_key, []).append(t)
    return {k: sorted(v, key=lambda t: (t.header.air_date, t.id)) for k, v in sorted(buckets.items())}


# -- corpus loading and transcripts.jsonl ------------------------------------

@dataclass
class IngestResult:
    transcripts: list[Transcript] = field(default_factory=list)
    rejected: list[dict] = field(default_factory=list)


def discover_files(paths: Sequence[str | Path]) -> list[tuple[Path, str]]:
    """Expand directories into ``.txt`` files; return ``(path, source_name)`` pairs.

    The source name (relative to the directory it was found under) feeds the
    transcript id, so ids do not depend on where a corpus is mounted.
    """
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            for f in sorted(p.rglob("*.txt")):
                found.append((f, f.relative_to(p).as_posix()))
        else:
            found.append((p, p.name))
    return found


def ingest_paths(paths: Sequence[str | Path], networks: Iterable[str] = DEFAULT_NETWORKS) -> IngestResult:
    networks = frozenset(networks)
    result = IngestResult()
    for path, source in discover_files(paths):
        try:
            result.transcripts.append(parse_transcript(path.read_text(encoding="utf-8"), source, networks))
        except IngestError as exc:
            log.warning("rejected %s: %s", source, exc)
            result.rejected.append({"source": source, "error": type(exc).__name__, "message": str(exc)})
    result.transcripts.sort(key=lambda t: (t.header.air_date, t.id))
    return result


def transcript_to_json(t: Transcript) -> dict:
    return {
        "id": t.id,
        "program": t.header.program_name,
        "network": t.header.network,
        "date": t.header.air_date.isoformat(),
        "statements": [{"speaker": st.speaker, "sentences": st.sentences} for st in t.statements],
    }


def transcript_from_json(obj: dict) -> Transcript:
    header = TranscriptHeader(obj["program"], obj["network"], dt.date.fromisoformat(obj["date"]))
    statements = []
    for st in obj["statements"]:
        # sentences are separated by exactly one space after whitespace normalization
        text = " ".join(st["sentences"])
        spans, pos = [], 0
        for s in st["sentences"]:
            spans.append((pos, pos + len(s)))
            pos += len(s) + 1
        statements.append(Statement(st["speaker"], text, tuple(spans)))
    return Transcript(obj["id"], header, tuple(statements))
