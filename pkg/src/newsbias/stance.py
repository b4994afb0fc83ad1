"""Sentence-level stance classification and per-transcript aggregation.

A classifier is any callable ``(sentence, keyword) -> reply string`` that
also carries ``classifier_id`` and ``source`` attributes. Replies are parsed
into one of four verdicts; the stance of a transcript towards a keyword is
the mean of +1/0/-1 over the sentences where the keyword is the main subject.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import os
import random
import re
import threading
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import httpx

from .entities import KeywordAssignment, _is_capitalized
from .errors import ConfigError, MalformedResponse, StanceError, TransportError
from .ingest import Transcript

log = logging.getLogger(__name__)

PROMPT_VERSION = "stance-v1"
PROMPT_TEMPLATE = (
    "You will be given a sentence from a cable news transcript and a keyword.\n"
    "If the keyword is not the main subject in the sentence, respond NO.\n"
    "Otherwise, return whether the statements are POSITIVE, NEUTRAL, or NEGATIVE towards the keyword.\n"
    "Answer with a single word: NO, POSITIVE, NEUTRAL, or NEGATIVE.\n\n"
    "Keyword: {keyword}\n"
    "Sentence: {sentence}"
)
REPROMPT_SUFFIX = "\n\nYour previous answer could not be understood. Reply with exactly one of: NO, POSITIVE, NEUTRAL, NEGATIVE."


class Verdict(str, enum.Enum):
    NOT_MAIN_SUBJECT = "NOT_MAIN_SUBJECT"
    POSITIVE = "POSITIVE"
    NEUTRAL = "NEUTRAL"
    NEGATIVE = "NEGATIVE"


class Source(str, enum.Enum):
    REMOTE = "REMOTE"
    MOCK = "MOCK"
    CACHE = "CACHE"


STANCE_VALUE = {Verdict.POSITIVE: 1, Verdict.NEUTRAL: 0, Verdict.NEGATIVE: -1}
_REPLY_TOKENS = {"NO": Verdict.NOT_MAIN_SUBJECT, "POSITIVE": Verdict.POSITIVE,
                 "NEUTRAL": Verdict.NEUTRAL, "NEGATIVE": Verdict.NEGATIVE}


@dataclass(frozen=True)
class SentenceVerdict:
    transcript_id: str
    keyword: str
    statement_index: int
    sentence_index: int
    verdict: Verdict
    source: Source


@dataclass(frozen=True)
class StanceRecord:
    transcript_id: str
    keyword: str
    stance: float
    n_subject_sentences: int
    program: str = ""
    network: str = ""
    month: str = ""

    def __post_init__(self):
        if self.n_subject_sentences < 1:
            raise ValueError("a stance record needs at least one subject sentence")
        if not -1.0 <= self.stance <= 1.0:
            raise ValueError(f"stance {self.stance} outside [-1, 1]")

    def to_json(self) -> dict:
        return {"transcript_id": self.transcript_id, "program": self.program, "network": self.network,
                "month": self.month, "keyword": self.keyword, "stance": self.stance,
                "n_subject_sentences": self.n_subject_sentences}

    @classmethod
    def from_json(cls, obj: dict) -> "StanceRecord":
        return cls(obj["transcript_id"], obj["keyword"], float(obj["stance"]), int(obj["n_subject_sentences"]),
                   obj.get("program", ""), obj.get("network", ""), obj.get("month", ""))


def aggregate_verdicts(verdicts: Iterable[Verdict]) -> tuple[float, int] | None:
    """Mean stance over main-subject verdicts, or ``None`` when there are none."""
    total = n = 0
    for v in verdicts:
        if v is Verdict.NOT_MAIN_SUBJECT:
            continue
        total += STANCE_VALUE[v]
        n += 1
    if n == 0:
        return None
    return total / n, n


def build_prompt(sentence: str, keyword: str) -> str:
    return PROMPT_TEMPLATE.format(sentence=sentence, keyword=keyword)


def parse_reply(reply: str) -> Verdict:
    """First recognised token wins, case-insensitively."""
    for tok in re.findall(r"[A-Za-z]+", reply or ""):
        v = _REPLY_TOKENS.get(tok.upper())
        if v is not None:
            return v
    raise MalformedResponse(reply)


def keyword_pattern(keyword: str) -> re.Pattern:
    return re.compile(r"(?<!\w)" + re.escape(keyword) + r"(?!\w)", re.I)


def mentions_keyword(sentence: str, keyword: str) -> bool:
    return keyword_pattern(keyword).search(sentence) is not None


# -- cache -------------------------------------------------------------------

def cache_key(classifier_id: str, sentence: str, keyword: str, prompt_version: str = PROMPT_VERSION) -> str:
    blob = json.dumps([classifier_id, prompt_version, sentence, keyword], ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class StanceCache:
    """Thread-safe verdict cache backed by an append-only JSON-lines file.

    The file is compacted (deduplicated, last write wins) when loaded.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._data: dict[str, tuple[Verdict, bool]] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    def _load(self):
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                self._data[obj["key"]] = (Verdict(obj["verdict"]), bool(obj.get("malformed", False)))
            except (ValueError, KeyError):
                log.warning("skipping corrupt cache line in %s", self.path)
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for key in sorted(self._data):
                fh.write(self._line(key, *self._data[key]))
        os.replace(tmp, self.path)

    @staticmethod
    def _line(key, verdict, malformed):
        return json.dumps({"key": key, "verdict": verdict.value, "malformed": malformed}) + "\n"

    def get(self, key: str):
        with self._lock:
            return self._data.get(key)

    def put(self, key: str, verdict: Verdict, malformed: bool = False):
        with self._lock:
            self._data[key] = (verdict, malformed)
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(self._line(key, verdict, malformed))

    def __contains__(self, key):
        with self._lock:
            return key in self._data

    def __len__(self):
        return len(self._data)


# -- classifiers -------------------------------------------------------------

POSITIVE_CUES = ("fantastic", "great", "excellent", "brilliant", "strong", "successful", "honest",
                 "wonderful", "impressive", "heroic")
NEGATIVE_CUES = ("terrible", "awful", "disastrous", "failed", "weak", "corrupt", "dishonest",
                 "horrible", "pathetic", "shameful")
NEGATIONS = ("not", "never", "no")

# Paired so each positive cue has a negative twin of equal magnitude.
DEFAULT_LEXICON: dict[str, float] = {}
for _p, _n, _v in zip(POSITIVE_CUES, NEGATIVE_CUES, (0.7, 0.6, 0.7, 0.7, 0.5, 0.6, 0.5, 0.7, 0.6, 0.6)):
    DEFAULT_LEXICON[_p], DEFAULT_LEXICON[_n] = _v, -_v
DEFAULT_LEXICON.update({
    "good": 0.5, "bad": -0.5, "love": 0.6, "hate": -0.6, "best": 0.7, "worst": -0.7,
    "happy": 0.5, "sad": -0.5, "win": 0.5, "lose": -0.5, "safe": 0.4, "dangerous": -0.4,
    "fraudulent": -0.6, "failures": -0.6, "failure": -0.6, "success": 0.6, "hope": 0.4, "fear": -0.4,
})

_WORD_RE = re.compile(r"[A-Za-z][A-Za-z'’\-]*")


class MockClassifier:
    """Deterministic stand-in for a remote model.

    The keyword is the main subject when it is the first capitalized entity
    in the sentence. Its stance comes from the cue word nearest to it
    (within ``window`` tokens; ties prefer the cue after the keyword), with
    a preceding negation flipping the polarity. No cue means NEUTRAL.
    """

    classifier_id = "mock-v1"
    source = Source.MOCK

    def __init__(self, window: int = 8, positive=POSITIVE_CUES, negative=NEGATIVE_CUES):
        self.window = window
        self.positive = frozenset(positive)
        self.negative = frozenset(negative)
        self.calls = 0

    def __call__(self, sentence: str, keyword: str) -> str:
        self.calls += 1
        words = [(m.group(0), m.start()) for m in _WORD_RE.finditer(sentence)]
        match = keyword_pattern(keyword).search(sentence)
        if match is None:
            return "NO"
        kw_first = next(i for i, (_, a) in enumerate(words) if a >= match.start())
        kw_last = max(i for i, (_, a) in enumerate(words) if a < match.end())
        for i, (w, a) in enumerate(words[:kw_first]):
            if i > 0 and _is_capitalized(w):
                return "NO"

        best = None
        for i, (w, _) in enumerate(words):
            lw = w.lower()
            if lw not in self.positive and lw not in self.negative:
                continue
            if kw_first <= i <= kw_last:
                continue
            dist = kw_first - i if i < kw_first else i - kw_last
            if dist > self.window:
                continue
            rank = (dist, 0 if i > kw_last else 1)
            if best is None or rank < best[0]:
                sign = 1 if lw in self.positive else -1
                if i > 0 and words[i - 1][0].lower() in NEGATIONS:
                    sign = -sign
                best = (rank, sign)
        if best is None:
            return "NEUTRAL"
        return "POSITIVE" if best[1] > 0 else "NEGATIVE"


class RemoteClassifier:
    """Chat-completion client (OpenAI-compatible request/response shapes).

    Request body::

        {"model": ..., "temperature": 0, "messages": [{"role": "user", "content": <prompt>}]}

    The reply text is read from ``choices[0].message.content``.
    """

    source = Source.REMOTE

    def __init__(self, url: str, model: str, api_key: str | None = None, *, key_env: str | None = None,
                 max_retries: int = 4, backoff: float = 1.0, timeout: float = 60.0,
                 transport: httpx.BaseTransport | None = None, sleep=time.sleep):
        if api_key is None and key_env:
            api_key = os.environ.get(key_env)
        if not api_key:
            raise ConfigError(f"remote classifier needs an API key (environment variable {key_env!r} is unset)")
        self.url = url
        self.model = model
        self.classifier_id = f"remote:{model}"
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        self.calls = 0
        self._lock = threading.Lock()
        self._client = httpx.Client(timeout=timeout, transport=transport,
                                    headers={"Authorization": f"Bearer {api_key}"})

    def complete(self, prompt: str) -> str:
        body = {"model": self.model, "temperature": 0, "messages": [{"role": "user", "content": prompt}]}
        last = None
        for attempt in range(self.max_retries + 1):
            with self._lock:
                self.calls += 1
            try:
                resp = self._client.post(self.url, json=body)
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = f"HTTP {resp.status_code}"
                else:
                    resp.raise_for_status()
                    return resp.json()["choices"][0]["message"]["content"]
            except httpx.HTTPStatusError as exc:
                raise TransportError(f"classifier endpoint rejected request: {exc}") from exc
            except (httpx.TransportError, ValueError, KeyError, IndexError, TypeError) as exc:
                last = repr(exc)
            if attempt < self.max_retries:
                self.sleep(self.backoff * 2 ** attempt)
        raise TransportError(f"classifier unreachable after {self.max_retries + 1} attempts: {last}")

    def __call__(self, sentence: str, keyword: str, reprompt: bool = False) -> str:
        prompt = build_prompt(sentence, keyword)
        return self.complete(prompt + REPROMPT_SUFFIX if reprompt else prompt)

    def close(self):
        self._client.close()


# -- classification ----------------------------------------------------------

@dataclass
class RunReport:
    classifier_calls: int = 0
    cache_hits: int = 0
    prefiltered: int = 0
    malformed: int = 0
    truncated: int = 0
    failures: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def _ask(classifier, sentence, keyword, reprompt=False):
    if reprompt:
        try:
            return classifier(sentence, keyword, reprompt=True)
        except TypeError:
            return classifier(sentence, keyword)
    return classifier(sentence, keyword)


def _classify_uncached(sentence: str, keyword: str, classifier) -> tuple[Verdict, bool, int]:
    """Return (verdict, malformed, number of classifier calls)."""
    reply = _ask(classifier, sentence, keyword)
    try:
        return parse_reply(reply), False, 1
    except MalformedResponse:
        pass
    reply = _ask(classifier, sentence, keyword, reprompt=True)
    try:
        return parse_reply(reply), False, 2
    except MalformedResponse:
        log.warning("malformed reply for keyword %r, recording NOT_MAIN_SUBJECT: %r", keyword, reply)
        return Verdict.NOT_MAIN_SUBJECT, True, 2


def classify_sentence(sentence: str, keyword: str, classifier, cache: StanceCache | None = None,
                      report: RunReport | None = None, *, transcript_id: str = "",
                      statement_index: int = -1, sentence_index: int = -1) -> SentenceVerdict:
    if not sentence.strip() or not keyword.strip():
        raise ValueError("sentence and keyword must be non-empty")
    report = report if report is not None else RunReport()

    def verdict(v, src):
        return SentenceVerdict(transcript_id, keyword, statement_index, sentence_index, v, src)

    if not mentions_keyword(sentence, keyword):
        report.prefiltered += 1
        return verdict(Verdict.NOT_MAIN_SUBJECT, classifier.source)
    key = cache_key(classifier.classifier_id, sentence, keyword)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            report.cache_hits += 1
            return verdict(hit[0], Source.CACHE)
    v, malformed, calls = _classify_uncached(sentence, keyword, classifier)
    report.classifier_calls += calls
    report.malformed += malformed
    if cache is not None:
        cache.put(key, v, malformed)
    return verdict(v, classifier.source)


@dataclass(frozen=True)
class _Item:
    transcript_id: str
    keyword: str
    keyword_rank: int
    statement_index: int
    sentence_index: int
    sentence: str


def eligible_sentences(transcript: Transcript, assignment: KeywordAssignment):
    """Yield work items: every sentence mentioning a keyword (by text match or recorded mention)."""
    for rank, kw in enumerate(assignment.keywords):
        refs = set(kw.sentences)
        pat = keyword_pattern(kw.text)
        for i, j, sent in transcript.sentences():
            if (i, j) in refs or pat.search(sent):
                yield _Item(transcript.id, kw.text, rank, i, j, sent)


class StanceEngine:
    """Batch stance scoring with caching, call budgets and bounded parallelism.

    Work is planned in (transcript id, keyword rank, sentence order); budget
    truncation follows that order so it does not depend on thread timing.
    """

    def __init__(self, classifier, cache: StanceCache | None = None, max_workers: int = 4,
                 max_calls: int | None = None, max_calls_per_transcript: int | None = None):
        self.classifier = classifier
        self.cache = cache if cache is not None else StanceCache()
        self.max_workers = max(1, int(max_workers))
        self.max_calls = max_calls
        self.max_calls_per_transcript = max_calls_per_transcript

    def score(self, pairs: Sequence[tuple[Transcript, KeywordAssignment]]):
        """Return ``(stance_records, sentence_verdicts, report)``."""
        report = RunReport()
        cid = self.classifier.classifier_id
        items: list[_Item] = []
        meta = {}
        for t, ka in sorted(pairs, key=lambda p: p[0].id):
            if ka.transcript_id != t.id:
                raise ValueError(f"assignment {ka.transcript_id} does not belong to transcript {t.id}")
            meta[t.id] = (t.program, t.network, t.month_key)
            items.extend(eligible_sentences(t, ka))

        keys = {}
        planned: dict[str, _Item] = {}
        truncated = set()
        per_transcript: dict[str, int] = defaultdict(int)
        total = 0
        for it in items:
            if not mentions_keyword(it.sentence, it.keyword):
                keys[it] = None
                continue
            k = cache_key(cid, it.sentence, it.keyword)
            keys[it] = k
            if k in self.cache or k in planned:
                continue
            if (self.max_calls is not None and total >= self.max_calls) or (
                    self.max_calls_per_transcript is not None
                    and per_transcript[it.transcript_id] >= self.max_calls_per_transcript):
                truncated.add(it)
                continue
            planned[k] = it
            total += 1
            per_transcript[it.transcript_id] += 1
        report.truncated = len(truncated)

        results: dict[str, tuple[Verdict, bool, int] | Exception] = {}

        def work(k_it):
            k, it = k_it
            try:
                return k, _classify_uncached(it.sentence, it.keyword, self.classifier)
            except StanceError as exc:
                return k, exc

        if planned:
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                results = dict(pool.map(work, planned.items()))
        for k in planned:  # fold in plan order
            res = results[k]
            if isinstance(res, Exception):
                continue
            v, malformed, calls = res
            report.classifier_calls += calls
            report.malformed += malformed
            self.cache.put(k, v, malformed)

        verdicts: list[SentenceVerdict] = []
        groups: dict[tuple[str, int, str], list[Verdict]] = {}
        failed: dict[tuple[str, str], str] = {}
        for it in items:
            gk = (it.transcript_id, it.keyword_rank, it.keyword)
            groups.setdefault(gk, [])
            if it in truncated:
                continue
            k = keys[it]
            if k is None:
                report.prefiltered += 1
                v, src = Verdict.NOT_MAIN_SUBJECT, self.classifier.source
            elif isinstance(results.get(k), Exception):
                failed.setdefault((it.transcript_id, it.keyword), str(results[k]))
                continue
            elif planned.get(k) == it:
                v, src = results[k][0], self.classifier.source
            else:
                report.cache_hits += 1
                v, src = self.cache.get(k)[0], Source.CACHE
            verdicts.append(SentenceVerdict(it.transcript_id, it.keyword, it.statement_index,
                                            it.sentence_index, v, src))
            groups[gk].append(v)

        records = []
        for (tid, _, kw), vs in groups.items():
            if (tid, kw) in failed:
                continue
            agg = aggregate_verdicts(vs)
            if agg is None:
                continue
            program, network, month = meta[tid]
            records.append(StanceRecord(tid, kw, agg[0], agg[1], program, network, month))
        report.failures = [{"transcript_id": tid, "keyword": kw, "error": msg}
                           for (tid, kw), msg in sorted(failed.items())]
        return records, verdicts, report


def score_transcript(transcript: Transcript, assignment: KeywordAssignment, classifier,
                     cache: StanceCache | None = None) -> list[StanceRecord]:
    engine = StanceEngine(classifier, cache, max_workers=1)
    records, _, report = engine.score([(transcript, assignment)])
    if report.failures:
        f = report.failures[0]
        raise StanceError(f"transcript {f['transcript_id']}, keyword {f['keyword']!r}: {f['error']}")
    return records


# -- lexicon sentiment baseline ----------------------------------------------

SENTIMENT_ALPHA = 15.0


def lexicon_sentiment(sentence: str, lexicon: Mapping[str, float] = DEFAULT_LEXICON) -> float:
    """Normalized valence sum ``x / sqrt(x**2 + 15)``; a negation flips the next lexicon word."""
    total = 0.0
    negate = False
    for m in _WORD_RE.finditer(sentence):
        w = m.group(0).lower()
        if w in NEGATIONS:
            negate = True
            continue
        v = lexicon.get(w)
        if v is None:
            continue
        total += -v if negate else v
        negate = False
    if total == 0.0:
        return 0.0
    return max(-1.0, min(1.0, total / math.sqrt(total * total + SENTIMENT_ALPHA)))


def sentiment_records(transcript: Transcript, assignment: KeywordAssignment,
                      lexicon: Mapping[str, float] = DEFAULT_LEXICON) -> list[StanceRecord]:
    """Target-blind baseline: mean lexicon sentiment of the sentences mentioning each keyword."""
    scores: dict[tuple[int, str], list[float]] = {}
    for it in eligible_sentences(transcript, assignment):
        scores.setdefault((it.keyword_rank, it.keyword), []).append(lexicon_sentiment(it.sentence, lexicon))
    out = []
    for (_, kw), vals in sorted(scores.items()):
        out.append(StanceRecord(transcript.id, kw, sum(vals) / len(vals), len(vals),
                                transcript.program, transcript.network, transcript.month_key))
    return out
