"""Monthly program-topic matrices and program-program similarity networks."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .entities import KeywordAssignment
from .errors import DegenerateProgram, EmptyMonth, ProgramSetMismatch
from .ingest import program_id
from .stance import StanceRecord

FREQUENCY, MEAN_STANCE = "Frequency", "MeanStance"
TOPIC, STANCE, COMBINED, SENTIMENT = "Topic", "Stance", "Combined", "Sentiment"

IDF_VARIANTS = ("smooth", "plain", "none")


@dataclass
class ProgramTopicMatrix:
    month: str
    programs: list[str]
    topics: list[str]
    cells: dict[tuple[str, str], float]
    kind: str
    dropped: list[str] = field(default_factory=list)

    def __post_init__(self):
        for (p, t), v in self.cells.items():
            if self.kind == FREQUENCY and (v < 0 or v != int(v)):
                raise ValueError(f"frequency cell ({p}, {t}) = {v} is not a non-negative integer")
            if self.kind == MEAN_STANCE and not -1.0 <= v <= 1.0:
                raise ValueError(f"stance cell ({p}, {t}) = {v} outside [-1, 1]")

    def get(self, program: str, topic: str, default=None):
        return self.cells.get((program, topic), default)

    def dense(self, fill: float = 0.0) -> np.ndarray:
        m = np.full((len(self.programs), len(self.topics)), fill, dtype=float)
        pi = {p: i for i, p in enumerate(self.programs)}
        ti = {t: j for j, t in enumerate(self.topics)}
        for (p, t), v in self.cells.items():
            m[pi[p], ti[t]] = v
        return m

    def mask(self) -> np.ndarray:
        m = np.zeros((len(self.programs), len(self.topics)), dtype=bool)
        pi = {p: i for i, p in enumerate(self.programs)}
        ti = {t: j for j, t in enumerate(self.topics)}
        for p, t in self.cells:
            m[pi[p], ti[t]] = True
        return m

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["program", "topic", "value"])
        for (p, t) in sorted(self.cells):
            v = self.cells[(p, t)]
            w.writerow([p, t, int(v) if self.kind == FREQUENCY else repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, month: str, kind: str, programs: Sequence[str] | None = None):
        rows = list(csv.DictReader(io.StringIO(text)))
        cells = {(r["program"], r["topic"]): (int(r["value"]) if kind == FREQUENCY else float(r["value"]))
                 for r in rows}
        progs = list(programs) if programs is not None else sorted({p for p, _ in cells})
        topics = sorted({t for _, t in cells})
        return cls(month, progs, topics, cells, kind)


@dataclass
class SimilarityMatrix:
    month: str
    programs: list[str]
    values: np.ndarray
    kind: str
    flags: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = len(self.programs)
        if self.values.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got {self.values.shape}")
        check_similarity(self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["program"] + list(self.programs))
        for p, row in zip(self.programs, self.values):
            w.writerow([p] + [repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, month: str, kind: str):
        rows = list(csv.reader(io.StringIO(text)))
        programs = rows[0][1:]
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=float)
        return cls(month, programs, values, kind)

    def __eq__(self, other):
        return (isinstance(other, SimilarityMatrix) and self.month == other.month and self.kind == other.kind
                and self.programs == other.programs and np.array_equal(self.values, other.values))


def check_similarity(values: np.ndarray, tol: float = 1e-12):
    if values.size == 0:
        return
    if not np.all(np.isfinite(values)):
        raise ValueError("similarity matrix has non-finite entries")
    if np.max(np.abs(values - values.T)) > tol:
        raise ValueError("similarity matrix is not symmetric")
    if values.min() < -tol or values.max() > 1 + tol:
        raise ValueError("similarity entries must lie in [0, 1]")


def _single_month(records, what):
    months = {r.month for r in records}
    if not records:
        raise EmptyMonth(f"no {what} records")
    if len(months) > 1:
        raise ValueError(f"{what} records span several months: {sorted(months)}")
    return months.pop()


def build_frequency_matrix(assignments: Sequence[KeywordAssignment], min_transcripts: int = 1) -> ProgramTopicMatrix:
    """B[p, t] = number of p's transcripts this month with t among the keywords.

    Programs with fewer than ``min_transcripts`` transcripts, or whose
    transcripts yielded no keyword at all, are dropped and listed in ``dropped``.
    """
    month = _single_month(assignments, "keyword")
    n_transcripts: dict[str, int] = defaultdict(int)
    cells: dict[tuple[str, str], float] = defaultdict(int)
    for ka in assignments:
        pid = program_id(ka.network, ka.program)
        n_transcripts[pid] += 1
        for kw in ka.keywords:
            cells[(pid, kw.text)] += 1
    with_keywords = {p for p, _ in cells}
    programs = sorted(p for p in n_transcripts if n_transcripts[p] >= min_transcripts and p in with_keywords)
    dropped = sorted(set(n_transcripts) - set(programs))
    keep = set(programs)
    cells = {k: v for k, v in cells.items() if k[0] in keep}
    topics = sorted({t for _, t in cells})
    return ProgramTopicMatrix(month, programs, topics, dict(cells), FREQUENCY, dropped)


def build_stance_matrix(records: Sequence[StanceRecord], programs: Sequence[str] | None = None) -> ProgramTopicMatrix:
    """C[p, t] = mean transcript stance of p towards t; absent when p never scored t."""
    month = _single_month(records, "stance")
    acc: dict[tuple[str, str], list[float]] = defaultdict(list)
    for r in records:
        acc[(program_id(r.network, r.program), r.keyword)].append(r.stance)
    if programs is not None:
        keep = set(programs)
        acc = {k: v for k, v in acc.items() if k[0] in keep}
    cells = {k: math.fsum(v) / len(v) for k, v in acc.items()}
    progs = list(programs) if programs is not None else sorted({p for p, _ in cells})
    return ProgramTopicMatrix(month, progs, sorted({t for _, t in cells}), cells, MEAN_STANCE)


def idf_weights(df: np.ndarray, n_programs: int, variant: str = "smooth") -> np.ndarray:
    df = np.asarray(df, dtype=float)
    if variant == "smooth":
        return np.log((1.0 + n_programs) / (1.0 + df)) + 1.0
    if variant == "plain":
        return np.log(n_programs / df) + 1.0
    if variant == "none":
        return np.ones_like(df)
    raise ValueError(f"unknown idf variant {variant!r}; expected one of {IDF_VARIANTS}")


def tfidf_transform(b: ProgramTopicMatrix, variant: str = "smooth") -> np.ndarray:
    """Raw counts times idf; rows follow ``b.programs``, columns ``b.topics``."""
    if not b.programs or not b.topics:
        raise EmptyMonth(f"empty frequency matrix for {b.month}")
    tf = b.dense()
    df = (tf >= 1).sum(axis=0)
    return tf * idf_weights(df, len(b.programs), variant)[None, :]


def topic_similarity(weights: np.ndarray, programs: Sequence[str], month: str = "") -> SimilarityMatrix:
    w = np.asarray(weights, dtype=float)
    gram = w @ w.T
    sq = np.diag(gram).copy()
    zero = [programs[i] for i in np.flatnonzero(sq == 0)]
    if zero:
        raise DegenerateProgram(f"programs with no weighted topics: {zero}")
    # one Gram matrix for numerator and norms, so identical rows give exactly 1
    t = np.clip(gram / np.sqrt(np.outer(sq, sq)), 0.0, 1.0)
    t = (t + t.T) / 2
    np.fill_diagonal(t, 1.0)
    return SimilarityMatrix(month, list(programs), t, TOPIC)


def stance_similarity(c: ProgramTopicMatrix, programs: Sequence[str] | None = None, kind: str = STANCE) -> SimilarityMatrix:
    """Mean of ``(2 - |C[p1,t] - C[p2,t]|) / 2`` over topics both programs scored.

    Pairs without a shared topic get 0 and are listed in ``flags``.
    """
    programs = list(programs) if programs is not None else list(c.programs)
    by_program: dict[str, dict[str, float]] = defaultdict(dict)
    for (p, t), v in c.cells.items():
        by_program[p][t] = v
    n = len(programs)
    s = np.zeros((n, n))
    flags = []
    for i in range(n):
        s[i, i] = 1.0
        ci = by_program.get(programs[i], {})
        for j in range(i + 1, n):
            cj = by_program.get(programs[j], {})
            shared = sorted(ci.keys() & cj.keys())
            if not shared:
                flags.append((programs[i], programs[j]))
                continue
            val = math.fsum((2.0 - abs(ci[t] - cj[t])) / 2.0 for t in shared) / len(shared)
            s[i, j] = s[j, i] = val
    return SimilarityMatrix(c.month, programs, s, kind, flags)


def combine(t: SimilarityMatrix, s: SimilarityMatrix) -> SimilarityMatrix:
    if t.programs != s.programs or t.month != s.month:
        raise ProgramSetMismatch(f"cannot combine {t.kind} ({t.month}, {len(t.programs)} programs) with "
                                 f"{s.kind} ({s.month}, {len(s.programs)} programs)")
    return SimilarityMatrix(t.month, list(t.programs), t.values * s.values, COMBINED)


@dataclass
class MonthNetworks:
    month: str
    b: ProgramTopicMatrix
    c: ProgramTopicMatrix
    t: SimilarityMatrix
    s: SimilarityMatrix
    p: SimilarityMatrix
    sentiment: SimilarityMatrix | None = None

    @property
    def programs(self) -> list[str]:
        return self.b.programs


def build_month(assignments: Sequence[KeywordAssignment], stances: Sequence[StanceRecord],
                sentiments: Sequence[StanceRecord] | None = None, *, idf: str = "smooth",
                min_transcripts: int = 1) -> MonthNetworks:
    b = build_frequency_matrix(assignments, min_transcripts)
    month = b.month
    if stances:
        c = build_stance_matrix(stances, b.programs)
    else:
        c = ProgramTopicMatrix(month, list(b.programs), [], {}, MEAN_STANCE)
    t = topic_similarity(tfidf_transform(b, idf), b.programs, month)
    s = stance_similarity(c, b.programs)
    p = combine(t, s)
    sent = None
    if sentiments:
        sent = stance_similarity(build_stance_matrix(sentiments, b.programs), b.programs, kind=SENTIMENT)
    return MonthNetworks(month, b, c, t, s, p, sent)
