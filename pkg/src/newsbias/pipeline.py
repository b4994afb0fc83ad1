"""Stage-by-stage pipeline over files in an output directory.

Stage inputs and outputs (all paths relative to ``out_dir``)::

    ingest    <inputs>                                  -> transcripts.jsonl, ingest_report.json
    extract   transcripts.jsonl                         -> keywords.jsonl
    stance    transcripts.jsonl, keywords.jsonl         -> stances.jsonl, sentiments.jsonl, stance_report.json
    networks  keywords.jsonl, stances.jsonl, sentiments.jsonl
                                                        -> networks/index.json, networks/<month>/{B,C,T,S,P,Sentiment}.csv
    cluster   networks/index.json, networks/<month>/P.csv
                                                        -> clusters.json
    report    clusters.json, networks/...               -> ari_table.md, sankey.json, pca.csv, variance_report.json
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import clustering
from .entities import KeywordAssignment, extract_keywords, make_recognizer
from .errors import ConfigError, MissingArtifact, NewsBiasError
from .ingest import DEFAULT_NETWORKS, ingest_paths, split_program_id, transcript_from_json, transcript_to_json
from .networks import (COMBINED, IDF_VARIANTS, SENTIMENT, STANCE, TOPIC, FREQUENCY, MEAN_STANCE,
                       ProgramTopicMatrix, SimilarityMatrix, build_month)
from .stance import MockClassifier, RemoteClassifier, StanceCache, StanceEngine, StanceRecord, sentiment_records

log = logging.getLogger(__name__)

STAGES = ("ingest", "extract", "stance", "networks", "cluster", "report")
MATRIX_FILES = {"T": TOPIC, "S": STANCE, "P": COMBINED, "Sentiment": SENTIMENT}


@dataclass
class PipelineConfig:
    inputs: list[str] = field(default_factory=list)
    out_dir: str = "out"
    networks: list[str] = field(default_factory=lambda: sorted(DEFAULT_NETWORKS))
    recognizer: str = "heuristic"
    recognizer_fallback: bool = True
    alias_map: str | None = None
    classifier: str = "mock"
    remote_url: str = "https://api.openai.com/v1/chat/completions"
    remote_model: str = "gpt-4"
    remote_key_env: str = "OPENAI_API_KEY"
    cache_path: str | None = None
    parallelism: int = 4
    max_calls: int | None = None
    max_calls_per_transcript: int | None = None
    idf: str = "smooth"
    k: int = clustering.DEFAULT_K
    seed: int = clustering.DEFAULT_SEED
    min_transcripts: int = 1
    months: str | None = None

    def validate(self) -> "PipelineConfig":
        if not self.networks:
            raise ConfigError("network label set is empty")
        if self.classifier not in ("mock", "remote"):
            raise ConfigError(f"classifier must be 'mock' or 'remote', not {self.classifier!r}")
        if self.classifier == "remote":
            if not self.remote_url or not self.remote_model:
                raise ConfigError("remote classifier needs remote_url and remote_model")
            if not os.environ.get(self.remote_key_env or ""):
                raise ConfigError(f"remote classifier selected but ${self.remote_key_env} is not set")
        if self.recognizer != "heuristic" and not self.recognizer.startswith("external:"):
            raise ConfigError(f"recognizer must be 'heuristic' or 'external:<command>', not {self.recognizer!r}")
        if self.idf not in IDF_VARIANTS:
            raise ConfigError(f"idf must be one of {IDF_VARIANTS}")
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")
        if self.min_transcripts < 1:
            raise ConfigError("min_transcripts must be at least 1")
        for cap in (self.max_calls, self.max_calls_per_transcript):
            if cap is not None and cap < 0:
                raise ConfigError("call budgets must be non-negative")
        self.month_range()
        return self

    def month_range(self):
        if not self.months:
            return None
        lo, sep, hi = self.months.partition(":")
        lo, hi = lo.strip() or None, (hi.strip() if sep else lo.strip()) or None
        for m in (lo, hi):
            if m is not None and (len(m) != 7 or m[4] != "-" or not (m[:4] + m[5:]).isdigit()):
                raise ConfigError(f"bad month range {self.months!r}; expected YYYY-MM[:YYYY-MM]")
        return lo, hi

    def month_selected(self, month: str) -> bool:
        rng = self.month_range()
        if rng is None:
            return True
        lo, hi = rng
        return (lo is None or month >= lo) and (hi is None or month <= hi)

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict({**data, **overrides})

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# -- file helpers ------------------------------------------------------------

def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def dump_jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows)


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifact(path)
    return path


def read_jsonl(path: Path) -> list[dict]:
    lines = _require(path).read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line.strip()]


def read_json(path: Path):
    return json.loads(_require(path).read_text(encoding="utf-8"))


def load_transcripts(out: Path):
    return [transcript_from_json(o) for o in read_jsonl(out / "transcripts.jsonl")]


def load_keywords(out: Path) -> list[KeywordAssignment]:
    return [KeywordAssignment.from_json(o) for o in read_jsonl(out / "keywords.jsonl")]


def load_stances(out: Path, name: str = "stances.jsonl") -> list[StanceRecord]:
    return [StanceRecord.from_json(o) for o in read_jsonl(out / name)]


# -- stages ------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig) -> dict:
    if not cfg.inputs:
        raise ConfigError("ingest needs at least one input path")
    for p in cfg.inputs:
        if not Path(p).exists():
            raise MissingArtifact(p)
    result = ingest_paths(cfg.inputs, cfg.networks)
    atomic_write(cfg.out / "transcripts.jsonl", dump_jsonl(transcript_to_json(t) for t in result.transcripts))
    report = {"admitted": len(result.transcripts), "rejected": result.rejected}
    atomic_write(cfg.out / "ingest_report.json", dump_json(report))
    return report


def _load_aliases(cfg):
    if not cfg.alias_map:
        return None
    try:
        return json.loads(Path(cfg.alias_map).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read alias map {cfg.alias_map}: {exc}") from exc


def stage_extract(cfg: PipelineConfig) -> dict:
    transcripts = load_transcripts(cfg.out)
    recognizer = make_recognizer(cfg.recognizer, cfg.recognizer_fallback)
    aliases = _load_aliases(cfg)
    try:
        assignments = [extract_keywords(t, recognizer, aliases) for t in transcripts]
    finally:
        close = getattr(getattr(recognizer, "primary", recognizer), "close", None)
        if close:
            close()
    atomic_write(cfg.out / "keywords.jsonl", dump_jsonl(a.to_json() for a in assignments))
    return {"transcripts": len(assignments), "with_keywords": sum(bool(a.keywords) for a in assignments)}


def make_classifier(cfg: PipelineConfig):
    if cfg.classifier == "mock":
        return MockClassifier()
    return RemoteClassifier(cfg.remote_url, cfg.remote_model, key_env=cfg.remote_key_env)


def stage_stance(cfg: PipelineConfig, classifier=None) -> dict:
    transcripts = {t.id: t for t in load_transcripts(cfg.out)}
    assignments = load_keywords(cfg.out)
    pairs = []
    for ka in assignments:
        if ka.transcript_id not in transcripts:
            raise NewsBiasError(f"keywords.jsonl references unknown transcript {ka.transcript_id}")
        pairs.append((transcripts[ka.transcript_id], ka))
    classifier = classifier or make_classifier(cfg)
    cache = StanceCache(cfg.cache_path or cfg.out / "stance_cache.jsonl")
    engine = StanceEngine(classifier, cache, cfg.parallelism, cfg.max_calls, cfg.max_calls_per_transcript)
    records, _, report = engine.score(pairs)
    records.sort(key=lambda r: (r.transcript_id, r.keyword))
    sentiments = [r for t, ka in sorted(pairs, key=lambda p: p[0].id) for r in sentiment_records(t, ka)]
    atomic_write(cfg.out / "stances.jsonl", dump_jsonl(r.to_json() for r in records))
    atomic_write(cfg.out / "sentiments.jsonl", dump_jsonl(r.to_json() for r in sentiments))
    summary = {"classifier": classifier.classifier_id, "records": len(records), **report.to_json()}
    atomic_write(cfg.out / "stance_report.json", dump_json(summary))
    return summary


def _by_month(records):
    out = defaultdict(list)
    for r in records:
        out[r.month].append(r)
    return out


def stage_networks(cfg: PipelineConfig) -> dict:
    assignments = _by_month(load_keywords(cfg.out))
    stances = _by_month(load_stances(cfg.out))
    sent_path = cfg.out / "sentiments.jsonl"
    sentiments = _by_month(load_stances(cfg.out, "sentiments.jsonl")) if sent_path.exists() else {}
    index = {"idf": cfg.idf, "min_transcripts": cfg.min_transcripts, "months": [], "program_networks": {}}
    for month in sorted(assignments):
        if not cfg.month_selected(month):
            continue
        if not any(ka.keywords for ka in assignments[month]):
            index["months"].append({"month": month, "programs": [], "skipped": "no keywords"})
            continue
        net = build_month(assignments[month], stances.get(month, []), sentiments.get(month),
                          idf=cfg.idf, min_transcripts=cfg.min_transcripts)
        write_month(cfg.out / "networks" / month, net)
        index["months"].append({"month": month, "programs": net.programs, "dropped": net.b.dropped,
                                "zero_shared_pairs": [list(p) for p in net.s.flags],
                                "has_sentiment": net.sentiment is not None})
        for p in net.programs:
            index["program_networks"][p] = split_program_id(p)[0]
    atomic_write(cfg.out / "networks" / "index.json", dump_json(index))
    return {"months": len(index["months"])}


def write_month(d: Path, net):
    atomic_write(d / "B.csv", net.b.to_csv())
    atomic_write(d / "C.csv", net.c.to_csv())
    atomic_write(d / "T.csv", net.t.to_csv())
    atomic_write(d / "S.csv", net.s.to_csv())
    atomic_write(d / "P.csv", net.p.to_csv())
    if net.sentiment is not None:
        atomic_write(d / "Sentiment.csv", net.sentiment.to_csv())


def load_matrix(out: Path, month: str, name: str) -> SimilarityMatrix:
    path = _require(out / "networks" / month / f"{name}.csv")
    return SimilarityMatrix.from_csv(path.read_text(encoding="utf-8"), month, MATRIX_FILES[name])


def load_topic_matrix(out: Path, month: str, name: str, programs=None) -> ProgramTopicMatrix:
    path = _require(out / "networks" / month / f"{name}.csv")
    kind = FREQUENCY if name == "B" else MEAN_STANCE
    return ProgramTopicMatrix.from_csv(path.read_text(encoding="utf-8"), month, kind, programs)


def stage_cluster(cfg: PipelineConfig) -> dict:
    index = read_json(cfg.out / "networks" / "index.json")
    raw, skipped = {}, []
    for entry in index["months"]:
        month = entry["month"]
        if not cfg.month_selected(month) or not entry["programs"]:
            continue
        p = load_matrix(cfg.out, month, "P")
        if len(p.programs) < cfg.k:
            skipped.append({"month": month, "reason": f"{len(p.programs)} programs < k={cfg.k}"})
            continue
        raw[month] = clustering.spectral_cluster(p, cfg.k, cfg.seed)
    truth = index["program_networks"]
    result = {"k": cfg.k, "seed": cfg.seed, "months": [], "skipped": skipped}
    if raw:
        timeline = clustering.align_labels(raw, cfg.k, truth)
        result["months"] = [{"month": m, "assignments": timeline.assignments[m],
                             "ari_vs_network": timeline.ari_by_month.get(m)} for m in timeline.months]
    atomic_write(cfg.out / "clusters.json", dump_json(result))
    return {"months": len(result["months"]), "skipped": len(skipped)}


def load_timeline(out: Path) -> clustering.ClusterTimeline:
    data = read_json(out / "clusters.json")
    months = [m["month"] for m in data["months"]]
    return clustering.ClusterTimeline(
        months,
        {m["month"]: {p: int(c) for p, c in m["assignments"].items()} for m in data["months"]},
        {m["month"]: m["ari_vs_network"] for m in data["months"] if m["ari_vs_network"] is not None},
        int(data["k"]),
    )


def ari_table(timeline: clustering.ClusterTimeline) -> str:
    lines = ["| Month | Adj Rand Index |", "|---|---|"]
    for m in timeline.months:
        v = timeline.ari_by_month.get(m)
        lines.append(f"| {m} | {'n/a' if v is None else f'{v:.3f}'} |")
    return "\n".join(lines) + "\n"


def stage_report(cfg: PipelineConfig) -> dict:
    timeline = load_timeline(cfg.out)
    index = read_json(cfg.out / "networks" / "index.json")
    networks = index["program_networks"]

    atomic_write(cfg.out / "ari_table.md", ari_table(timeline))
    atomic_write(cfg.out / "sankey.json", dump_json(clustering.sankey_flows(timeline)))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["program", "network", "x", "y"])
    if len(timeline.months) >= 2:
        programs, coords, _ = clustering.pca_assignments(timeline, 2)
        for p, (x, y) in zip(programs, coords):
            w.writerow([p, networks.get(p, split_program_id(p)[0]), repr(float(x)), repr(float(y))])
    atomic_write(cfg.out / "pca.csv", buf.getvalue())

    variance = {}
    for entry in index["months"]:
        month = entry["month"]
        if month not in timeline.assignments or len(entry["programs"]) < 3:
            continue
        row = {}
        for name, label in (("T", "topic"), ("S", "stance"), ("P", "combined"), ("Sentiment", "sentiment")):
            path = cfg.out / "networks" / month / f"{name}.csv"
            if path.exists():
                row[label] = clustering.matrix_stddev(load_matrix(cfg.out, month, name))
        variance[month] = row
    atomic_write(cfg.out / "variance_report.json", dump_json(variance))
    return {"months": len(timeline.months)}


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "extract": stage_extract,
    "stance": stage_stance,
    "networks": stage_networks,
    "cluster": stage_cluster,
    "report": stage_report,
}


def run_stage(stage: str, cfg: PipelineConfig, **kwargs) -> dict:
    if stage not in STAGE_FUNCS:
        raise ConfigError(f"unknown stage {stage!r}")
    cfg.validate()
    log.info("running stage %s", stage)
    return STAGE_FUNCS[stage](cfg, **kwargs)


def run_all(cfg: PipelineConfig, classifier=None) -> dict:
    cfg.validate()
    out = {}
    for stage in STAGES:
        out[stage] = STAGE_FUNCS[stage](cfg, classifier) if stage == "stance" else STAGE_FUNCS[stage](cfg)
    return out
