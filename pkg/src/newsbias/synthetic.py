"""Planted-bias synthetic corpus generator.

Each synthetic network over-samples its own topic pool and phrases stance
sentences with the mock classifier's cue words, so the full pipeline can be
checked against known network memberships and stances.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .entities import canonicalize
from .errors import SpecError
from .ingest import program_id
from .stance import NEGATIVE_CUES, POSITIVE_CUES

DEFAULT_NETWORK_NAMES = ("CNN", "FOX", "MSNBC")

SHARED_TOPICS = ["Trump", "Biden", "Pelosi", "Fauci", "the White House", "the Senate"]
OWN_TOPICS = {
    "CNN": ["Cuomo", "Newsom", "Whitmer", "Atlanta"],
    "FOX": ["Durham", "Barr", "Antifa", "Portland"],
    "MSNBC": ["McConnell", "DeJoy", "Barrett", "Kavanaugh"],
}
DEFAULT_STANCES = {
    "CNN": {"Trump": -1, "Biden": 1, "Pelosi": 0, "Fauci": 1, "the White House": -1, "the Senate": 0,
            "Cuomo": 1, "Newsom": 0, "Whitmer": 1, "Atlanta": 0},
    "FOX": {"Trump": 1, "Biden": -1, "Pelosi": -1, "Fauci": -1, "the White House": 1, "the Senate": 1,
            "Durham": 1, "Barr": 1, "Antifa": -1, "Portland": -1},
    "MSNBC": {"Trump": -1, "Biden": 1, "Pelosi": 1, "Fauci": 1, "the White House": -1, "the Senate": -1,
              "McConnell": -1, "DeJoy": -1, "Barrett": -1, "Kavanaugh": -1},
}
_EXTRA_NAMES = ["Abbott", "Baldwin", "Castro", "Dunleavy", "Ellison", "Fletcher", "Garland", "Holcomb",
                "Inslee", "Jealous", "Kemp", "Lamont", "Murphy", "Northam", "Ossoff", "Polis", "Quigley",
                "Raimondo", "Sununu", "Tester", "Udall", "Vance", "Walz", "Youngkin"]

LEADS = ["Tonight,", "Once again,", "Frankly,", "Today", "Meanwhile,", "Now,", "Remember,", "Honestly,"]
STANCE_TEMPLATES = [
    "{lead} {e} is doing {a} {cue} job.",
    "{lead} {e} made {a} {cue} decision this week.",
    "{lead} {e} gave {a} {cue} answer on this issue.",
    "{lead} {e} has been {cue} for the country.",
]
MATCHED_TEMPLATES = [
    "{lead} {e} has been {cue}, unlike the {anti} critics.",
    "{lead} {e} is {cue} on this, despite the {anti} coverage.",
]
NEUTRAL_TEMPLATES = [
    "{lead} {e} held a meeting with advisers this week.",
    "{lead} {e} released a statement on the matter.",
    "{lead} {e} is expected to speak again soon.",
]
FILLERS = [
    "Good evening and welcome.",
    "We will be right back after this break.",
    "Thank you for joining us.",
    "Let us bring in our panel.",
    "That is all the time we have.",
]
SPEAKERS = ["ANCHOR", "CORRESPONDENT", "GUEST"]


@dataclass
class SyntheticSpec:
    n_networks: int = 3
    programs_per_network: int = 4
    months: int = 3
    transcripts_per_program_month: int = 4
    topics_per_transcript: int = 4
    sentences_per_topic: tuple[int, int] = (3, 5)
    start_month: str = "2020-01"
    shared_topics: list[str] = field(default_factory=lambda: list(SHARED_TOPICS))
    own_topics: dict[str, list[str]] = field(default_factory=lambda: {k: list(v) for k, v in OWN_TOPICS.items()})
    own_weight: float = 3.0
    shared_weight: float = 1.0
    stances: dict[str, dict[str, int]] = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_STANCES.items()})
    noise_rate: float = 0.1
    matched_valence: bool = False
    seed: int = 0

    def network_names(self) -> list[str]:
        names = list(DEFAULT_NETWORK_NAMES[: self.n_networks])
        names += [f"NET{i + 1}" for i in range(len(names), self.n_networks)]
        return names

    def validate(self):
        for name in ("n_networks", "programs_per_network", "months", "transcripts_per_program_month",
                     "topics_per_transcript"):
            if getattr(self, name) < 1:
                raise SpecError(f"{name} must be positive")
        lo, hi = self.sentences_per_topic
        if not 3 <= lo <= hi:
            raise SpecError("sentences_per_topic must satisfy 3 <= low <= high")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise SpecError("noise_rate must lie in [0, 1]")
        if self.transcripts_per_program_month > 28:
            raise SpecError("at most 28 transcripts per program and month")
        try:
            y, m = map(int, self.start_month.split("-"))
            if not 1 <= m <= 12:
                raise ValueError
        except ValueError:
            raise SpecError(f"bad start_month {self.start_month!r}") from None

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        if "sentences_per_topic" in d:
            d["sentences_per_topic"] = tuple(d["sentences_per_topic"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc


def _month_keys(start: str, n: int) -> list[str]:
    y, m = map(int, start.split("-"))
    out = []
    for i in range(n):
        yy, mm = y + (m - 1 + i) // 12, (m - 1 + i) % 12 + 1
        out.append(f"{yy:04d}-{mm:02d}")
    return out


def _resolve(spec: SyntheticSpec, rng: random.Random):
    """Topic pools and stance tables for every network, inventing any that are missing."""
    names = spec.network_names()
    pools, stances = {}, {}
    spare = [n for n in _EXTRA_NAMES]
    for net in names:
        if net in spec.own_topics:
            own = list(spec.own_topics[net])
        else:
            own = [spare.pop(0) for _ in range(4)]
        pools[net] = own
        table = dict(spec.stances.get(net, {}))
        for t in spec.shared_topics + own:
            table.setdefault(t, rng.choice((-1, 0, 1)))
        stances[net] = table
    return names, pools, stances


def _stance_sentence(rng, topic, polarity, matched):
    lead = rng.choice(LEADS)
    if polarity == 0:
        return rng.choice(NEUTRAL_TEMPLATES).format(lead=lead, e=topic)
    i = rng.randrange(len(POSITIVE_CUES))
    # the opposite-valence word is drawn independently, so a sentence's net
    # lexicon valence is noise whose distribution does not depend on polarity
    j = rng.randrange(len(POSITIVE_CUES))
    cue, anti = (POSITIVE_CUES[i], NEGATIVE_CUES[j]) if polarity > 0 else (NEGATIVE_CUES[i], POSITIVE_CUES[j])
    template = rng.choice(MATCHED_TEMPLATES if matched else STANCE_TEMPLATES)
    article = "an" if cue[0] in "aeiou" else "a"
    return template.format(lead=lead, e=topic, cue=cue, anti=anti, a=article)


def synthetic_corpus(spec: SyntheticSpec):
    """Build the corpus in memory: ``(files, truth)`` with ``files`` a list of ``(relative_path, text)``."""
    spec.validate()
    rng = random.Random(spec.seed)
    names, pools, stances = _resolve(spec, rng)
    months = _month_keys(spec.start_month, spec.months)
    lo, hi = spec.sentences_per_topic
    files = []
    programs = {}

    for net in names:
        topics = spec.shared_topics + pools[net]
        weights = [spec.shared_weight] * len(spec.shared_topics) + [spec.own_weight] * len(pools[net])
        for pi in range(spec.programs_per_network):
            prog = f"{net} Program {pi + 1}"
            programs[program_id(net, prog)] = net
            for month in months:
                for r in range(spec.transcripts_per_program_month):
                    day = 1 + (r * 28) // spec.transcripts_per_program_month
                    chosen = _weighted_sample(rng, topics, weights, min(spec.topics_per_transcript, len(topics)))
                    lines = [f"PROGRAM: {prog}", f"NETWORK: {net}", f"DATE: {month}-{day:02d}", ""]
                    lines.append(f"ANCHOR: {rng.choice(FILLERS)}")
                    for ti, topic in enumerate(chosen):
                        sents = []
                        for _ in range(rng.randint(lo, hi)):
                            pol = stances[net][topic]
                            if spec.noise_rate > 0 and rng.random() < spec.noise_rate:
                                pol = rng.choice((-1, 0, 1))
                            sents.append(_stance_sentence(rng, topic, pol, spec.matched_valence))
                        if rng.random() < 0.5:
                            sents.append(rng.choice(FILLERS))
                        lines.append(f"{SPEAKERS[ti % len(SPEAKERS)]}: {' '.join(sents)}")
                    lines.append(f"ANCHOR: {FILLERS[-1]}")
                    slug = prog.lower().replace(" ", "_")
                    files.append((f"{month}/{slug}_{r + 1:02d}.txt", "\n".join(lines) + "\n"))

    truth = {
        "seed": spec.seed,
        "months": months,
        "networks": names,
        "programs": programs,
        "topic_pools": {net: [canonicalize(t) for t in spec.shared_topics + pools[net]] for net in names},
        "stances": {net: {canonicalize(t): pol for t, pol in table.items()} for net, table in stances.items()},
        "spec": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()},
    }
    return files, truth


def _weighted_sample(rng: random.Random, items, weights, n):
    items, weights = list(items), list(weights)
    out = []
    for _ in range(n):
        total = sum(weights)
        x = rng.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if x < acc:
                break
        out.append(items.pop(i))
        weights.pop(i)
    return out


def generate_synthetic(spec: SyntheticSpec, out_dir: str | Path) -> Path:
    """Write the corpus and ``truth.json`` under ``out_dir``; returns the directory."""
    out = Path(out_dir)
    files, truth = synthetic_corpus(spec)
    for rel, text in files:
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    (out / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out
