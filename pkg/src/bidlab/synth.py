"""Synthetic conferences with planted topics.

All randomness comes from one ``numpy.random.Generator`` over the PCG64 bit
generator, seeded with ``SynthConfig.seed``; generation order is fixed, so a
config always yields the same conference.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .bid_core import RawBidMatrix, write_bid_csv
from .errors import InputError
from .graph import PublicationRecord, write_publications
from .textpipe import Document, load_stopwords, stem, write_corpus

_ONSETS = "b c d f g h j k l m n p r s t v z br dr fl gr kl pr st tr".split()
_VOWELS = "a e i o u".split()
_FILLER = "the of and in a to for with on is that by this we".split()


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 42
    n_submissions: int = 120
    n_referees: int = 60
    n_topics: int = 8
    p_expert_match: float = 0.9
    p_expert_mismatch: float = 0.05
    p_wildcard: float = 0.2
    n_fatigue_referees: int = 19
    # int for every topic, or one size per topic; topic 0 is the narrowest by default
    vocab_per_topic: int | tuple[int, ...] = (20, 60, 80, 100, 120, 140, 160, 180)
    shared_vocab: int = 1500
    abstract_length: int = 90
    topic_word_share: float = 0.5
    filler_share: float = 0.15
    coauthor_intra_prob: float = 0.3
    coauthor_inter_prob: float = 0.02
    max_authors_per_paper: int = 5
    background_authors_per_topic: int = 12
    papers_per_author: int = 3

    def __post_init__(self):
        if isinstance(self.vocab_per_topic, list):
            object.__setattr__(self, "vocab_per_topic", tuple(self.vocab_per_topic))
        for name in ("p_expert_match", "p_expert_mismatch", "p_wildcard", "topic_word_share",
                     "filler_share", "coauthor_intra_prob", "coauthor_inter_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InputError(f"{name} must be a probability, got {v}")
        for name in ("n_submissions", "n_referees", "n_topics", "shared_vocab", "abstract_length",
                     "papers_per_author"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be positive")
        if self.max_authors_per_paper < 2:
            raise InputError("max_authors_per_paper must be >= 2")
        if self.background_authors_per_topic < 0:
            raise InputError("background_authors_per_topic must be >= 0")
        if not 0 <= self.n_fatigue_referees <= self.n_referees:
            raise InputError("n_fatigue_referees must lie in [0, n_referees]")
        sizes = self.topic_vocab_sizes()
        if len(sizes) != self.n_topics or min(sizes) < 1:
            raise InputError("vocab_per_topic needs one positive size per topic")

    def topic_vocab_sizes(self) -> tuple[int, ...]:
        v = self.vocab_per_topic
        if isinstance(v, int):
            return (v,) * self.n_topics
        if len(v) >= self.n_topics:
            return tuple(int(x) for x in v[: self.n_topics])
        return tuple(int(x) for x in v)

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["vocab_per_topic"], tuple):
            d["vocab_per_topic"] = list(d["vocab_per_topic"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> "SynthConfig":
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            data = tomllib.loads(path.read_text())
        else:
            data = json.loads(path.read_text())
        return cls.from_dict(data.get("synth", data))


@dataclass(frozen=True)
class GroundTruth:
    submission_topic: dict[str, int]
    referee_topic: dict[str, int]
    fatigue_referees: frozenset[str]
    topic_vocab: tuple[tuple[str, ...], ...] = ()

    def narrowest_topic(self) -> int:
        sizes = [len(v) for v in self.topic_vocab]
        return int(np.argmin(sizes))

    def to_dict(self) -> dict:
        return {
            "submission_topic": self.submission_topic,
            "referee_topic": self.referee_topic,
            "fatigue_referees": sorted(self.fatigue_referees),
            "topic_vocab": [list(v) for v in self.topic_vocab],
        }


@dataclass(frozen=True)
class SyntheticConference:
    config: SynthConfig
    bids: RawBidMatrix
    documents: tuple[Document, ...]
    publications: tuple[PublicationRecord, ...]
    truth: GroundTruth

    def write(self, directory: str | Path) -> dict[str, Path]:
        """Emit the standard input files and return their paths."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "bids": d / "bids.csv",
            "corpus": d / "corpus.jsonl",
            "publications": d / "publications.jsonl",
            "truth": d / "truth.json",
            "config": d / "synth_config.json",
        }
        write_bid_csv(self.bids, paths["bids"])
        write_corpus(self.documents, paths["corpus"])
        write_publications(self.publications, paths["publications"])
        paths["truth"].write_text(json.dumps(self.truth.to_dict(), indent=1, sort_keys=True) + "\n")
        paths["config"].write_text(json.dumps(self.config.to_dict(), indent=1, sort_keys=True) + "\n")
        return paths


def _make_vocabulary(rng: np.random.Generator, sizes: Sequence[int]) -> list[list[str]]:
    """Pseudo-words whose Porter stems are pairwise distinct and not stopwords."""
    stop = load_stopwords()
    used_stems: set[str] = set()
    used_words: set[str] = set()
    out = []
    for size in sizes:
        words: list[str] = []
        while len(words) < size:
            n_syl = int(rng.integers(2, 4))
            w = "".join(
                _ONSETS[int(rng.integers(len(_ONSETS)))] + _VOWELS[int(rng.integers(len(_VOWELS)))]
                for _ in range(n_syl)
            ) + _ONSETS[int(rng.integers(len(_ONSETS)))]
            st = stem(w)
            if w in used_words or st in used_stems or w in stop or st in stop:
                continue
            used_words.add(w)
            used_stems.add(st)
            words.append(w)
        out.append(words)
    return out


def _rank_profile(size: int) -> np.ndarray:
    """Word probabilities decaying exponentially over the vocabulary.

    The decay scale grows with the vocabulary, so a small vocabulary is also a
    concentrated one.
    """
    p = np.exp(-3.0 * np.arange(size) / size)
    return p / p.sum()


def _balanced(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    labels = np.arange(n) % k
    rng.shuffle(labels)
    return labels


def generate(cfg: SynthConfig = SynthConfig()) -> SyntheticConference:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    width_s = len(str(cfg.n_submissions))
    width_r = len(str(cfg.n_referees))
    subs = [f"s{i + 1:0{width_s}d}" for i in range(cfg.n_submissions)]
    refs = [f"r{i + 1:0{width_r}d}" for i in range(cfg.n_referees)]

    sub_topic = _balanced(rng, cfg.n_submissions, cfg.n_topics)
    ref_topic = _balanced(rng, cfg.n_referees, cfg.n_topics)
    fatigue = np.zeros(cfg.n_referees, dtype=bool)
    fatigue[rng.choice(cfg.n_referees, size=cfg.n_fatigue_referees, replace=False)] = True

    # bids
    u = rng.random((cfg.n_submissions, cfg.n_referees))
    v = rng.random((cfg.n_submissions, cfg.n_referees))
    eager = rng.random((cfg.n_submissions, cfg.n_referees)) < 0.4
    coi = rng.random((cfg.n_submissions, cfg.n_referees)) < 0.1
    match = sub_topic[:, None] == ref_topic[None, :]
    p_exp = np.where(match, cfg.p_expert_match, cfg.p_expert_mismatch)
    expert = v < p_exp
    cells = np.where(expert, np.where(eager, 1, 2), 3)
    cells[:, fatigue] = 2
    cells = np.where(u < cfg.p_wildcard, np.where(coi, 4, 0), cells)
    bids = RawBidMatrix(subs, refs, cells)

    # abstracts
    sizes = cfg.topic_vocab_sizes()
    vocab = _make_vocabulary(rng, list(sizes) + [cfg.shared_vocab])
    topic_vocab, shared = vocab[:-1], vocab[-1]
    profiles = [_rank_profile(len(w)) for w in topic_vocab]
    docs = []
    n_topic = int(round(cfg.abstract_length * cfg.topic_word_share))
    n_filler = int(round(cfg.abstract_length * cfg.filler_share))
    n_shared = max(cfg.abstract_length - n_topic - n_filler, 0)
    for sid, t in zip(subs, sub_topic):
        words = list(np.asarray(topic_vocab[t])[rng.choice(len(topic_vocab[t]), size=n_topic, p=profiles[t])])
        words += list(np.asarray(shared)[rng.integers(len(shared), size=n_shared)])
        words += list(np.asarray(_FILLER)[rng.integers(len(_FILLER), size=n_filler)])
        order = rng.permutation(len(words))
        text = " ".join(str(words[i]) for i in order)
        docs.append(Document(sid, text, title=f"synthetic submission {sid} (topic {int(t)})"))

    publications = _publications(rng, cfg, refs, ref_topic)

    truth = GroundTruth(
        {s: int(t) for s, t in zip(subs, sub_topic)},
        {r: int(t) for r, t in zip(refs, ref_topic)},
        frozenset(r for r, f in zip(refs, fatigue) if f),
        tuple(tuple(w) for w in topic_vocab),
    )
    return SyntheticConference(cfg, bids, tuple(docs), tuple(publications), truth)


def _publications(rng, cfg: SynthConfig, refs, ref_topic) -> list[PublicationRecord]:
    width = len(str(cfg.background_authors_per_topic * cfg.n_topics))
    background = [
        [f"a{t}_{i:0{width}d}" for i in range(cfg.background_authors_per_topic)] for t in range(cfg.n_topics)
    ]
    records: list[PublicationRecord] = []
    extra_max = cfg.max_authors_per_paper - 2

    def add(authors):
        records.append(PublicationRecord(f"p{len(records) + 1:05d}", tuple(authors)))

    def extras(topic, exclude):
        pool = [a for a in background[topic] if a not in exclude]
        k = min(int(rng.integers(0, extra_max + 1)), len(pool))
        return [pool[i] for i in sorted(rng.choice(len(pool), size=k, replace=False))] if k else []

    # referee-referee collaborations
    for i, j in combinations(range(len(refs)), 2):
        same = ref_topic[i] == ref_topic[j]
        if rng.random() < (cfg.coauthor_intra_prob if same else cfg.coauthor_inter_prob):
            pair = [refs[i], refs[j]]
            add(pair + extras(int(ref_topic[i]), pair))
    # each author also writes with the background community of their topic
    for r, t in zip(refs, ref_topic):
        for _ in range(cfg.papers_per_author):
            authors = [r] + extras(int(t), [r])
            if len(authors) == 1 and background[int(t)]:
                authors.append(background[int(t)][int(rng.integers(len(background[int(t)])))])
            add(authors)
    for t in range(cfg.n_topics):
        for a in background[t]:
            for _ in range(cfg.papers_per_author):
                add([a] + extras(t, [a]))
    return records


def same_seed_reproducibility(cfg: SynthConfig = SynthConfig()) -> bool:
    """Generate twice and compare every emitted artifact byte for byte."""
    import tempfile

    def dump(conf):
        with tempfile.TemporaryDirectory() as tmp:
            paths = conf.write(tmp)
            return {k: p.read_bytes() for k, p in paths.items()}

    return dump(generate(cfg)) == dump(generate(cfg))
