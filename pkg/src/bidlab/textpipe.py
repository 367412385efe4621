"""Abstract text processing and TFIDF weighting.

Tokens are lowercased alphanumeric runs (hyphens and punctuation split), stopwords
and one-character tokens are dropped, and the remainder is reduced with the
original Porter stemmer.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from nltk.stem.porter import PorterStemmer

from .bid_core import SimilarityMatrix
from .cluster import ClusterSet
from .errors import InputError, NumericalError

log = logging.getLogger(__name__)

_TOKEN = re.compile(r"[a-z0-9]+")
_stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    title: str = ""
    authors: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise InputError(f"document {self.id!r} has empty text")


@dataclass(frozen=True)
class TermDictionary:
    terms: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.terms)) != len(self.terms):
            raise InputError("duplicate terms in dictionary")

    def __len__(self) -> int:
        return len(self.terms)

    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}


@dataclass(frozen=True)
class FrequencyVector:
    owner: str
    counts: Mapping[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class WeightVector:
    owner: str
    weights: Mapping[str, float]

    def dense(self, dictionary: TermDictionary) -> np.ndarray:
        return np.array([self.weights.get(t, 0.0) for t in dictionary.terms], dtype=np.float64)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """One word per line; '#' starts a comment. Defaults to the bundled list."""
    if path is None:
        text = resources.files("bidlab").joinpath("data/stopwords.txt").read_text()
    else:
        text = Path(path).read_text()
    words = (line.split("#", 1)[0].strip().lower() for line in text.splitlines())
    return frozenset(w for w in words if w)


@lru_cache(maxsize=65536)
def stem(word: str) -> str:
    return _stemmer.stem(word)


def preprocess(text: str, stopwords: Iterable[str]) -> list[str]:
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    return [stem(t) for t in _TOKEN.findall(text.lower()) if len(t) >= 2 and t not in stop]


def build_dictionary(token_lists: Iterable[Sequence[str]]) -> TermDictionary:
    return TermDictionary(tuple(sorted({t for toks in token_lists for t in toks})))


def _counts(tokens: Sequence[str], dictionary: TermDictionary) -> Counter:
    known = dictionary.index()
    return Counter(t for t in tokens if t in known)


def cluster_frequencies(
    docs: Sequence[Document],
    clusters: ClusterSet,
    dictionary: TermDictionary,
    stopwords: Iterable[str],
) -> list[FrequencyVector]:
    """Summed term counts of the documents in each cluster, one vector per cluster.

    Owners are the cluster indices as strings; ``FrequencyVector.total`` is n(i).
    """
    member = clusters.membership()
    by_id = {d.id: d for d in docs}
    stray = [d.id for d in docs if d.id not in member]
    if stray:
        raise InputError(f"documents not in any cluster: {stray[:10]}")
    stop = frozenset(stopwords)
    out = []
    for ci, ids in enumerate(clusters.clusters):
        c: Counter = Counter()
        for x in ids:
            if x in by_id:
                c.update(_counts(preprocess(by_id[x].text, stop), dictionary))
        out.append(FrequencyVector(str(ci), dict(sorted(c.items()))))
    return out


def tfidf(freqs: Sequence[FrequencyVector], n_groups: int | None = None) -> list[WeightVector]:
    """weight(i, j) = freq(i, j) / n(i) * log10(N / n_c(j)), n_c = groups containing j."""
    N = len(freqs) if n_groups is None else n_groups
    n_c: Counter = Counter()
    for f in freqs:
        n_c.update(t for t, k in f.counts.items() if k > 0)
    out = []
    for f in freqs:
        n_i = f.total
        if n_i == 0:
            raise NumericalError(f"group {f.owner!r} has no terms")
        w = {t: (k / n_i) * math.log10(N / n_c[t]) for t, k in f.counts.items() if k > 0}
        out.append(WeightVector(f.owner, w))
    return out


def document_tfidf(
    docs: Sequence[Document], dictionary: TermDictionary, stopwords: Iterable[str]
) -> np.ndarray:
    """|docs| x |dictionary| TFIDF matrix, each document acting as its own group."""
    stop = frozenset(stopwords)
    idx = dictionary.index()
    counts = np.zeros((len(docs), len(dictionary)), dtype=np.float64)
    for i, d in enumerate(docs):
        for t, k in _counts(preprocess(d.text, stop), dictionary).items():
            counts[i, idx[t]] = k
    n_i = counts.sum(axis=1)
    empty = [docs[i].id for i in np.flatnonzero(n_i == 0)]
    if empty:
        raise NumericalError(f"documents with no dictionary terms: {empty[:10]}")
    df = (counts > 0).sum(axis=0)
    idf = np.zeros(len(dictionary))
    seen = df > 0
    idf[seen] = np.log10(len(docs) / df[seen])
    return counts / n_i[:, None] * idf[None, :]


def top_k_normalize(w: WeightVector, k: int = 10) -> dict[str, float]:
    """The k largest positive weights rescaled to sum to 1.

    Ties are broken by term order; with fewer than k positive weights all of
    them are used.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    positive = [(t, x) for t, x in w.weights.items() if x > 0]
    if not positive:
        raise NumericalError(f"weight vector {w.owner!r} has no positive weights")
    top = sorted(positive, key=lambda tx: (-tx[1], tx[0]))[:k]
    total = math.fsum(x for _, x in top)
    return {t: x / total for t, x in top}


def entropy(p: Mapping[str, float] | Sequence[float]) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    vals = np.asarray(list(p.values()) if isinstance(p, Mapping) else list(p), dtype=np.float64)
    if vals.size == 0 or np.any(vals < 0) or abs(math.fsum(vals) - 1.0) > 1e-9:
        raise NumericalError("entropy needs a non-negative vector summing to 1")
    nz = vals[vals > 0]
    return float(-math.fsum(nz * np.log2(nz))) + 0.0


def cosine_similarity_matrix(t: np.ndarray, labels: Sequence[str]) -> SimilarityMatrix:
    """Pairwise cosine of the rows; zero rows get 0 off-diagonal and 1 on the diagonal."""
    t = np.asarray(t, dtype=np.float64)
    if t.shape[0] != len(labels):
        raise InputError("label count does not match matrix rows")
    norms = np.sqrt(np.einsum("ij,ij->i", t, t))
    zero = norms == 0
    if zero.any():
        log.warning("%d document vector(s) are all zero: %s", int(zero.sum()),
                    [labels[i] for i in np.flatnonzero(zero)][:10])
    unit = np.zeros_like(t)
    unit[~zero] = t[~zero] / norms[~zero, None]
    s = unit @ unit.T
    n = len(labels)
    iu = np.triu_indices(n, k=1)
    upper = np.clip(s[iu], 0.0, 1.0)
    out = np.zeros((n, n))
    out[iu] = upper
    out.T[iu] = upper
    np.fill_diagonal(out, 1.0)
    return SimilarityMatrix(tuple(labels), out)


# -- I/O ---------------------------------------------------------------------


def read_corpus(path: str | Path) -> list[Document]:
    """JSON-lines corpus: {"id", "title", "abstract", "authors"} per line."""
    path = Path(path)
    docs = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                docs.append(Document(str(obj["id"]), obj["abstract"], obj.get("title", ""),
                                     tuple(obj.get("authors", ()))))
            except (KeyError, json.JSONDecodeError) as exc:
                raise InputError(f"{path}:{lineno}: bad corpus record ({exc})") from None
    return docs


def write_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.id, "title": d.title, "abstract": d.text,
                                 "authors": list(d.authors)}) + "\n")
