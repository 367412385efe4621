"""End-to-end analysis run: bid similarity vs. abstract terms, and bid similarity vs. co-authorship."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bid_core import (
    BidMatrix,
    SimilarityMatrix,
    fatigue_referees,
    filter_bids,
    format_float,
    read_bid_csv,
    referee_similarity,
    submission_similarity,
    transform_bids,
    write_matrix_csv,
)
from .cluster import ClusterSet, build_dendrogram, clusters_to_json, cut_dendrogram, dendrogram_to_json, threshold_for_k, to_newick
from .errors import BidlabError, InputError
from .graph import CoauthorGraph, build_graph, read_publications
from .rank import RankConfig, RelativeRankMatrix, referee_rank_matrix
from .stats import CorrelationResult, correlate_matrices, correlate_term_vectors
from .synth import SynthConfig, generate
from .textpipe import (
    Document,
    build_dictionary,
    cluster_frequencies,
    cosine_similarity_matrix,
    document_tfidf,
    entropy,
    load_stopwords,
    preprocess,
    read_corpus,
    tfidf,
    top_k_normalize,
)

log = logging.getLogger(__name__)

DEFAULT_CUT = 1.1


class StageError(BidlabError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    bids: str | None = None
    corpus: str | None = None
    publications: str | None = None
    stopwords: str | None = None
    synthetic: dict | None = None
    linkage: str = "average"
    cut: float | None = None
    n_clusters: int | None = None
    top_k: int = 10
    restart_probability: float = 0.15
    tolerance: float = 1e-9
    max_iterations: int = 1000
    symmetrize_rank: bool = False
    flatten_mode: str = "full"
    exclude_fatigue: bool = False
    jobs: int = 1
    out: str = "bidlab-run"

    def rank_config(self) -> RankConfig:
        return RankConfig(self.restart_probability, self.tolerance, self.max_iterations)

    def resolved_cut(self) -> tuple[float | None, int | None]:
        """(threshold, k); exactly one is set."""
        if self.cut is not None:
            return self.cut, None
        if self.n_clusters is not None:
            return None, self.n_clusters
        if self.synthetic is not None:
            return None, SynthConfig.from_dict(self.synthetic).n_topics
        return DEFAULT_CUT, None

    def to_dict(self) -> dict:
        # the output location is not a parameter of the analysis
        d = asdict(self)
        del d["out"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(**d)


class _WarningCollector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: list[str] = []

    def emit(self, record):
        self.messages.append(f"{record.name}: {record.getMessage()}")


def _stage(name):
    def wrap(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except (BidlabError, OSError, ValueError) as exc:
                raise StageError(name, exc) from exc

        run.__name__ = fn.__name__
        return run

    return wrap


# -- individual stages, shared with the CLI subcommands ----------------------


def modified_bids(raw_path: str | Path, graph: CoauthorGraph | None) -> tuple[BidMatrix, dict]:
    raw = read_bid_csv(raw_path)
    b = transform_bids(raw)
    absent = [c for c in b.cols if graph is not None and c not in graph]
    filtered, report = filter_bids(b, absent)
    return filtered, report.counts()


def drop_fatigue(b: BidMatrix) -> tuple[BidMatrix, list[str]]:
    tired = fatigue_referees(b)
    if not tired:
        return b, []
    kept, _ = filter_bids(b.drop_cols(tired))
    return kept, tired


def ordered_documents(docs: Sequence[Document], ids: Sequence[str]) -> list[Document]:
    by_id = {d.id: d for d in docs}
    missing = [x for x in ids if x not in by_id]
    if missing:
        raise InputError(f"corpus lacks abstracts for submissions: {missing[:10]}")
    return [by_id[x] for x in ids]


def term_similarity(docs: Sequence[Document], stopwords) -> tuple[SimilarityMatrix, np.ndarray, list[str]]:
    dictionary = build_dictionary(preprocess(d.text, stopwords) for d in docs)
    t = document_tfidf(docs, dictionary, stopwords)
    return cosine_similarity_matrix(t, [d.id for d in docs]), t, list(dictionary.terms)


def cluster_submissions(s_b: SimilarityMatrix, linkage: str, cut: float | None, k: int | None):
    dendro = build_dendrogram(s_b, linkage)
    threshold = cut if cut is not None else threshold_for_k(dendro, k)
    return dendro, cut_dendrogram(dendro, threshold)


@dataclass
class TermTables:
    top_terms: list[list[tuple[str, float]]]
    entropies: list[float]
    correlations: np.ndarray
    undefined: list[tuple[int, int]] = field(default_factory=list)
    dictionary_size: int = 0


def cluster_term_tables(docs: Sequence[Document], clusters: ClusterSet, stopwords, top_k: int) -> TermTables:
    if len(clusters) < 2:
        raise InputError(
            f"cut produced {len(clusters)} cluster(s); term specificity needs at least 2 (lower the cut or set --clusters)"
        )
    dictionary = build_dictionary(preprocess(d.text, stopwords) for d in docs)
    freqs = cluster_frequencies(docs, clusters, dictionary, stopwords)
    weights = tfidf(freqs, len(clusters))
    top, ent = [], []
    for w in weights:
        p = top_k_normalize(w, top_k)
        top.append(sorted(((t, w.weights[t]) for t in p), key=lambda tx: (-tx[1], tx[0])))
        ent.append(entropy(p))
    corr, undefined = correlate_term_vectors([w.dense(dictionary) for w in weights])
    return TermTables(top, ent, corr, undefined, len(dictionary))


def write_terms_csv(tables: TermTables, path: Path) -> None:
    k = max(len(t) for t in tables.top_terms)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", *(f"C{i + 1}" for i in range(len(tables.top_terms)))])
        for r in range(k):
            w.writerow([r + 1, *(t[r][0] if r < len(t) else "" for t in tables.top_terms)])


def write_entropy_csv(tables: TermTables, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "entropy"])
        for i, h in enumerate(tables.entropies):
            w.writerow([f"C{i + 1}", format_float(h)])


def write_cluster_corr_csv(tables: TermTables, path: Path) -> None:
    names = [f"C{i + 1}" for i in range(len(tables.entropies))]
    write_matrix_csv(names, tables.correlations, path, corner="cluster")


def rank_matrix(graph: CoauthorGraph, referees: Sequence[str], cfg: PipelineConfig) -> RelativeRankMatrix:
    return referee_rank_matrix(graph, referees, cfg.rank_config(), jobs=cfg.jobs)


def rank_values(m: RelativeRankMatrix, symmetrize: bool) -> np.ndarray:
    return m.symmetrized() if symmetrize else m.values


# -- full run ----------------------------------------------------------------


def _versions() -> dict:
    import nltk
    import scipy

    return {"bidlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "nltk": nltk.__version__}


def _corr_dict(c: CorrelationResult) -> dict:
    return c.to_dict()


def run(cfg: PipelineConfig) -> dict:
    """Execute every stage and write the run directory. Returns the report."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    collector = _WarningCollector()
    root = logging.getLogger("bidlab")
    root.addHandler(collector)
    try:
        report = _run(cfg, out)
    finally:
        root.removeHandler(collector)
    meta = {
        "config": cfg.to_dict(),
        "versions": _versions(),
        "warnings": collector.messages,
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    report["warnings"] = collector.messages
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    return report


def _run(cfg: PipelineConfig, out: Path) -> dict:
    inputs = _stage("inputs")(_resolve_inputs)(cfg, out)
    stop = _stage("stopwords")(load_stopwords)(cfg.stopwords)
    graph = _stage("graph")(lambda: build_graph(read_publications(inputs["publications"])))()
    b, filter_counts = _stage("transform")(modified_bids)(inputs["bids"], graph)
    b_rested, tired = _stage("fatigue")(drop_fatigue)(b)
    docs_all = _stage("corpus")(read_corpus)(inputs["corpus"])
    main_b = b_rested if cfg.exclude_fatigue else b

    s_b = _stage("sim_subs")(submission_similarity)(main_b)
    docs = _stage("corpus")(ordered_documents)(docs_all, main_b.rows)
    s_t, _, terms = _stage("doc_tfidf")(term_similarity)(docs, stop)
    r_b = _stage("sim_refs")(referee_similarity)(main_b)

    cut, k = cfg.resolved_cut()
    dendro, clusters = _stage("cluster")(cluster_submissions)(s_b, cfg.linkage, cut, k)
    tables = _stage("terms")(cluster_term_tables)(docs, clusters, stop, cfg.top_k)

    r_g = _stage("rank")(rank_matrix)(graph, list(main_b.cols), cfg)

    corr = _stage("corr")
    t1 = corr(correlate_matrices)(s_b.values, s_t.values, cfg.flatten_mode)
    t2 = corr(correlate_matrices)(r_b.values, rank_values(r_g, cfg.symmetrize_rank), cfg.flatten_mode)

    # variant with the referees who called themselves expert on everything
    variants = {}
    other_b = b if cfg.exclude_fatigue else b_rested
    if tired:
        other_s_b = submission_similarity(other_b)
        other_docs = ordered_documents(docs_all, other_b.rows)
        other_s_t = s_t.subset(other_b.rows) if set(other_b.rows) <= set(s_t.labels) else term_similarity(other_docs, stop)[0]
        other_r_b = referee_similarity(other_b)
        if cfg.exclude_fatigue:
            other_r_g = rank_matrix(graph, list(other_b.cols), cfg)
        else:
            other_r_g = r_g.subset(list(other_b.cols))
        variants = {
            "track1": corr(correlate_matrices)(other_s_b.values, other_s_t.values, cfg.flatten_mode),
            "track2": corr(correlate_matrices)(
                other_r_b.values, rank_values(other_r_g, cfg.symmetrize_rank), cfg.flatten_mode
            ),
        }

    # outputs
    write_matrix_csv(s_b.labels, s_b.values, out / "s_b.csv")
    write_matrix_csv(s_t.labels, s_t.values, out / "s_t.csv")
    write_matrix_csv(r_b.labels, r_b.values, out / "r_b.csv")
    write_matrix_csv(r_g.labels, r_g.values, out / "r_g.csv")
    (out / "r_g_meta.json").write_text(json.dumps(r_g.metadata(), indent=1, sort_keys=True) + "\n")
    (out / "dendrogram.newick").write_text(to_newick(dendro) + "\n")
    (out / "dendrogram.json").write_text(dendrogram_to_json(dendro) + "\n")
    (out / "clusters.json").write_text(clusters_to_json(clusters) + "\n")
    write_terms_csv(tables, out / "terms.csv")
    write_entropy_csv(tables, out / "entropy.csv")
    write_cluster_corr_csv(tables, out / "cluster_corr.csv")

    main_key = "without_fatigue" if cfg.exclude_fatigue else "all_referees"
    other_key = "all_referees" if cfg.exclude_fatigue else "without_fatigue"
    report = {
        "shape": {"submissions": len(main_b.rows), "referees": len(main_b.cols), "dictionary": len(terms)},
        "filter": filter_counts,
        "fatigue_referees": tired,
        "clusters": {
            "count": len(clusters),
            "threshold": clusters.threshold,
            "linkage": cfg.linkage,
            "sizes": [len(c) for c in clusters.clusters],
        },
        "top_terms": {f"C{i + 1}": [t for t, _ in ts] for i, ts in enumerate(tables.top_terms)},
        "entropy": {f"C{i + 1}": h for i, h in enumerate(tables.entropies)},
        "cluster_correlation": {
            "labels": [f"C{i + 1}" for i in range(len(tables.entropies))],
            "values": [[None if np.isnan(x) else float(x) for x in row] for row in tables.correlations],
        },
        "correlations": {
            "track1": {main_key: _corr_dict(t1)},
            "track2": {main_key: _corr_dict(t2)},
        },
        "rank": {
            "alpha": cfg.restart_probability,
            "all_converged": all(r_g.converged),
            "max_iterations_used": max(r_g.iterations) if r_g.iterations else 0,
        },
    }
    if variants:
        report["correlations"]["track1"][other_key] = _corr_dict(variants["track1"])
        report["correlations"]["track2"][other_key] = _corr_dict(variants["track2"])
    return report


def _resolve_inputs(cfg: PipelineConfig, out: Path) -> dict[str, Path]:
    if cfg.synthetic is not None:
        conf = generate(SynthConfig.from_dict(cfg.synthetic))
        return conf.write(out / "inputs")
    paths = {}
    for name in ("bids", "corpus", "publications"):
        value = getattr(cfg, name)
        if value is None:
            raise InputError(f"missing required input: --{name}")
        p = Path(value)
        if not p.is_file():
            raise InputError(f"input file not found: {p}")
        paths[name] = p
    return paths


def reload_config(metadata_path: str | Path, out: str | None = None) -> PipelineConfig:
    meta = json.loads(Path(metadata_path).read_text())
    cfg = PipelineConfig.from_dict(meta["config"])
    return replace(cfg, out=out) if out else cfg
