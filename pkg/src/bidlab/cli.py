"""Command line entry point: ``bidlab <subcommand> ...``.

Exit codes: 0 success, 2 input error, 3 numerical or convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bid_core import (
    BidMatrix,
    filter_bids,
    read_bid_csv,
    read_matrix_csv,
    read_similarity_csv,
    referee_similarity,
    submission_similarity,
    transform_bids,
    write_bid_csv,
    write_matrix_csv,
)
from .cluster import (
    LINKAGES,
    build_dendrogram,
    clusters_from_json,
    clusters_to_json,
    cut_dendrogram,
    dendrogram_to_json,
    threshold_for_k,
    to_newick,
)
from .errors import BidlabError, InputError, NumericalError
from .graph import build_graph, graph_stats, read_publications, to_dot, write_edge_csv
from .pipeline import (
    DEFAULT_CUT,
    PipelineConfig,
    StageError,
    cluster_term_tables,
    ordered_documents,
    rank_matrix,
    reload_config,
    run,
    write_cluster_corr_csv,
    write_entropy_csv,
    write_terms_csv,
)
from .stats import FLATTEN_MODES, correlate_matrices
from .synth import SynthConfig, generate
from .textpipe import build_dictionary, cosine_similarity_matrix, document_tfidf, load_stopwords, preprocess, read_corpus

OUTPUT_ROOT_ENV = "BIDLAB_OUTPUT_ROOT"

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_OTHER = 0, 2, 3, 1


def _out_dir(arg: str | None, default_name: str) -> Path:
    if arg:
        p = Path(arg)
    else:
        p = Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / default_name
    p.mkdir(parents=True, exist_ok=True)
    return p


def _require(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"input file not found: {p}")
    return p


def _modified_from_csv(path: str) -> BidMatrix:
    raw = read_bid_csv(_require(path))
    return BidMatrix(raw.rows, raw.cols, raw.cells)


def _emit_json(obj, path: Path | None):
    text = json.dumps(obj, indent=1, sort_keys=True)
    if path:
        path.write_text(text + "\n")
    print(text)


# -- subcommands -------------------------------------------------------------


def cmd_transform(args) -> int:
    raw = read_bid_csv(_require(args.bids))
    b = transform_bids(raw)
    counts = {}
    if not args.no_filter:
        excluded = set()
        if args.publications:
            graph = build_graph(read_publications(_require(args.publications)))
            excluded = {c for c in b.cols if c not in graph}
        if args.exclude:
            excluded |= set(args.exclude.split(","))
        b, report = filter_bids(b, excluded)
        counts = report.counts()
    out = _out_dir(args.out, "transform")
    write_bid_csv(b, out / "b_prime.csv")
    _emit_json({"shape": list(b.shape), "filter": counts}, out / "transform.json")
    return EXIT_OK


def _cmd_similarity(args, fn, name) -> int:
    b = _modified_from_csv(args.bids)
    s = fn(b)
    out = _out_dir(args.out, name)
    write_matrix_csv(s.labels, s.values, out / f"{name}.csv")
    if s.undefined_pairs:
        print(f"warning: {s.undefined_pairs} undefined pair(s) set to 0.0", file=sys.stderr)
    return EXIT_OK


def cmd_sim_subs(args) -> int:
    return _cmd_similarity(args, submission_similarity, "s_b")


def cmd_sim_refs(args) -> int:
    return _cmd_similarity(args, referee_similarity, "r_b")


def cmd_cluster(args) -> int:
    s = read_similarity_csv(_require(args.sim))
    d = build_dendrogram(s, args.linkage)
    if args.clusters is not None:
        threshold = threshold_for_k(d, args.clusters)
    else:
        threshold = args.cut
    c = cut_dendrogram(d, threshold)
    out = _out_dir(args.out, "cluster")
    (out / "dendrogram.newick").write_text(to_newick(d) + "\n")
    (out / "dendrogram.json").write_text(dendrogram_to_json(d) + "\n")
    (out / "clusters.json").write_text(clusters_to_json(c) + "\n")
    print(json.dumps({"clusters": len(c), "threshold": c.threshold, "root_height": float(d.heights.max())}))
    return EXIT_OK


def _cluster_docs(args):
    clusters = clusters_from_json(_require(args.clusters).read_text())
    member = clusters.membership()
    docs = read_corpus(_require(args.corpus))
    # abstracts outside the clustered set (e.g. filtered submissions) do not enter the dictionary
    return ordered_documents(docs, [d.id for d in docs if d.id in member]), clusters


def _bid_order(args, docs):
    """Documents ordered like the rows of the bid matrix when one is supplied."""
    if getattr(args, "bids", None):
        rows = _modified_from_csv(args.bids).rows
        return ordered_documents(docs, rows)
    return docs


def cmd_terms(args) -> int:
    docs, clusters = _cluster_docs(args)
    docs = _bid_order(args, docs)
    stop = load_stopwords(args.stopwords)
    tables = cluster_term_tables(docs, clusters, stop, args.top_k)
    out = _out_dir(args.out, "terms")
    write_terms_csv(tables, out / "terms.csv")
    write_cluster_corr_csv(tables, out / "cluster_corr.csv")
    return EXIT_OK


def cmd_entropy(args) -> int:
    docs, clusters = _cluster_docs(args)
    docs = _bid_order(args, docs)
    stop = load_stopwords(args.stopwords)
    tables = cluster_term_tables(docs, clusters, stop, args.top_k)
    out = _out_dir(args.out, "entropy")
    write_entropy_csv(tables, out / "entropy.csv")
    return EXIT_OK


def cmd_doc_tfidf(args) -> int:
    docs = _bid_order(args, read_corpus(_require(args.corpus)))
    stop = load_stopwords(args.stopwords)
    dictionary = build_dictionary(preprocess(d.text, stop) for d in docs)
    t = document_tfidf(docs, dictionary, stop)
    out = _out_dir(args.out, "doc_tfidf")
    with (out / "t.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *dictionary.terms])
        for d, row in zip(docs, t):
            w.writerow([d.id, *(repr(float(x)) for x in row)])
    return EXIT_OK


def cmd_cosine(args) -> int:
    with _require(args.tfidf).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    labels = [r[0] for r in rows[1:]]
    t = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=np.float64).reshape(len(labels), -1)
    s = cosine_similarity_matrix(t, labels)
    out = _out_dir(args.out, "cosine")
    write_matrix_csv(s.labels, s.values, out / "s_t.csv")
    return EXIT_OK


def cmd_graph(args) -> int:
    g = build_graph(read_publications(_require(args.publications)))
    out = _out_dir(args.out, "graph")
    write_edge_csv(g, out / "edges.csv")
    highlight = _modified_from_csv(args.bids).cols if args.bids else ()
    (out / "graph.dot").write_text(to_dot(g, highlight=highlight))
    _emit_json(graph_stats(g), out / "graph_stats.json")
    return EXIT_OK


def cmd_rank(args) -> int:
    g = build_graph(read_publications(_require(args.publications)))
    referees = list(_modified_from_csv(args.bids).cols)
    cfg = PipelineConfig(restart_probability=args.alpha, tolerance=args.tolerance,
                         max_iterations=args.max_iterations, jobs=args.jobs)
    m = rank_matrix(g, referees, cfg)
    out = _out_dir(args.out, "rank")
    write_matrix_csv(m.labels, m.values, out / "r_g.csv")
    (out / "r_g_meta.json").write_text(json.dumps(m.metadata(), indent=1, sort_keys=True) + "\n")
    if not all(m.converged):
        bad = [x for x, ok in zip(m.labels, m.converged) if not ok]
        raise NumericalError(f"relative rank did not converge for: {bad}")
    return EXIT_OK


def cmd_corr(args) -> int:
    la, a = read_matrix_csv(_require(args.a))
    lb, b = read_matrix_csv(_require(args.b))
    if la != lb:
        common = [x for x in la if x in set(lb)]
        if not args.align or len(common) < 2:
            raise InputError("matrices are labelled differently (use --align to intersect labels)")
        ia = [la.index(x) for x in common]
        ib = [lb.index(x) for x in common]
        a, b = a[np.ix_(ia, ia)], b[np.ix_(ib, ib)]
    if args.symmetrize_b:
        b = (b + b.T) / 2.0
    res = correlate_matrices(a, b, args.mode)
    _emit_json(res.to_dict(), Path(args.out) if args.out else None)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SynthConfig.from_file(args.config) if args.config else SynthConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = _out_dir(args.out, "synthetic")
    paths = generate(cfg).write(out)
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=1))
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.from_metadata:
        cfg = reload_config(_require(args.from_metadata), args.out)
    else:
        synthetic = None
        if args.synthetic:
            scfg = SynthConfig.from_file(args.synth_config) if args.synth_config else SynthConfig()
            if args.seed is not None:
                scfg = replace(scfg, seed=args.seed)
            synthetic = scfg.to_dict()
        cfg = PipelineConfig(
            bids=args.bids,
            corpus=args.corpus,
            publications=args.publications,
            stopwords=args.stopwords,
            synthetic=synthetic,
            linkage=args.linkage,
            cut=args.cut,
            n_clusters=args.clusters,
            top_k=args.top_k,
            restart_probability=args.alpha,
            tolerance=args.tolerance,
            max_iterations=args.max_iterations,
            symmetrize_rank=args.symmetrize_rank,
            flatten_mode=args.mode,
            exclude_fatigue=args.exclude_fatigue,
            jobs=args.jobs,
            out=str(_out_dir(args.out, "run")),
        )
    report = run(cfg)
    c = report["correlations"]
    summary = {track: {k: round(v["r"], 4) for k, v in c[track].items()} for track in c}
    print(json.dumps({"out": cfg.out, "correlations": summary, "clusters": report["clusters"]["count"]}, indent=1))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_rank_args(p):
    p.add_argument("--alpha", type=float, default=0.15, help="restart probability")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--jobs", type=int, default=1, help="worker threads for rank rows")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bidlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"bidlab {__version__}")
    ap.add_argument("--error-json", action="store_true", help="report failures as JSON on stderr")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="raw bids -> filtered expertise categories (b_prime.csv)")
    p.add_argument("--bids", required=True)
    p.add_argument("--publications", help="drop referees absent from this publication corpus")
    p.add_argument("--exclude", help="comma-separated referee ids to drop")
    p.add_argument("--no-filter", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_transform)

    for name, func, help_ in (("sim-subs", cmd_sim_subs, "submission similarity (s_b.csv)"),
                              ("sim-refs", cmd_sim_refs, "referee similarity (r_b.csv)")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--bids", required=True, help="transformed bid CSV (codes 0..2)")
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("cluster", help="dendrogram and threshold cut of a similarity matrix")
    p.add_argument("--sim", required=True)
    p.add_argument("--linkage", choices=LINKAGES, default="average")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--cut", type=float, default=DEFAULT_CUT)
    g.add_argument("--clusters", type=int, help="cut at the gap leaving this many clusters")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cluster)

    for name, func in (("terms", cmd_terms), ("entropy", cmd_entropy)):
        p = sub.add_parser(name, help=f"cluster {name} tables")
        p.add_argument("--corpus", required=True)
        p.add_argument("--clusters", required=True, help="clusters.json")
        p.add_argument("--bids", help="transformed bid CSV fixing the document order")
        p.add_argument("--stopwords")
        p.add_argument("--top-k", type=int, default=10)
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("doc-tfidf", help="document x term TFIDF matrix (t.csv)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--bids", help="transformed bid CSV selecting and ordering the documents")
    p.add_argument("--stopwords")
    p.add_argument("--out")
    p.set_defaults(func=cmd_doc_tfidf)

    p = sub.add_parser("cosine", help="cosine similarity of TFIDF rows (s_t.csv)")
    p.add_argument("--tfidf", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cosine)

    p = sub.add_parser("graph", help="co-authorship graph export and statistics")
    p.add_argument("--publications", required=True)
    p.add_argument("--bids", help="highlight these referees in the DOT output")
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("rank", help="referee relative-rank matrix (r_g.csv)")
    p.add_argument("--publications", required=True)
    p.add_argument("--bids", required=True, help="transformed bid CSV naming the referees")
    _add_rank_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("corr", help="Pearson correlation of two labelled matrices")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--mode", choices=FLATTEN_MODES, default="full")
    p.add_argument("--align", action="store_true", help="restrict both to shared labels")
    p.add_argument("--symmetrize-b", action="store_true")
    p.add_argument("--out", help="write the JSON result here as well")
    p.set_defaults(func=cmd_corr)

    p = sub.add_parser("synth", help="write a synthetic conference (bids, corpus, publications)")
    p.add_argument("--config", help="JSON or TOML synthetic config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("reproduce", help="run the full analysis and write a report directory")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--synthetic", action="store_true", help="generate the inputs")
    src.add_argument("--from-metadata", help="rerun from a previous run's metadata.json")
    p.add_argument("--synth-config")
    p.add_argument("--seed", type=int)
    p.add_argument("--bids")
    p.add_argument("--corpus")
    p.add_argument("--publications")
    p.add_argument("--stopwords")
    p.add_argument("--linkage", choices=LINKAGES, default="average")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--cut", type=float, help=f"cut height (default {DEFAULT_CUT}; synthetic runs default to --clusters n_topics)")
    g.add_argument("--clusters", type=int)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--mode", choices=FLATTEN_MODES, default="full")
    p.add_argument("--symmetrize-rank", action="store_true")
    p.add_argument("--exclude-fatigue", action="store_true")
    _add_rank_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)
    for p in sub.choices.values():
        p.add_argument("--error-json", action="store_true", default=argparse.SUPPRESS,
                       help="report failures as JSON on stderr")
    return ap


def _exit_code(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, NumericalError):
        return EXIT_NUMERIC
    if isinstance(cause, (InputError, OSError, ValueError, KeyError)):
        return EXIT_INPUT
    return EXIT_OTHER


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (BidlabError, OSError) as exc:
        code = _exit_code(exc)
        if args.error_json:
            err = {"error": type(exc.cause if isinstance(exc, StageError) else exc).__name__,
                   "message": str(exc), "exit_code": code}
            if isinstance(exc, StageError):
                err["stage"] = exc.stage
            print(json.dumps(err), file=sys.stderr)
        else:
            print(f"bidlab: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
