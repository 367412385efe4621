"""Relative rank of graph nodes with respect to a source (random walk with restart).

At every step the walker jumps back to the source with probability alpha, and
otherwise moves to a neighbour chosen in proportion to edge weight. The rank
of a node is its share of the stationary distribution.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError, UnknownNodeError
from .graph import CoauthorGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankConfig:
    restart_probability: float = 0.15
    tolerance: float = 1e-9
    max_iterations: int = 1000

    def __post_init__(self):
        if not 0.0 < self.restart_probability < 1.0:
            raise InputError("restart_probability must be in (0, 1)")
        if not self.tolerance > 0:
            raise InputError("tolerance must be > 0")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise InputError("max_iterations must be a positive integer")


@dataclass(frozen=True)
class RankResult:
    source: str
    scores: np.ndarray  # aligned with WalkOperator.nodes
    iterations: int
    converged: bool


class WalkOperator:
    """Column-stochastic transition matrix of a graph, built once and reused per source."""

    def __init__(self, g: CoauthorGraph):
        self.nodes = g.nodes
        self.index = {a: i for i, a in enumerate(self.nodes)}
        rows, cols, vals = [], [], []
        for a, b, w in g.edges():
            i, j = self.index[a], self.index[b]
            rows += [i, j]
            cols += [j, i]
            vals += [w, w]
        n = len(self.nodes)
        w = sp.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.float64)
        strength = np.asarray(w.sum(axis=1)).ravel()
        self.dangling = strength == 0
        inv = np.zeros(n)
        inv[~self.dangling] = 1.0 / strength[~self.dangling]
        # P[i, j] = w_ij / s_i ; we need P^T for pushing mass forward
        self.forward = (sp.diags(inv) @ w).T.tocsr()

    def __len__(self):
        return len(self.nodes)

    def source_index(self, source: str) -> int:
        try:
            return self.index[source]
        except KeyError:
            raise UnknownNodeError(f"unknown source author {source!r}") from None

    def run(self, source: str, cfg: RankConfig) -> RankResult:
        s = self.source_index(source)
        n = len(self)
        alpha = cfg.restart_probability
        x = np.zeros(n)
        x[s] = 1.0
        if self.dangling[s]:
            return RankResult(source, x, 0, True)
        for it in range(1, int(cfg.max_iterations) + 1):
            nxt = (1.0 - alpha) * (self.forward @ x)
            # restart mass plus whatever sat on dangling nodes
            nxt[s] += alpha + (1.0 - alpha) * x[self.dangling].sum()
            delta = np.abs(nxt - x).sum()
            x = nxt
            if delta < cfg.tolerance:
                return RankResult(source, x, it, True)
        log.warning("relative rank from %r did not converge in %d iterations", source, cfg.max_iterations)
        return RankResult(source, x, int(cfg.max_iterations), False)


def relative_rank(g: CoauthorGraph, source: str, cfg: RankConfig = RankConfig()) -> RankResult:
    return WalkOperator(g).run(source, cfg)


def relative_rank_dict(g: CoauthorGraph, source: str, cfg: RankConfig = RankConfig()) -> dict[str, float]:
    op = WalkOperator(g)
    res = op.run(source, cfg)
    return dict(zip(op.nodes, res.scores.tolist()))


@dataclass(frozen=True)
class RelativeRankMatrix:
    labels: tuple[str, ...]
    values: np.ndarray
    iterations: tuple[int, ...] = ()
    converged: tuple[bool, ...] = ()
    config: RankConfig = field(default_factory=RankConfig)

    def subset(self, labels: Sequence[str]) -> "RelativeRankMatrix":
        index = {x: i for i, x in enumerate(self.labels)}
        idx = [index[x] for x in labels]
        return RelativeRankMatrix(
            tuple(labels),
            self.values[np.ix_(idx, idx)],
            tuple(self.iterations[i] for i in idx) if self.iterations else (),
            tuple(self.converged[i] for i in idx) if self.converged else (),
            self.config,
        )

    def symmetrized(self) -> np.ndarray:
        return (self.values + self.values.T) / 2.0

    def metadata(self) -> dict:
        return {
            "alpha": self.config.restart_probability,
            "tolerance": self.config.tolerance,
            "max_iterations": self.config.max_iterations,
            "iterations": dict(zip(self.labels, self.iterations)),
            "converged": dict(zip(self.labels, self.converged)),
        }


def referee_rank_matrix(
    g: CoauthorGraph, referees: Sequence[str], cfg: RankConfig = RankConfig(), jobs: int = 1
) -> RelativeRankMatrix:
    """Row l holds the full-graph ranks, from referee l, at every referee's node."""
    missing = [r for r in referees if r not in g]
    if missing:
        raise UnknownNodeError(f"referees absent from the co-authorship graph: {missing}")
    op = WalkOperator(g)
    cols = [op.index[r] for r in referees]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda r: op.run(r, cfg), referees))
    else:
        results = [op.run(r, cfg) for r in referees]
    values = np.array([res.scores[cols] for res in results]).reshape(len(referees), len(referees))
    return RelativeRankMatrix(
        tuple(referees),
        values,
        tuple(r.iterations for r in results),
        tuple(r.converged for r in results),
        cfg,
    )


def rank_metadata_json(m: RelativeRankMatrix) -> str:
    return json.dumps(m.metadata(), indent=1)
