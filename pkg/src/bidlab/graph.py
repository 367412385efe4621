"""Weighted co-authorship graph.

Each publication with A authors adds 1 / (A - 1) to the edge of every
co-author pair on it. Single-author publications only register the node.
"""

from __future__ import annotations

import csv
import json
import unicodedata
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import InputError, UnknownNodeError


def normalize_author(name: str) -> str:
    return unicodedata.normalize("NFC", str(name)).strip()


@dataclass(frozen=True)
class PublicationRecord:
    id: str
    authors: tuple[str, ...]

    def __post_init__(self):
        authors = tuple(normalize_author(a) for a in self.authors)
        if not authors or any(not a for a in authors):
            raise InputError(f"record {self.id!r} has an empty author list or blank author")
        if len(set(authors)) != len(authors):
            raise InputError(f"record {self.id!r} lists the same author twice: {list(authors)}")
        object.__setattr__(self, "authors", authors)


class CoauthorGraph:
    """Undirected weighted graph stored as a sorted adjacency map."""

    def __init__(self, nodes: Iterable[str] = (), adjacency: Mapping[str, Mapping[str, float]] | None = None):
        adjacency = adjacency or {}
        names = set(nodes) | set(adjacency)
        for a, nbrs in adjacency.items():
            names.update(nbrs)
        adj: dict[str, dict[str, float]] = {}
        for a in sorted(names):
            nbrs = adjacency.get(a, {})
            for b, w in nbrs.items():
                if a == b:
                    raise InputError(f"self-loop on {a!r}")
                if not w > 0:
                    raise InputError(f"non-positive weight on edge {a!r}-{b!r}")
                if adjacency.get(b, {}).get(a) != w:
                    raise InputError(f"edge {a!r}-{b!r} is not symmetric")
            adj[a] = dict(sorted(nbrs.items()))
        self._adj = adj

    @property
    def nodes(self) -> list[str]:
        return list(self._adj)

    def __contains__(self, node: str) -> bool:
        return node in self._adj

    def __len__(self) -> int:
        return len(self._adj)

    def neighbors(self, node: str) -> dict[str, float]:
        try:
            return dict(self._adj[node])
        except KeyError:
            raise UnknownNodeError(f"unknown author {node!r}") from None

    def weight(self, a: str, b: str) -> float:
        return self._adj.get(a, {}).get(b, 0.0)

    def edges(self) -> list[tuple[str, str, float]]:
        return [(a, b, w) for a, nbrs in self._adj.items() for b, w in nbrs.items() if a < b]

    def __eq__(self, other):
        return isinstance(other, CoauthorGraph) and self._adj == other._adj

    __hash__ = None

    def __repr__(self):
        return f"CoauthorGraph(nodes={len(self)}, edges={len(self.edges())})"


def build_graph(records: Iterable[PublicationRecord]) -> CoauthorGraph:
    acc: dict[str, dict[str, float]] = defaultdict(dict)
    nodes = set()
    # accumulate per pair as a list so the sum is independent of record order
    parts: dict[tuple[str, str], list[float]] = defaultdict(list)
    for rec in records:
        nodes.update(rec.authors)
        k = len(rec.authors)
        if k < 2:
            continue
        for a, b in combinations(sorted(rec.authors), 2):
            parts[(a, b)].append(k - 1)
    for (a, b), denominators in parts.items():
        w = _reciprocal_sum(denominators)
        acc[a][b] = w
        acc[b][a] = w
    return CoauthorGraph(nodes, acc)


def _reciprocal_sum(denominators: list[int]) -> float:
    """sum(1/d) evaluated exactly, then rounded once."""
    from fractions import Fraction

    return float(sum(Fraction(1, d) for d in denominators))


def induced_subgraph(g: CoauthorGraph, keep: Iterable[str], drop_isolated: bool = False) -> CoauthorGraph:
    keep = set(keep)
    unknown = sorted(k for k in keep if k not in g)
    if unknown:
        raise UnknownNodeError(f"unknown author ids: {unknown}")
    adj = {a: {b: w for b, w in g.neighbors(a).items() if b in keep} for a in keep}
    if drop_isolated:
        adj = {a: nbrs for a, nbrs in adj.items() if nbrs}
    return CoauthorGraph(adj.keys(), adj)


def components(g: CoauthorGraph) -> list[list[str]]:
    seen: set[str] = set()
    out = []
    for start in g.nodes:
        if start in seen:
            continue
        comp, stack = [], [start]
        seen.add(start)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in g.neighbors(x):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        out.append(sorted(comp))
    return out


def graph_stats(g: CoauthorGraph) -> dict:
    edges = g.edges()
    degrees = [len(g.neighbors(a)) for a in g.nodes]
    strengths = [sum(g.neighbors(a).values()) for a in g.nodes]
    weights = [w for _, _, w in edges]

    def summary(xs):
        if not xs:
            return {"min": 0.0, "max": 0.0, "mean": 0.0}
        return {"min": float(min(xs)), "max": float(max(xs)), "mean": float(sum(xs) / len(xs))}

    return {
        "nodes": len(g),
        "edges": len(edges),
        "components": len(components(g)),
        "isolated": sum(1 for d in degrees if d == 0),
        "total_weight": float(sum(weights)),
        "degree": summary(degrees),
        "strength": summary(strengths),
        "weight": summary(weights),
    }


# -- I/O ---------------------------------------------------------------------


def read_publications(path: str | Path) -> list[PublicationRecord]:
    """JSON-lines: {"id": ..., "authors": [...]} per line."""
    path = Path(path)
    out = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(PublicationRecord(str(obj["id"]), tuple(obj["authors"])))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise InputError(f"{path}:{lineno}: bad publication record ({exc})") from None
    return out


def write_publications(records: Iterable[PublicationRecord], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for r in records:
            fh.write(json.dumps({"id": r.id, "authors": list(r.authors)}) + "\n")


def write_edge_csv(g: CoauthorGraph, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["author_a", "author_b", "weight"])
        for a, b, x in g.edges():
            w.writerow([a, b, repr(float(x))])


def to_dot(g: CoauthorGraph, name: str = "coauthors", highlight: Sequence[str] = ()) -> str:
    def q(s):
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

    marked = set(highlight)
    lines = [f"graph {q(name)} {{"]
    for a in g.nodes:
        attrs = " [style=filled]" if a in marked else ""
        lines.append(f"  {q(a)}{attrs};")
    for a, b, w in g.edges():
        lines.append(f"  {q(a)} -- {q(b)} [weight={w!r}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
