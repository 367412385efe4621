"""Agglomerative clustering of a similarity matrix and threshold cuts of the tree.

Node numbering follows the usual linkage-matrix convention: leaves are
``0..n-1`` in input order, the k-th merge creates node ``n + k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .bid_core import SimilarityMatrix
from .errors import InputError

Linkage = Literal["single", "complete", "average", "ward"]
LINKAGES: tuple[str, ...] = ("single", "complete", "average", "ward")


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]
    linkage: str = "average"

    def __post_init__(self):
        n = len(self.leaves)
        if n and len(self.merges) != n - 1:
            raise InputError(f"{n} leaves need {n - 1} merges, got {len(self.merges)}")
        used = set()
        for k, m in enumerate(self.merges):
            for child in (m.left, m.right):
                if not 0 <= child < n + k or child in used:
                    raise InputError(f"merge {k} references invalid or reused node {child}")
                used.add(child)
            if m.height < 0:
                raise InputError(f"merge {k} has negative height {m.height}")

    @property
    def n(self) -> int:
        return len(self.leaves)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges], dtype=np.float64)

    @property
    def root(self) -> int:
        return 2 * self.n - 2

    def members(self, node: int) -> list[int]:
        """Leaf indices under ``node``."""
        out, stack = [], [node]
        while stack:
            x = stack.pop()
            if x < self.n:
                out.append(x)
            else:
                m = self.merges[x - self.n]
                stack.extend((m.right, m.left))
        return sorted(out)

    def to_linkage_matrix(self) -> np.ndarray:
        """(n-1) x 4 array in scipy's linkage layout, for external plotting."""
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=np.float64)


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple[tuple[str, ...], ...]
    threshold: float

    def __len__(self) -> int:
        return len(self.clusters)

    def membership(self) -> dict[str, int]:
        return {x: i for i, c in enumerate(self.clusters) for x in c}


def _update(linkage: str, d_ik, d_jk, d_ij, ni, nj, nk):
    if linkage == "single":
        return np.minimum(d_ik, d_jk)
    if linkage == "complete":
        return np.maximum(d_ik, d_jk)
    if linkage == "average":
        return (ni * d_ik + nj * d_jk) / (ni + nj)
    if linkage == "ward":
        sq = ((ni + nk) * d_ik**2 + (nj + nk) * d_jk**2 - nk * d_ij**2) / (ni + nj + nk)
        return np.sqrt(np.maximum(sq, 0.0))
    raise InputError(f"unknown linkage {linkage!r}; choose from {LINKAGES}")


def build_dendrogram(s: SimilarityMatrix, linkage: Linkage = "average") -> Dendrogram:
    """Agglomerate on distances ``1 - similarity``.

    Equal-distance candidates are resolved by the lexicographically smallest
    pair of (smallest leaf position in each cluster).
    """
    if linkage not in LINKAGES:
        raise InputError(f"unknown linkage {linkage!r}; choose from {LINKAGES}")
    n = len(s)
    if n < 2:
        raise InputError("need at least two entities to build a dendrogram")

    d = 1.0 - np.array(s.values, dtype=np.float64)
    np.fill_diagonal(d, np.inf)
    d[np.tril_indices(n)] = np.inf
    # a merged cluster lives in the slot of its smallest leaf, so slot index == min leaf
    node = list(range(n))
    size = np.ones(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    full = 1.0 - np.array(s.values, dtype=np.float64)
    merges = []
    for k in range(n - 1):
        flat = int(np.argmin(d))  # row-major first minimum == lexicographic tie-break
        i, j = divmod(flat, n)
        h = float(d[i, j])
        merges.append(Merge(node[i], node[j], max(h, 0.0), int(size[i] + size[j])))

        others = np.flatnonzero(active)
        others = others[(others != i) & (others != j)]
        new = _update(linkage, full[i, others], full[j, others], h, size[i], size[j], size[others])
        full[i, others] = new
        full[others, i] = new
        active[j] = False
        d[j, :] = np.inf
        d[:, j] = np.inf
        lo, hi = others[others < i], others[others > i]
        d[lo, i] = full[lo, i]
        d[i, hi] = full[i, hi]
        size[i] += size[j]
        node[i] = n + k
    return Dendrogram(tuple(s.labels), tuple(merges), linkage)


def cut_dendrogram(d: Dendrogram, threshold: float) -> ClusterSet:
    """Flat clusters after removing every merge higher than ``threshold``."""
    if threshold < 0:
        raise InputError("threshold must be >= 0")
    n = d.n
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k, m in enumerate(d.merges):
        if m.height <= threshold:
            new = n + k
            parent[find(m.left)] = new
            parent[find(m.right)] = new

    groups: dict[int, list[int]] = {}
    for leaf in range(n):
        groups.setdefault(find(leaf), []).append(leaf)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    return ClusterSet(tuple(tuple(d.leaves[i] for i in g) for g in ordered), float(threshold))


def threshold_for_k(d: Dendrogram, k: int) -> float:
    """Cut height midway in the gap that leaves ``k`` clusters."""
    n = d.n
    if not 1 <= k <= n:
        raise InputError(f"k must be in [1, {n}]")
    h = np.sort(d.heights)
    if k == n:
        return 0.0 if h[0] > 0 else float(h[0])
    if k == 1:
        return float(h[-1])
    return float((h[n - k - 1] + h[n - k]) / 2.0)


def cut_to_k(d: Dendrogram, k: int) -> ClusterSet:
    return cut_dendrogram(d, threshold_for_k(d, k))


def _newick_label(label: str) -> str:
    if any(c in label for c in " ()[]':;,\t\n"):
        return "'" + label.replace("'", "''") + "'"
    return label


def to_newick(d: Dendrogram, digits: int = 10) -> str:
    """Newick string with branch lengths = parent height - child height."""
    n = d.n
    if n == 1:
        return _newick_label(d.leaves[0]) + ";"
    height = [0.0] * n + [m.height for m in d.merges]
    text: dict[int, str] = {}
    for k, m in enumerate(d.merges):
        me = n + k
        parts = []
        for child in (m.left, m.right):
            sub = text.pop(child) if child >= n else _newick_label(d.leaves[child])
            bl = round(height[me] - height[child], digits) + 0.0
            parts.append(f"{sub}:{bl!r}")
        text[me] = "(" + ",".join(parts) + ")"
    return text[d.root] + ";"


def dendrogram_to_json(d: Dendrogram) -> str:
    return json.dumps(
        {
            "linkage": d.linkage,
            "leaves": list(d.leaves),
            "merges": [[m.left, m.right, m.height, m.size] for m in d.merges],
        },
        indent=1,
    )


def dendrogram_from_json(text: str) -> Dendrogram:
    obj = json.loads(text)
    merges = tuple(Merge(int(a), int(b), float(h), int(sz)) for a, b, h, sz in obj["merges"])
    return Dendrogram(tuple(obj["leaves"]), merges, obj.get("linkage", "average"))


def clusters_to_json(c: ClusterSet) -> str:
    return json.dumps(
        {"threshold": c.threshold, "clusters": {str(i): list(g) for i, g in enumerate(c.clusters)}},
        indent=1,
    )


def clusters_from_json(text: str) -> ClusterSet:
    obj = json.loads(text)
    groups = [tuple(obj["clusters"][k]) for k in sorted(obj["clusters"], key=int)]
    return ClusterSet(tuple(groups), float(obj["threshold"]))


def adjusted_rand(labels_a: Sequence, labels_b: Sequence) -> float:
    """Adjusted Rand index of two flat labellings of the same items."""
    from scipy.special import comb

    a = np.unique(np.asarray(labels_a), return_inverse=True)[1]
    b = np.unique(np.asarray(labels_b), return_inverse=True)[1]
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    sum_cells = comb(table, 2).sum()
    sum_a = comb(table.sum(axis=1), 2).sum()
    sum_b = comb(table.sum(axis=0), 2).sum()
    total = comb(len(a), 2)
    expected = sum_a * sum_b / total if total else 0.0
    maximum = (sum_a + sum_b) / 2
    if maximum == expected:
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))
