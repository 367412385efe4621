"""Pearson correlation of matrices and term vectors, with two-sided t-test p-values."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.special import stdtr

from .errors import InputError, NumericalError

FlattenMode = Literal["full", "off-diagonal", "upper-triangle"]
FLATTEN_MODES = ("full", "off-diagonal", "upper-triangle")


def student_t_sf(t: float, df: float) -> float:
    """Two-sided tail P(|T| >= |t|) of Student's t with ``df`` degrees of freedom."""
    if df < 1:
        raise InputError("df must be >= 1")
    if math.isnan(t):
        raise NumericalError("t statistic is NaN")
    return min(1.0, 2.0 * float(stdtr(df, -abs(t))))


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    df: int
    p_value: float
    n: int
    flatten_mode: str

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def flatten(m: np.ndarray, mode: FlattenMode = "full") -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if mode == "full":
        return m.ravel()
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"{mode} flattening needs a square matrix")
    if mode == "off-diagonal":
        return m[~np.eye(m.shape[0], dtype=bool)]
    if mode == "upper-triangle":
        return m[np.triu_indices(m.shape[0], k=1)]
    raise InputError(f"unknown flatten mode {mode!r}; choose from {FLATTEN_MODES}")


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InputError("vectors differ in length")
    if x.size < 2:
        raise NumericalError("need at least two observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise NumericalError("correlation undefined: zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def p_value_for_r(r: float, df: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt(df / (1.0 - r * r))
    return student_t_sf(t, df)


def correlate_matrices(a: np.ndarray, b: np.ndarray, mode: FlattenMode = "full") -> CorrelationResult:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"matrix shapes differ: {a.shape} vs {b.shape}")
    x, y = flatten(a, mode), flatten(b, mode)
    n = x.size
    if n < 3:
        raise NumericalError("need at least three cells to test a correlation")
    r = pearson(x, y)
    df = n - 2
    return CorrelationResult(r, df, p_value_for_r(r, df), n, mode)


def correlate_term_vectors(vectors: Sequence[np.ndarray]) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Pairwise Pearson table of dense weight vectors.

    Returns the table and the list of undefined (i, j) pairs, which hold NaN.
    """
    vs = [np.asarray(v, dtype=np.float64) for v in vectors]
    if len({v.shape for v in vs}) > 1:
        raise InputError("weight vectors must share one dictionary")
    k = len(vs)
    out = np.eye(k)
    undefined = []
    for i in range(k):
        for j in range(i + 1, k):
            try:
                out[i, j] = out[j, i] = pearson(vs[i], vs[j])
            except NumericalError:
                out[i, j] = out[j, i] = np.nan
                undefined.append((i, j))
    return out, undefined
