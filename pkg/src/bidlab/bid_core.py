"""Bid matrices, the expertise-category transform, filtering and wildcard Hamming similarity.

Raw bid codes:

    0  no bid                      -> 0 (wildcard)
    1  expert, wants to review     -> 1 (expert)
    2  expert                      -> 1 (expert)
    3  not an expert               -> 2 (not expert)
    4  conflict of interest        -> 0 (wildcard)
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyMatrixError, InputError, InvalidCodeError, LengthMismatchError

log = logging.getLogger(__name__)

WILDCARD = 0
EXPERT = 1
NOT_EXPERT = 2

# index = raw code, value = transformed code
_TRANSFORM = np.array([WILDCARD, EXPERT, EXPERT, NOT_EXPERT, WILDCARD], dtype=np.int8)


def _frozen(a: np.ndarray, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _check_labels(labels: Sequence[str], what: str) -> tuple[str, ...]:
    labels = tuple(str(x) for x in labels)
    if len(set(labels)) != len(labels):
        seen = set()
        dupes = sorted({x for x in labels if x in seen or seen.add(x)})
        raise InputError(f"duplicate {what} ids: {dupes}")
    return labels


@dataclass(frozen=True)
class _LabeledCodes:
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    cells: np.ndarray

    _codes = range(0)

    def __post_init__(self):
        object.__setattr__(self, "rows", _check_labels(self.rows, "row"))
        object.__setattr__(self, "cols", _check_labels(self.cols, "column"))
        cells = np.asarray(self.cells)
        if cells.ndim != 2 or cells.shape != (len(self.rows), len(self.cols)):
            raise InputError(
                f"cells shape {cells.shape} does not match {len(self.rows)} rows x {len(self.cols)} cols"
            )
        if cells.size and not np.issubdtype(cells.dtype, np.integer):
            if not np.all(np.equal(np.mod(cells, 1), 0)):
                raise InvalidCodeError("bid codes must be integers")
        bad = ~np.isin(cells, list(self._codes))
        if bad.any():
            i, j = map(int, np.argwhere(bad)[0])
            raise InvalidCodeError(
                f"invalid bid code {cells[i, j]!r} at row {self.rows[i]!r}, col {self.cols[j]!r}; "
                f"allowed codes are {list(self._codes)}"
            )
        object.__setattr__(self, "cells", _frozen(cells, np.int8))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.rows == other.rows
            and self.cols == other.cols
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None


class RawBidMatrix(_LabeledCodes):
    """Submission x referee table of raw bid codes 0..4."""

    _codes = range(5)


class BidMatrix(_LabeledCodes):
    """Submission x referee table of transformed codes: 0 wildcard, 1 expert, 2 not expert."""

    _codes = range(3)

    def transpose(self) -> "BidMatrix":
        return BidMatrix(self.cols, self.rows, self.cells.T)

    def drop_cols(self, cols: Iterable[str]) -> "BidMatrix":
        drop = set(cols)
        keep = [j for j, c in enumerate(self.cols) if c not in drop]
        return BidMatrix(self.rows, [self.cols[j] for j in keep], self.cells[:, keep])


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Symmetric labelled matrix with unit diagonal and entries in [0, 1].

    ``undefined_pairs`` counts off-diagonal cells that had no comparable
    positions and were replaced by 0.0.
    """

    labels: tuple[str, ...]
    values: np.ndarray
    undefined_pairs: int = 0

    def __post_init__(self):
        labels = _check_labels(self.labels, "label")
        values = np.asarray(self.values, dtype=np.float64)
        n = len(labels)
        if values.shape != (n, n):
            raise InputError(f"similarity values shape {values.shape} != ({n}, {n})")
        if not np.array_equal(values, values.T):
            raise InputError("similarity matrix is not symmetric")
        if n and not np.all(np.diag(values) == 1.0):
            raise InputError("similarity matrix diagonal must be 1.0")
        if np.any(values < 0.0) or np.any(values > 1.0) or np.isnan(values).any():
            raise InputError("similarity entries must lie in [0, 1]")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", _frozen(values, np.float64))

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, labels: Sequence[str]) -> "SimilarityMatrix":
        index = {x: i for i, x in enumerate(self.labels)}
        missing = [x for x in labels if x not in index]
        if missing:
            raise InputError(f"unknown labels: {missing}")
        idx = [index[x] for x in labels]
        return SimilarityMatrix(tuple(labels), self.values[np.ix_(idx, idx)])


@dataclass(frozen=True)
class FilterReport:
    """How many rows/columns each filtering rule removed."""

    rows_all_zero: list[str] = field(default_factory=list)
    cols_all_zero: list[str] = field(default_factory=list)
    cols_excluded: list[str] = field(default_factory=list)
    rows_emptied: list[str] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        return {
            "rows_all_zero": len(self.rows_all_zero),
            "cols_all_zero": len(self.cols_all_zero),
            "cols_excluded": len(self.cols_excluded),
            "rows_emptied": len(self.rows_emptied),
        }


def transform_bids(raw: RawBidMatrix) -> BidMatrix:
    """Collapse the raw codes into wildcard / expert / not-expert."""
    return BidMatrix(raw.rows, raw.cols, _TRANSFORM[raw.cells])


def filter_bids(
    b: BidMatrix, excluded_referees: Iterable[str] = ()
) -> tuple[BidMatrix, FilterReport]:
    """Drop rows and columns that carry no usable bids.

    Order: all-zero rows, all-zero columns, excluded columns, then rows left
    all-zero by the column removals.
    """
    rows, cols, cells = list(b.rows), list(b.cols), b.cells

    keep_r = cells.any(axis=1)
    dropped_rows = [r for r, k in zip(rows, keep_r) if not k]
    rows, cells = [r for r, k in zip(rows, keep_r) if k], cells[keep_r]

    keep_c = cells.any(axis=0)
    dropped_cols = [c for c, k in zip(cols, keep_c) if not k]
    cols, cells = [c for c, k in zip(cols, keep_c) if k], cells[:, keep_c]

    excluded = set(excluded_referees)
    keep_c = np.array([c not in excluded for c in cols], dtype=bool)
    excluded_cols = [c for c, k in zip(cols, keep_c) if not k]
    cols, cells = [c for c, k in zip(cols, keep_c) if k], cells[:, keep_c]

    keep_r = cells.any(axis=1) if cells.shape[1] else np.zeros(len(rows), dtype=bool)
    emptied = [r for r, k in zip(rows, keep_r) if not k]
    rows, cells = [r for r, k in zip(rows, keep_r) if k], cells[keep_r]

    report = FilterReport(dropped_rows, dropped_cols, excluded_cols, emptied)
    if not rows or not cols:
        raise EmptyMatrixError(f"no bids left after filtering ({report.counts()})")
    return BidMatrix(rows, cols, cells), report


def hamming_similarity(u: Sequence[int], v: Sequence[int]) -> float | None:
    """1 - h/l over positions where neither vector holds a wildcard (0).

    Returns None when every position is masked.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 1:
        raise LengthMismatchError(f"bid vectors differ in shape: {u.shape} vs {v.shape}")
    if u.size == 0:
        raise LengthMismatchError("bid vectors must have at least one position")
    mask = (u != WILDCARD) & (v != WILDCARD)
    l = int(mask.sum())
    if l == 0:
        return None
    h = int((u[mask] != v[mask]).sum())
    return 1.0 - h / l


def _pairwise(cells: np.ndarray) -> tuple[np.ndarray, int]:
    """Similarity of every pair of rows. Returns (matrix, number of undefined pairs)."""
    e = (cells == EXPERT).astype(np.int64)
    ne = (cells == NOT_EXPERT).astype(np.int64)
    m = e + ne
    agree = e @ e.T + ne @ ne.T
    length = m @ m.T
    n = cells.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    iu = np.triu_indices(n, k=1)
    l_up = length[iu]
    defined = l_up > 0
    upper = np.zeros(l_up.shape, dtype=np.float64)
    # 1 - h/l with h = l - agree
    upper[defined] = 1.0 - (l_up[defined] - agree[iu][defined]) / l_up[defined]
    out[iu] = upper
    out.T[iu] = upper
    np.fill_diagonal(out, 1.0)
    return out, int((~defined).sum())


def _similarity(labels: Sequence[str], cells: np.ndarray, what: str) -> SimilarityMatrix:
    values, undefined = _pairwise(cells)
    if undefined:
        log.warning("%d %s pair(s) share no non-wildcard position; similarity set to 0.0", undefined, what)
    return SimilarityMatrix(tuple(labels), values, undefined)


def submission_similarity(b: BidMatrix) -> SimilarityMatrix:
    return _similarity(b.rows, b.cells, "submission")


def referee_similarity(b: BidMatrix) -> SimilarityMatrix:
    """Same measure over referee columns, i.e. on the transposed bid matrix."""
    return _similarity(b.cols, b.cells.T, "referee")


def fatigue_referees(b: BidMatrix) -> list[str]:
    """Referees whose every non-wildcard bid is 'expert'."""
    cells = b.cells
    flat = ((cells == EXPERT) | (cells == WILDCARD)).all(axis=0) & (cells == EXPERT).any(axis=0)
    return [c for c, f in zip(b.cols, flat) if f]


# -- I/O ---------------------------------------------------------------------


def read_bid_csv(path: str | Path) -> RawBidMatrix:
    """Read a bid table: header row of referee ids, first column submission ids."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise InputError(f"{path}: empty bid file")
    cols = [c.strip() for c in rows[0][1:]]
    subs, cells = [], []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(cols) + 1:
            raise InputError(f"{path}:{lineno}: expected {len(cols) + 1} fields, got {len(r)}")
        subs.append(r[0].strip())
        try:
            cells.append([int(x) for x in r[1:]])
        except ValueError as exc:
            raise InvalidCodeError(f"{path}:{lineno}: {exc}") from None
    arr = np.array(cells, dtype=np.int64).reshape(len(subs), len(cols))
    return RawBidMatrix(subs, cols, arr)


def write_bid_csv(b: _LabeledCodes, path: str | Path, corner: str = "sub/ref") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([corner, *b.cols])
        for r, row in zip(b.rows, b.cells):
            w.writerow([r, *(int(x) for x in row)])


def format_float(x: float) -> str:
    return repr(float(x))


def write_matrix_csv(labels: Sequence[str], values: np.ndarray, path: str | Path, corner: str = "id") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([corner, *labels])
        for lab, row in zip(labels, values):
            w.writerow([lab, *(format_float(x) for x in row)])


def read_matrix_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise InputError(f"{path}: empty matrix file")
    cols = rows[0][1:]
    labels = [r[0] for r in rows[1:]]
    if labels != cols:
        raise InputError(f"{path}: row labels do not match column labels")
    try:
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    return labels, values.reshape(len(labels), len(cols))


def read_similarity_csv(path: str | Path) -> SimilarityMatrix:
    labels, values = read_matrix_csv(path)
    return SimilarityMatrix(tuple(labels), values)


def similarity_to_json(s: SimilarityMatrix) -> str:
    return json.dumps(
        {"labels": list(s.labels), "values": s.values.tolist(), "undefined_pairs": s.undefined_pairs}
    )
