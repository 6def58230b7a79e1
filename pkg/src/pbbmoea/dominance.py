"""Pareto order, nondominated archives and Hausdorff distances.

All comparisons are exact floating-point comparisons (minimization):

* ``a`` weakly dominates ``b``    iff ``a_i <= b_i`` for all i
* ``a`` dominates ``b``           iff ``a`` weakly dominates ``b`` and ``a != b``
* ``a`` strictly dominates ``b``  iff ``a_i < b_i`` for all i
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_BLOCK = 256


@dataclass(eq=False)
class ObjectiveVector:
    values: np.ndarray
    origin_box: int | None = None
    preimage: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.preimage is not None:
            self.preimage = np.asarray(self.preimage, dtype=float).reshape(-1)


class Relation(enum.Enum):
    EQUAL = "equal"
    STRICTLY_DOMINATES = "strictly_dominates"
    DOMINATES = "dominates"
    DOMINATED_BY = "dominated_by"
    STRICTLY_DOMINATED_BY = "strictly_dominated_by"
    INDIFFERENT = "indifferent"

    @property
    def weakly_dominates(self) -> bool:
        return self in (Relation.EQUAL, Relation.DOMINATES, Relation.STRICTLY_DOMINATES)


def _vals(a) -> np.ndarray:
    if isinstance(a, ObjectiveVector):
        return a.values
    return np.asarray(a, dtype=float)


def weakly_dominates(a, b) -> bool:
    return bool(np.all(_vals(a) <= _vals(b)))


def dominates(a, b) -> bool:
    a, b = _vals(a), _vals(b)
    return bool(np.all(a <= b) and np.any(a < b))


def strictly_dominates(a, b) -> bool:
    return bool(np.all(_vals(a) < _vals(b)))


def compare(a, b) -> Relation:
    a, b = _vals(a), _vals(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if np.array_equal(a, b):
        return Relation.EQUAL
    if np.all(a < b):
        return Relation.STRICTLY_DOMINATES
    if np.all(a <= b):
        return Relation.DOMINATES
    if np.all(b < a):
        return Relation.STRICTLY_DOMINATED_BY
    if np.all(b <= a):
        return Relation.DOMINATED_BY
    return Relation.INDIFFERENT


def nondominated_mask(F: np.ndarray) -> np.ndarray:
    """Mask of rows not dominated by any other row; of equal rows only the first survives.

    Rows are visited in lexicographic order, where a row can only be
    weakly dominated by rows before it, so each block is compared with the
    survivors so far and with its own earlier rows.
    """
    F = np.asarray(F, dtype=float)
    N = len(F)
    keep = np.zeros(N, dtype=bool)
    if N == 0:
        return keep
    if F.ndim != 2:
        raise ValueError("expected a 2-D array of objective vectors")
    order = np.lexsort(F.T[::-1])
    S = F[order]
    if F.shape[1] == 2:
        prev_min = np.concatenate(([np.inf], np.minimum.accumulate(S[:-1, 1])))
        keep[order[S[:, 1] < prev_min]] = True
        return keep
    front = S[:0]
    tri = np.tril(np.ones((_BLOCK, _BLOCK), dtype=bool), k=-1)
    for s in range(0, N, _BLOCK):
        blk = S[s : s + _BLOCK]
        b = len(blk)
        dead = np.zeros(b, dtype=bool)
        if len(front):
            for f0 in range(0, len(front), 4096):
                fr = front[f0 : f0 + 4096]
                dead |= np.all(fr[None, :, :] <= blk[:, None, :], axis=-1).any(axis=1)
        inner = np.all(blk[None, :, :] <= blk[:, None, :], axis=-1) & tri[:b, :b]
        dead |= inner.any(axis=1)
        keep[order[s : s + b][~dead]] = True
        front = np.concatenate([front, blk[~dead]])
    return keep


def dominated_by_any(points: np.ndarray, archive: np.ndarray) -> np.ndarray:
    """For each row of ``points``: is it dominated by some archive row?"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(points), dtype=bool)
    archive = np.asarray(archive, dtype=float)
    if len(archive) == 0 or len(points) == 0:
        return out
    step = max(1, 4_000_000 // (len(archive) * points.shape[1]))
    for s in range(0, len(points), step):
        p = points[s : s + step, None, :]
        le = np.all(archive[None] <= p, axis=-1)
        lt = np.any(archive[None] < p, axis=-1)
        out[s : s + step] = (le & lt).any(axis=1)
    return out


class NondominatedArchive:
    """Pairwise nondominated objective vectors with preimages and origin box ids.

    ``box_ids`` is -1 where an entry has no origin box.
    """

    def __init__(self, m: int, n: int = 0):
        self.m = m
        self.n = n
        self.values = np.empty((0, m))
        self.preimages = np.empty((0, n))
        self.box_ids = np.empty(0, dtype=np.int64)

    def __len__(self):
        return len(self.values)

    def copy(self) -> NondominatedArchive:
        out = NondominatedArchive(self.m, self.n)
        out.values = self.values.copy()
        out.preimages = self.preimages.copy()
        out.box_ids = self.box_ids.copy()
        return out

    def clear(self):
        self.values = self.values[:0]
        self.preimages = self.preimages[:0]
        self.box_ids = self.box_ids[:0]

    def _pre(self, preimage, k):
        if preimage is None:
            return np.full((k, self.n), np.nan)
        return np.asarray(preimage, dtype=float).reshape(k, self.n)

    def insert(self, values, preimage=None, box_id: int | None = None) -> int | None:
        """Insert one vector.

        Returns ``None`` when the vector is rejected (an entry weakly
        dominates it), otherwise the number of entries it displaced.
        """
        if isinstance(values, ObjectiveVector):
            preimage = values.preimage if preimage is None else preimage
            box_id = values.origin_box if box_id is None else box_id
            values = values.values
        u = np.asarray(values, dtype=float).reshape(self.m)
        V = self.values
        if len(V) and np.all(V <= u, axis=1).any():
            return None
        beaten = np.all(u <= V, axis=1) if len(V) else np.zeros(0, dtype=bool)
        removed = int(beaten.sum())
        if removed:
            keep = ~beaten
            self.values = V[keep]
            self.preimages = self.preimages[keep]
            self.box_ids = self.box_ids[keep]
        self.values = np.vstack([self.values, u[None]])
        self.preimages = np.vstack([self.preimages, self._pre(preimage, 1)])
        self.box_ids = np.append(self.box_ids, -1 if box_id is None else int(box_id))
        return removed

    def extend(self, values, preimages=None, box_ids=None):
        """Insert many vectors; equivalent to inserting them one by one in order."""
        values = np.asarray(values, dtype=float).reshape(-1, self.m)
        k = len(values)
        if k == 0:
            return
        pre = self._pre(preimages, k)
        ids = np.full(k, -1, dtype=np.int64) if box_ids is None else np.asarray(box_ids, dtype=np.int64)
        allv = np.concatenate([self.values, values])
        keep = nondominated_mask(allv)
        self.values = allv[keep]
        self.preimages = np.concatenate([self.preimages, pre])[keep]
        self.box_ids = np.concatenate([self.box_ids, ids])[keep]

    def entries(self) -> list[ObjectiveVector]:
        out = []
        for i in range(len(self)):
            pre = self.preimages[i] if self.n and not np.isnan(self.preimages[i]).all() else None
            bid = int(self.box_ids[i])
            out.append(ObjectiveVector(self.values[i].copy(), None if bid < 0 else bid, pre))
        return out

    def to_csv(self) -> str:
        """CSV with columns ``f1..fm, x1..xn, box_id``; empty cells for missing data."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"f{i + 1}" for i in range(self.m)] + [f"x{i + 1}" for i in range(self.n)] + ["box_id"])
        for v, x, b in zip(self.values, self.preimages, self.box_ids):
            xs = ["" if np.isnan(t) else repr(float(t)) for t in x]
            w.writerow([repr(float(t)) for t in v] + xs + ["" if b < 0 else int(b)])
        return buf.getvalue()


def archive_insert(archive: NondominatedArchive, u: ObjectiveVector) -> int | None:
    return archive.insert(u)


def nondominated_filter(points: Iterable) -> list:
    """Maximal nondominated subset, first representative of duplicates, input order kept.

    Accepts :class:`ObjectiveVector` items (returned as-is) or a 2-D array
    (returned as an array).
    """
    if isinstance(points, np.ndarray):
        if points.size == 0:
            return points.reshape(0, points.shape[-1] if points.ndim == 2 else 0)
        return points[nondominated_mask(points)]
    pts = list(points)
    if not pts:
        return []
    mask = nondominated_mask(np.array([_vals(p) for p in pts]))
    return [p for p, k in zip(pts, mask) if k]


def _as_matrix(s) -> np.ndarray:
    if isinstance(s, np.ndarray):
        M = s
    else:
        s = list(s)
        M = np.array([_vals(p) for p in s]) if s else np.empty((0, 0))
    return np.atleast_2d(np.asarray(M, dtype=float))


def directed_hausdorff(a, c) -> float:
    """max over a of the Euclidean distance to the nearest point of c."""
    A = _as_matrix(a)
    C = _as_matrix(c)
    if A.size == 0 or C.size == 0:
        raise ValueError("Hausdorff distance of an empty set")
    best = 0.0
    step = max(1, 2_000_000 // max(1, len(C) * A.shape[1]))
    for s in range(0, len(A), step):
        d = np.sqrt(((A[s : s + step, None, :] - C[None, :, :]) ** 2).sum(axis=-1))
        best = max(best, float(d.min(axis=1).max()))
    return best


def hausdorff(a, c) -> float:
    return max(directed_hausdorff(a, c), directed_hausdorff(c, a))


def ideal(values: Sequence) -> np.ndarray:
    M = _as_matrix(values)
    if M.size == 0:
        raise ValueError("ideal point of an empty set")
    return M.min(axis=0)
