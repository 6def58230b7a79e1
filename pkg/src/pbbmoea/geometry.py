"""Boxes (subregions of the variable domain) and their bisection."""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np


class DegenerateBoxError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box ``[lo, hi]`` with a run-unique id and an elite flag."""

    id: int
    lo: np.ndarray
    hi: np.ndarray
    flag: bool = False

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same length")
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return (
            self.id == other.id
            and self.flag == other.flag
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return self.lo.size

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, x, tol: float = 0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def volume(self) -> float:
        return float(np.prod(self.width))

    def to_json(self) -> dict:
        return {"id": int(self.id), "lo": self.lo.tolist(), "hi": self.hi.tolist(), "flag": bool(self.flag)}

    @classmethod
    def from_json(cls, d: dict) -> Box:
        return cls(int(d["id"]), d["lo"], d["hi"], bool(d["flag"]))


class WidthSummary(NamedTuple):
    w1: float
    winf: float
    w2: float


def midpoint(box: Box) -> np.ndarray:
    return 0.5 * (box.lo + box.hi)


def widths(box: Box) -> WidthSummary:
    w = box.width
    return WidthSummary(float(w.sum()), float(w.max(initial=0.0)), float(np.linalg.norm(w)))


def split_coordinate(w: np.ndarray) -> int:
    """Lowest index among the widest coordinates."""
    return int(np.argmax(w))


class IdCounter:
    """Monotone, thread-safe source of fresh box ids."""

    def __init__(self, start: int = 0):
        self._it = itertools.count(start)
        self._lock = threading.Lock()

    def __call__(self) -> int:
        with self._lock:
            return next(self._it)

    def take(self, k: int) -> np.ndarray:
        with self._lock:
            return np.fromiter(itertools.islice(self._it, k), dtype=np.int64, count=k)


def bisect(box: Box, next_id) -> tuple[Box, Box]:
    """Split ``box`` at the midpoint of its widest coordinate.

    Both children inherit ``box.flag`` and receive fresh ids from
    ``next_id()``.
    """
    w = box.width
    if w.size == 0 or w.max() <= 0.0:
        raise DegenerateBoxError("degenerate box")
    j = split_coordinate(w)
    mid = 0.5 * (box.lo[j] + box.hi[j])
    hi1 = box.hi.copy()
    hi1[j] = mid
    lo2 = box.lo.copy()
    lo2[j] = mid
    return (
        Box(next_id(), box.lo.copy(), hi1, box.flag),
        Box(next_id(), lo2, box.hi.copy(), box.flag),
    )


@dataclass
class BoxArray:
    """A collection of boxes stored column-wise for batched bounding.

    ``nominal`` is the common width vector of all boxes, tracked exactly
    by halving rather than recomputed from the (rounded) corners.
    """

    ids: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    flags: np.ndarray
    nominal: np.ndarray = field(default=None)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        self.lo = np.atleast_2d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_2d(np.asarray(self.hi, dtype=float))
        self.flags = np.asarray(self.flags, dtype=bool).reshape(-1)
        if self.nominal is None:
            self.nominal = (self.hi - self.lo)[0].copy() if len(self.ids) else None

    @classmethod
    def from_boxes(cls, boxes) -> BoxArray:
        boxes = list(boxes)
        return cls(
            [b.id for b in boxes],
            np.array([b.lo for b in boxes]),
            np.array([b.hi for b in boxes]),
            [b.flag for b in boxes],
        )

    def __len__(self):
        return self.ids.size

    def __getitem__(self, i) -> Box:
        return Box(int(self.ids[i]), self.lo[i].copy(), self.hi[i].copy(), bool(self.flags[i]))

    def boxes(self) -> list[Box]:
        return [self[i] for i in range(len(self))]

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def subset(self, mask) -> BoxArray:
        return replace(
            self, ids=self.ids[mask], lo=self.lo[mask], hi=self.hi[mask], flags=self.flags[mask],
            nominal=self.nominal,
        )

    def widths_consistent(self, rtol: float = 1e-9) -> bool:
        if len(self) == 0:
            return True
        w = self.hi - self.lo
        scale = np.maximum(np.abs(self.nominal), 1e-300)
        return bool(np.all(np.abs(w - self.nominal) <= rtol * scale + 1e-300))

    def bisect_all(self, ids: IdCounter) -> BoxArray:
        """Bisect every box along the same coordinate.

        Children appear pairwise in parent order: ``(left_0, right_0,
        left_1, right_1, ...)``.
        """
        if self.nominal is None or self.nominal.max() <= 0.0:
            raise DegenerateBoxError("degenerate box")
        j = split_coordinate(self.nominal)
        k = len(self)
        mid = 0.5 * (self.lo[:, j] + self.hi[:, j])
        lo = np.repeat(self.lo, 2, axis=0)
        hi = np.repeat(self.hi, 2, axis=0)
        hi[0::2, j] = mid
        lo[1::2, j] = mid
        nominal = self.nominal.copy()
        nominal[j] *= 0.5
        return BoxArray(ids.take(2 * k), lo, hi, np.repeat(self.flags, 2), nominal)

    def locate(self, X: np.ndarray) -> np.ndarray:
        """Index of the first box containing each row of ``X`` (-1 if none)."""
        X = np.atleast_2d(X)
        out = np.full(len(X), -1, dtype=np.int64)
        if len(self) == 0 or len(X) == 0:
            return out
        chunk = max(1, 2_000_000 // max(1, len(self) * X.shape[1]))
        for s in range(0, len(X), chunk):
            x = X[s : s + chunk, None, :]
            inside = np.all((x >= self.lo[None]) & (x <= self.hi[None]), axis=-1)
            hit = inside.any(axis=1)
            out[s : s + chunk] = np.where(hit, inside.argmax(axis=1), -1)
        return out
