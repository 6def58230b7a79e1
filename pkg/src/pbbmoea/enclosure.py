"""Lipschitz constants from gradient enclosures, and the interval feasibility test."""

from __future__ import annotations

import enum
from typing import NamedTuple, Sequence

import numpy as np

from .expr import Expr, eval_interval, grad
from .intervals import IntervalVector


class LipschitzPair(NamedTuple):
    l1: float
    linf: float


def gradient_enclosure(e: Expr, lo, hi=None, n: int | None = None) -> IntervalVector:
    if hi is None:
        lo, hi = lo.lo, lo.hi
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[-1] if n is None else n
    return IntervalVector(eval_interval(g, lo, hi) for g in grad(e, n))


def lipschitz_constants(e: Expr, lo, hi=None) -> LipschitzPair:
    """Upper bounds on sup ||grad e||_1 and sup ||grad e||_inf over a box."""
    m = gradient_enclosure(e, lo, hi).mags()
    return LipschitzPair(float(m.sum()), float(m.max(initial=0.0)))


def lipschitz_constants_batch(e: Expr, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ``(l1, linf)`` for a stack of boxes ``lo``/``hi`` of shape (N, n)."""
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    m = gradient_enclosure(e, lo, hi).mags()
    return m.sum(axis=-1), m.max(axis=-1, initial=0.0)


class Feasibility(enum.IntEnum):
    INFEASIBLE = 0
    FEASIBLE = 1
    UNDETERMINED = 2


def feasibility_codes(constraints: Sequence[Expr], lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Vectorized :func:`feasibility_test` over rows of ``lo``/``hi``."""
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    infeasible = np.zeros(len(lo), dtype=bool)
    feasible = np.ones(len(lo), dtype=bool)
    for g in constraints:
        r = eval_interval(g, lo, hi)
        infeasible |= r.hi < 0.0
        feasible &= r.lo >= 0.0
    out = np.full(len(lo), int(Feasibility.UNDETERMINED), dtype=np.int8)
    out[feasible] = Feasibility.FEASIBLE
    out[infeasible] = Feasibility.INFEASIBLE
    return out


def feasibility_test(constraints: Sequence[Expr], box) -> Feasibility:
    """Classify a box against constraints ``g_j(x) >= 0``."""
    code = feasibility_codes(constraints, box.lo[None, :], box.hi[None, :])[0]
    return Feasibility(int(code))
