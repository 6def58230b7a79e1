"""Variation and ranking operators, vectorized over a leading batch axis.

Arrays are shaped ``(B, ..., n)`` where ``B`` indexes independent runs
(one per box).  Random inputs are passed in as uniforms so each run can
draw them from its own generator.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def simplex_lattice(m: int, count: int) -> np.ndarray:
    """``count`` weight vectors on the unit simplex from a uniform lattice.

    The smallest lattice with at least ``count`` points is built and, if
    larger, thinned to ``count`` evenly spaced members (extremes kept).
    """
    if count < 1:
        raise ValueError("count must be positive")
    if m == 1:
        return np.ones((count, 1))
    H = 1
    while math.comb(H + m - 1, m - 1) < count:
        H += 1
    pts = []
    for c in itertools.combinations(range(H + m - 1), m - 1):
        parts = np.diff((-1,) + c + (H + m - 1,)) - 1
        pts.append(parts / H)
    W = np.array(pts, dtype=float)[::-1]
    if len(W) > count:
        W = W[np.unique(np.round(np.linspace(0, len(W) - 1, count)).astype(int))]
    return W


def polynomial_mutation(y, lo, hi, u_do, u, p, eta):
    """Bounded polynomial mutation; ``lo``/``hi`` broadcast against ``y``."""
    span = hi - lo
    ok = (u_do < p) & (span > 0)
    safe = np.where(span > 0, span, 1.0)
    d1 = (y - lo) / safe
    d2 = (hi - y) / safe
    mp = 1.0 / (eta + 1.0)
    with np.errstate(invalid="ignore", over="ignore"):
        low = u < 0.5
        xy = np.where(low, 1.0 - d1, 1.0 - d2)
        val = np.where(low, 2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0),
                       2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0))
        dq = np.where(low, val**mp - 1.0, 1.0 - val**mp)
    out = np.where(ok, y + dq * span, y)
    return np.clip(out, lo, hi)


def sbx(p1, p2, lo, hi, u_var, u_beta, u_swap, eta):
    """Bounded simulated binary crossover applied to every variable pair.

    Callers decide per pair whether crossover happens at all.
    """
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        y1 = np.minimum(p1, p2)
        y2 = np.maximum(p1, p2)
        diff = y2 - y1
        act = (u_var <= 0.5) & (np.abs(p1 - p2) > 1e-14)
        safe = np.where(diff > 0, diff, 1.0)
        e1 = eta + 1.0

        def betaq(beta):
            alpha = 2.0 - beta ** (-e1)
            return np.where(
                u_beta <= 1.0 / alpha,
                (u_beta * alpha) ** (1.0 / e1),
                (1.0 / (2.0 - u_beta * alpha)) ** (1.0 / e1),
            )

        c1 = 0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * (y1 - lo) / safe) * diff)
        c2 = 0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (hi - y2) / safe) * diff)
    c1 = np.clip(np.where(np.isfinite(c1), c1, y1), lo, hi)
    c2 = np.clip(np.where(np.isfinite(c2), c2, y2), lo, hi)
    swap = u_swap <= 0.5
    o1 = np.where(act, np.where(swap, c2, c1), p1)
    o2 = np.where(act, np.where(swap, c1, c2), p2)
    return o1, o2


def pareto_ranks(F: np.ndarray) -> np.ndarray:
    """Nondominated-sorting ranks (0 = first front) for F of shape (B, N, m)."""
    le = np.all(F[:, :, None, :] <= F[:, None, :, :], axis=-1)
    lt = np.any(F[:, :, None, :] < F[:, None, :, :], axis=-1)
    dom = le & lt  # dom[b, i, j]: i dominates j
    B, N = F.shape[:2]
    rank = np.full((B, N), -1, dtype=np.int64)
    remaining = np.ones((B, N), dtype=bool)
    r = 0
    while remaining.any():
        beaten = (dom & remaining[:, :, None]).any(axis=1)
        front = remaining & ~beaten
        rank[front] = r
        remaining &= ~front
        r += 1
    return rank


def crowding_distances(F: np.ndarray, rank: np.ndarray) -> np.ndarray:
    """Crowding distance of every member within its own front."""
    B, N, m = F.shape
    crowd = np.zeros((B, N))
    pos = np.arange(N)[None, :]
    rows = np.arange(B)[:, None]
    for r in range(int(rank.max()) + 1):
        M = rank == r
        cnt = M.sum(axis=1)[:, None]
        if not cnt.any():
            continue
        acc = np.zeros((B, N))
        for k in range(m):
            v = np.where(M, F[:, :, k], np.inf)
            idx = np.argsort(v, axis=1, kind="stable")
            sv = np.take_along_axis(v, idx, axis=1)
            last = np.take_along_axis(sv, np.maximum(cnt - 1, 0), axis=1)
            gap = np.zeros((B, N))
            # boxes with no member at this rank give inf - inf; masked below
            with np.errstate(invalid="ignore"):
                span = last - sv[:, :1]
                gap[:, 1:-1] = sv[:, 2:] - sv[:, :-2]
                contrib = np.where(span > 0, gap / np.where(span > 0, span, 1.0), 0.0)
            interior = (pos >= 1) & (pos <= cnt - 2)
            boundary = ((pos == 0) | (pos == cnt - 1)) & (pos < cnt)
            contrib = np.where(interior, contrib, 0.0)
            contrib = np.where(boundary, np.inf, contrib)
            back = np.zeros((B, N))
            back[rows, idx] = contrib
            acc += back
        crowd = np.where(M, acc, crowd)
    return crowd
