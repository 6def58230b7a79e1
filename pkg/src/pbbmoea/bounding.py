"""Lower bounds for boxes and their improvement by partial lower bounds.

The singleton bound of a box ``B`` with centre ``c`` is, per objective,

    l_i = f_i(c) - 0.5 * min(L_i1 * w_inf, L_iinf * w_1)

with ``L_i1``/``L_iinf`` bounding the l1/l_inf norms of the gradient over
``B``.  An ideal point ``z`` of upper bounds found in ``B`` can replace
each coordinate of ``l`` in turn, giving an m-point bound set, provided no
point of ``B`` maps strictly below ``z`` (checked by a small penalized
differential-evolution search) and ``z`` differs from ``l`` in every
coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dominance import ObjectiveVector, ideal
from .enclosure import lipschitz_constants_batch
from .geometry import Box
from .problems import ProblemDefinition


@dataclass(eq=False)
class LowerBoundSet:
    box_id: int
    points: np.ndarray
    improved: bool = False

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if not self.improved and len(self.points) != 1:
            raise ValueError("an unimproved lower bound set is a single point")

    def to_json(self) -> dict:
        return {"box_id": int(self.box_id), "improved": bool(self.improved), "points": self.points.tolist()}


def lipschitz_lower_bounds(problem: ProblemDefinition, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Singleton lower bounds for a stack of boxes; returns shape (N, m)."""
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    w = hi - lo
    w1 = w.sum(axis=1)
    winf = w.max(axis=1)
    F = problem.evaluate(0.5 * (lo + hi))
    out = np.empty_like(F)
    for i, f in enumerate(problem.objectives):
        l1, linf = lipschitz_constants_batch(f, lo, hi)
        out[:, i] = F[:, i] - 0.5 * np.minimum(l1 * winf, linf * w1)
    return out


def lipschitz_lower_bound(problem: ProblemDefinition, box: Box) -> LowerBoundSet:
    pts = lipschitz_lower_bounds(problem, box.lo[None], box.hi[None])
    return LowerBoundSet(box.id, pts, False)


def ideal_point(upper_bounds) -> np.ndarray:
    """Componentwise minimum of a nonempty set of objective vectors."""
    return ideal(upper_bounds)


@dataclass(frozen=True)
class DEBudget:
    """Settings of the penalized DE search for points below an ideal point."""

    population: int = 15
    generations: int = 30
    F: float = 0.5
    CR: float = 0.9
    penalty: float = 1e3


@dataclass(eq=False)
class Verification:
    """Outcome of checking whether ``z_hat`` is a partial lower bound.

    ``accepted`` is False when a witness ``x`` with ``F(x)`` dominating
    ``z_hat`` was found.
    """

    accepted: bool
    witness: np.ndarray
    witness_image: np.ndarray


def de_minimize_batch(objective, lo: np.ndarray, hi: np.ndarray, rngs, budget: DEBudget) -> np.ndarray:
    """DE/rand/1/bin run independently in each box; returns the best point per box.

    ``objective(X)`` maps (B, P, n) to (B, P).  Each box draws only from
    its own generator, so results do not depend on how boxes are batched.
    """
    B, n = lo.shape
    P = budget.population
    if P < 4:
        raise ValueError("DE needs a population of at least 4")
    span = (hi - lo)[:, None, :]
    U = np.stack([r.random((P, n)) for r in rngs])
    X = lo[:, None, :] + U * span
    fx = objective(X)
    rows = np.arange(B)[:, None]
    self_mask = np.eye(P, dtype=bool)
    for _ in range(budget.generations):
        R = np.stack([r.random((P, P + n + 1)) for r in rngs])
        keys = np.where(self_mask[None], np.inf, R[:, :, :P])
        pick = np.argsort(keys, axis=2)[:, :, :3]
        a = X[rows, pick[:, :, 0]]
        b = X[rows, pick[:, :, 1]]
        c = X[rows, pick[:, :, 2]]
        mutant = np.clip(a + budget.F * (b - c), lo[:, None, :], hi[:, None, :])
        cross = R[:, :, P : P + n] < budget.CR
        jrand = np.minimum((R[:, :, P + n] * n).astype(np.int64), n - 1)
        cross[rows[:, :, None], np.arange(P)[None, :, None], jrand[:, :, None]] = True
        trial = np.where(cross, mutant, X)
        ft = objective(trial)
        better = ft <= fx
        X = np.where(better[:, :, None], trial, X)
        fx = np.where(better, ft, fx)
    best = np.argmin(fx, axis=1)
    return X[np.arange(B), best]


def verify_partial_lower_bounds(
    problem: ProblemDefinition,
    lo: np.ndarray,
    hi: np.ndarray,
    z_hat: np.ndarray,
    rngs,
    budget: DEBudget = DEBudget(),
) -> Verification:
    """Batched check of ``z_hat`` rows against boxes; fields are stacked arrays."""
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    z_hat = np.atleast_2d(z_hat)
    B, n = lo.shape
    m = problem.m

    def objective(X):
        F = problem.evaluate(X.reshape(-1, n)).reshape(X.shape[0], X.shape[1], m)
        excess = np.maximum(F - z_hat[:, None, :], 0.0).sum(axis=-1)
        return F.sum(axis=-1) + budget.penalty * excess

    if B == 0:
        return Verification(np.zeros(0, dtype=bool), np.empty((0, n)), np.empty((0, m)))
    x = de_minimize_batch(objective, lo, hi, rngs, budget)
    Fx = problem.evaluate(x)
    dominated = np.all(Fx <= z_hat, axis=1) & np.any(Fx < z_hat, axis=1)
    return Verification(~dominated, x, Fx)


def verify_partial_lower_bound(
    problem: ProblemDefinition, box: Box, z_hat, rng, budget: DEBudget = DEBudget()
) -> Verification:
    """Solve ``min sum_j f_j(x)`` s.t. ``F(x) dominates z_hat``, ``x`` in box, by penalized DE.

    Rejects ``z_hat`` when the solution found dominates it.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    z = np.asarray(z_hat.values if isinstance(z_hat, ObjectiveVector) else z_hat, dtype=float)
    v = verify_partial_lower_bounds(problem, box.lo[None], box.hi[None], z[None], [rng], budget)
    return Verification(bool(v.accepted[0]), v.witness[0], v.witness_image[0])


def coincident_coordinates(z_hat, l) -> np.ndarray:
    """Indices where ``z_hat`` equals ``l``; improvement needs this to be empty."""
    return np.flatnonzero(np.asarray(z_hat, dtype=float) == np.asarray(l, dtype=float))


def exchange_coordinates(l: np.ndarray, z_hat: np.ndarray) -> np.ndarray:
    """Rows ``i = 1..m``: ``l`` with coordinate ``i`` replaced by ``z_hat[i]``."""
    m = len(l)
    pts = np.repeat(np.asarray(l, dtype=float)[None], m, axis=0)
    pts[np.arange(m), np.arange(m)] = z_hat
    return pts


def improve_lower_bound(l: LowerBoundSet, z_hat, verification) -> LowerBoundSet:
    accepted = verification.accepted if isinstance(verification, Verification) else bool(verification)
    if l.improved or not accepted:
        return l
    z = np.asarray(z_hat.values if isinstance(z_hat, ObjectiveVector) else z_hat, dtype=float)
    point = l.points[0]
    if coincident_coordinates(z, point).size:
        return l
    return LowerBoundSet(l.box_id, exchange_coordinates(point, z), True)
