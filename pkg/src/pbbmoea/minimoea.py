"""Budgeted evolutionary upper bounding confined to boxes.

Two variants run on many boxes at once: MOEA/D-DE (Tchebycheff
decomposition with an l1 exact penalty) and NSGA-II (penalized
objectives).  Every box owns its random generator and the batch is only a
vectorization device, so a box's result never depends on which other
boxes share its batch.

Upper bounds are harvested from every evaluated point, then infeasible
points are filtered out and the rest reduced to their nondominated set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .dominance import ObjectiveVector, nondominated_mask
from .geometry import Box
from .operators import crowding_distances, pareto_ranks, polynomial_mutation, sbx, simplex_lattice
from .problems import ProblemDefinition

VARIANTS = ("moead", "nsga2")


@dataclass
class MiniMoeaConfig:
    variant: str = "moead"
    population: int = 10
    generations: int = 20
    rho: float = 1.0
    # NSGA-II
    eta_c: float = 20.0
    p_c: float = 0.9
    # both; p_m=None means 1/n
    eta_m: float = 20.0
    p_m: float | None = None
    # MOEA/D-DE
    F: float = 0.5
    CR: float = 1.0
    neighborhood: int = 5
    delta: float = 0.9
    nr: int = 2
    weights: np.ndarray | None = field(default=None, repr=False)
    # "all": upper bounds from every evaluated point; "final": last population only
    harvest: str = "all"

    def __post_init__(self):
        aliases = {"nsga-ii": "nsga2", "nsgaii": "nsga2", "moead-de": "moead", "moea/d": "moead"}
        self.variant = aliases.get(str(self.variant).lower(), str(self.variant).lower())
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown mini MOEA variant {self.variant!r}; expected one of {VARIANTS}")
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.generations < 1:
            raise ValueError("generations must be positive")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.variant == "moead" and self.population < 3:
            raise ValueError("MOEA/D-DE needs a population of at least 3")
        if self.harvest not in ("final", "all"):
            raise ValueError("harvest must be 'final' or 'all'")
        if self.weights is not None:
            W = np.asarray(self.weights, dtype=float)
            if len(W) != self.population:
                raise ValueError("weight count must equal the population")
            if np.any(W < 0) or not np.allclose(W.sum(axis=1), 1.0):
                raise ValueError("weights must lie on the unit simplex")
            self.weights = W

    def weight_vectors(self, m: int) -> np.ndarray:
        if self.weights is not None:
            return self.weights
        return simplex_lattice(m, self.population)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "weights"}
        return d


@dataclass(eq=False)
class MiniMoeaResult:
    box_id: int
    values: np.ndarray
    preimages: np.ndarray
    evaluations_used: int

    @property
    def ideal(self) -> np.ndarray | None:
        if len(self.values) == 0:
            return None
        return self.values.min(axis=0)

    @property
    def no_feasible(self) -> bool:
        return len(self.values) == 0

    @property
    def upper_bounds(self) -> list[ObjectiveVector]:
        return [ObjectiveVector(v, self.box_id, x) for v, x in zip(self.values, self.preimages)]


def fitness_penalized(x, lam, z_star, problem: ProblemDefinition, rho: float = 1.0) -> float:
    """Tchebycheff value ``max_i lam_i |f_i(x) - z_i|`` plus ``rho * sum_j |min(g_j(x), 0)|``."""
    x = np.asarray(x, dtype=float)
    f = problem.evaluate(x)
    cv = float(problem.violation(x)) if problem.constrained else 0.0
    return float(np.max(np.asarray(lam) * np.abs(f - np.asarray(z_star)))) + rho * cv


def filter_infeasible(points: Sequence[ObjectiveVector], problem: ProblemDefinition, tol: float = 0.0):
    """Keep the points whose preimages satisfy every ``g_j >= -tol``."""
    points = list(points)
    if not problem.constrained:
        return points
    if any(p.preimage is None for p in points):
        raise ValueError("filtering needs preimages")
    if not points:
        return points
    ok = problem.feasible(np.array([p.preimage for p in points]), tol)
    return [p for p, k in zip(points, ok) if k]


def _evaluate(problem: ProblemDefinition, X: np.ndarray):
    shape = X.shape[:-1]
    flat = X.reshape(-1, X.shape[-1])
    F = problem.evaluate(flat).reshape(shape + (problem.m,))
    if problem.constrained:
        CV = problem.violation(flat).reshape(shape)
    else:
        CV = np.zeros(shape)
    return F, CV


def _tcheby(F, CV, W, z, rho):
    return np.max(W * np.abs(F - z), axis=-1) + rho * CV


def _moead(problem, lo, hi, rngs, cfg: MiniMoeaConfig):
    B, n = lo.shape
    P = cfg.population
    W = cfg.weight_vectors(problem.m)
    T = min(P, cfg.neighborhood)
    nbr = np.argsort(cdist(W, W), axis=1, kind="stable")[:, :T]
    in_nbr = np.zeros((P, P), dtype=bool)
    in_nbr[np.arange(P)[:, None], nbr] = True
    p_m = cfg.p_m if cfg.p_m is not None else 1.0 / n
    L = lo[:, None, :]
    H = hi[:, None, :]
    X = L + np.stack([r.random((P, n)) for r in rngs]) * (H - L)
    F, CV = _evaluate(problem, X)
    z = F.min(axis=1)
    hist_x, hist_f, hist_cv = [X.copy()], [F.copy()], [CV.copy()]
    rows = np.arange(B)
    lo1, hi1 = lo, hi
    # delta | parent keys (P) | CR (n) | jrand | mutation (2n) | replacement keys (P)
    width = 2 * P + 3 * n + 2
    for _ in range(cfg.generations):
        R = np.stack([r.random((P, width)) for r in rngs])
        gx, gf, gcv = [], [], []
        for i in range(P):
            u = R[:, i]
            pool = np.where((u[:, 0] < cfg.delta)[:, None], in_nbr[i][None, :], True)
            pick = np.argsort(np.where(pool, u[:, 1 : 1 + P], np.inf), axis=1)
            r2, r3 = pick[:, 0], pick[:, 1]
            diff = X[rows, r2] - X[rows, r3]
            y = X[:, i] + cfg.F * diff
            cross = u[:, 1 + P : 1 + P + n] < cfg.CR
            jr = np.minimum((u[:, 1 + P + n] * n).astype(np.int64), n - 1)
            cross[rows, jr] = True
            y = np.where(cross, y, X[:, i])
            y = np.clip(y, lo1, hi1)
            o = 2 + P + n
            y = polynomial_mutation(y, lo1, hi1, u[:, o : o + n], u[:, o + n : o + 2 * n], p_m, cfg.eta_m)
            fy, cvy = _evaluate(problem, y)
            z = np.minimum(z, fy)
            order = np.argsort(np.where(pool, u[:, o + 2 * n : o + 2 * n + P], np.inf), axis=1)
            valid = np.take_along_axis(pool, order, axis=1)
            g_new = _tcheby(fy[:, None, :], cvy[:, None], W[order], z[:, None, :], cfg.rho)
            g_old = _tcheby(F[rows[:, None], order], CV[rows[:, None], order], W[order], z[:, None, :], cfg.rho)
            cand = valid & (g_new <= g_old)
            rep = cand & (np.cumsum(cand, axis=1) <= cfg.nr)
            rb, rj = np.nonzero(rep)
            jj = order[rb, rj]
            X[rb, jj] = y[rb]
            F[rb, jj] = fy[rb]
            CV[rb, jj] = cvy[rb]
            gx.append(y)
            gf.append(fy)
            gcv.append(cvy)
        hist_x.append(np.stack(gx, axis=1))
        hist_f.append(np.stack(gf, axis=1))
        hist_cv.append(np.stack(gcv, axis=1))
    history = np.concatenate(hist_x, axis=1), np.concatenate(hist_f, axis=1), np.concatenate(hist_cv, axis=1)
    return history, (X, F, CV)


def _nsga2(problem, lo, hi, rngs, cfg: MiniMoeaConfig):
    B, n = lo.shape
    P = cfg.population
    p_m = cfg.p_m if cfg.p_m is not None else 1.0 / n
    L = lo[:, None, :]
    H = hi[:, None, :]
    X = L + np.stack([r.random((P, n)) for r in rngs]) * (H - L)
    F, CV = _evaluate(problem, X)
    hist_x, hist_f, hist_cv = [X.copy()], [F.copy()], [CV.copy()]
    rank = pareto_ranks(F + cfg.rho * CV[..., None])
    crowd = crowding_distances(F + cfg.rho * CV[..., None], rank)
    pairs = (P + 1) // 2
    rows = np.arange(B)[:, None]
    width = 2 * P + pairs * (1 + 3 * n) + 2 * pairs * 2 * n
    for _ in range(cfg.generations):
        R = np.stack([r.random(width) for r in rngs])
        t = np.minimum((R[:, : 2 * P] * P).astype(np.int64), P - 1).reshape(B, P, 2)
        a, b = t[:, :, 0], t[:, :, 1]
        ra, rb_ = rank[rows, a], rank[rows, b]
        ca, cb = crowd[rows, a], crowd[rows, b]
        a_wins = (ra < rb_) | ((ra == rb_) & (ca >= cb))
        parents = np.where(a_wins, a, b)
        if P % 2:
            parents = np.concatenate([parents, parents[:, :1]], axis=1)
        o = 2 * P
        Rx = R[:, o : o + pairs * (1 + 3 * n)].reshape(B, pairs, 1 + 3 * n)
        o += pairs * (1 + 3 * n)
        Rm = R[:, o:].reshape(B, 2 * pairs, 2 * n)
        p1 = X[rows, parents[:, 0::2]]
        p2 = X[rows, parents[:, 1::2]]
        do = (Rx[:, :, 0] < cfg.p_c)[:, :, None]
        c1, c2 = sbx(p1, p2, L, H, Rx[:, :, 1 : 1 + n], Rx[:, :, 1 + n : 1 + 2 * n], Rx[:, :, 1 + 2 * n :], cfg.eta_c)
        c1 = np.where(do, c1, p1)
        c2 = np.where(do, c2, p2)
        kids = np.empty((B, 2 * pairs, n))
        kids[:, 0::2] = c1
        kids[:, 1::2] = c2
        kids = polynomial_mutation(kids, L, H, Rm[:, :, :n], Rm[:, :, n:], p_m, cfg.eta_m)[:, :P]
        fk, cvk = _evaluate(problem, kids)
        hist_x.append(kids)
        hist_f.append(fk)
        hist_cv.append(cvk)
        AX = np.concatenate([X, kids], axis=1)
        AF = np.concatenate([F, fk], axis=1)
        ACV = np.concatenate([CV, cvk], axis=1)
        pen = AF + cfg.rho * ACV[..., None]
        arank = pareto_ranks(pen)
        acrowd = crowding_distances(pen, arank)
        sel = np.lexsort((-acrowd, arank), axis=-1)[:, :P]
        X = AX[rows, sel]
        F = AF[rows, sel]
        CV = ACV[rows, sel]
        rank = arank[rows, sel]
        crowd = acrowd[rows, sel]
    history = np.concatenate(hist_x, axis=1), np.concatenate(hist_f, axis=1), np.concatenate(hist_cv, axis=1)
    return history, (X, F, CV)


def run_mini_moea_batch(
    problem: ProblemDefinition,
    lo: np.ndarray,
    hi: np.ndarray,
    box_ids: Sequence[int],
    config: MiniMoeaConfig,
    rngs: Sequence[np.random.Generator],
    tol: float = 0.0,
) -> list[MiniMoeaResult]:
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    if len(lo) == 0:
        return []
    run = _moead if config.variant == "moead" else _nsga2
    history, final = run(problem, lo, hi, rngs, config)
    X, F, _ = final if config.harvest == "final" else history
    evals = history[0].shape[1]
    out = []
    for b, bid in enumerate(box_ids):
        xb, fb = X[b], F[b]
        if problem.constrained:
            ok = problem.feasible(xb, tol)
            xb, fb = xb[ok], fb[ok]
        keep = nondominated_mask(fb)
        out.append(MiniMoeaResult(int(bid), fb[keep], xb[keep], int(evals)))
    return out


def run_mini_moea(problem: ProblemDefinition, box: Box, config: MiniMoeaConfig, seed) -> MiniMoeaResult:
    """Run one mini MOEA inside ``box``; ``seed`` is an int, seed sequence or Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return run_mini_moea_batch(problem, box.lo[None], box.hi[None], [box.id], config, [rng])[0]
