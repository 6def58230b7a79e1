"""Branch-and-bound solver loops.

``run_basic_bb`` bounds each box by the image of its centre and a
Lipschitz lower bound, processing boxes one at a time against a growing
archive.  ``run_pbb`` sweeps whole levels: every live box is bisected at
once, elite boxes are bounded by mini MOEA runs, the worst lower bounds
are improved, and boxes whose lower bound sets are dominated by the
archive are discarded.

Per-box work is a pure function of ``(seed, box id, iteration)``, so the
result is bit-identical for any number of worker threads.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bounding import DEBudget, LowerBoundSet, exchange_coordinates, lipschitz_lower_bounds, verify_partial_lower_bounds
from .dominance import NondominatedArchive, dominated_by_any, hausdorff
from .enclosure import Feasibility, feasibility_codes
from .geometry import BoxArray, IdCounter
from .minimoea import MiniMoeaConfig, MiniMoeaResult, run_mini_moea_batch
from .problems import ProblemDefinition

log = logging.getLogger(__name__)

ALGORITHMS = ("basic-bb", "pbb")

# stream tags mixed into per-box seeds
_TAG_MOEA = 1
_TAG_VERIFY = 2


class ConfigError(ValueError):
    pass


@dataclass
class SolverConfig:
    algorithm: str = "pbb"
    epsilon: float = 0.02
    max_iterations: int | None = None  # None -> 6n
    repair_period: int | None = None  # None -> 3n
    threads: int = 1
    seed: int = 0
    reset_archive_each_iteration: bool | None = None  # None -> not problem.constrained
    max_boxes: int | None = None
    minimoea: MiniMoeaConfig = field(default_factory=MiniMoeaConfig)
    verifier: DEBudget = field(default_factory=DEBudget)
    feasibility_tol: float = 0.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not 0.0 < self.epsilon <= 0.02:
            raise ConfigError("epsilon must lie in (0, 0.02]")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ConfigError("max_iterations must be positive")
        if self.repair_period is not None:
            if self.repair_period < 1:
                raise ConfigError("repair_period must be positive")
            if self.max_iterations is not None and self.repair_period > self.max_iterations:
                raise ConfigError("repair_period must not exceed max_iterations")

    def iterations_for(self, problem: ProblemDefinition) -> int:
        return self.max_iterations if self.max_iterations is not None else 6 * problem.n

    def repair_for(self, problem: ProblemDefinition) -> int:
        return self.repair_period if self.repair_period is not None else 3 * problem.n

    def reset_for(self, problem: ProblemDefinition) -> bool:
        if self.reset_archive_each_iteration is None:
            return not problem.constrained
        return self.reset_archive_each_iteration

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "epsilon": self.epsilon,
            "max_iterations": self.max_iterations,
            "repair_period": self.repair_period,
            "threads": self.threads,
            "seed": self.seed,
            "reset_archive_each_iteration": self.reset_archive_each_iteration,
            "max_boxes": self.max_boxes,
            "minimoea": self.minimoea.to_dict(),
            "verifier": vars(self.verifier).copy(),
            "feasibility_tol": self.feasibility_tol,
        }


@dataclass
class IterationStats:
    k: int
    bnv: int
    archive_size: int
    gap: float
    wall_ms: float = 0.0
    repair: bool = False
    elites_upper: int = 0
    elites_lower: int = 0
    improved: int = 0
    discarded: int = 0

    def record(self) -> dict:
        """Deterministic part of the stats (no timing)."""
        return {
            "k": self.k,
            "bnv": self.bnv,
            "archive_size": self.archive_size,
            "gap": None if not np.isfinite(self.gap) else self.gap,
            "repair": self.repair,
            "elites_upper": self.elites_upper,
            "elites_lower": self.elites_lower,
            "improved": self.improved,
            "discarded": self.discarded,
        }


@dataclass
class IterationState:
    """Solver state after an iteration.

    ``lower_points[i]`` is the lower bound set of box ``i`` in ``boxes``
    (one row, or m rows when ``improved[i]``).
    """

    k: int
    boxes: BoxArray
    lower_points: list
    improved: np.ndarray
    archive: NondominatedArchive
    ideal_points: dict = field(default_factory=dict)
    stats: list = field(default_factory=list)
    capped: bool = False

    @property
    def bnv(self) -> int:
        return len(self.boxes)

    @property
    def lower_bounds(self) -> dict[int, LowerBoundSet]:
        return {
            int(b): LowerBoundSet(int(b), p, bool(imp))
            for b, p, imp in zip(self.boxes.ids, self.lower_points, self.improved)
        }

    def all_lower_points(self) -> np.ndarray:
        if not self.lower_points:
            return np.empty((0, self.archive.m))
        return np.concatenate(self.lower_points)


@dataclass
class IterationTrace:
    """Everything produced in one iteration, handed to observers.

    ``candidates`` holds every box created by bisection that passed the
    feasibility test, with its final lower bound set; ``discarded`` marks
    those removed by the discarding test.
    """

    k: int
    candidates: BoxArray
    lower_points: list
    improved: np.ndarray
    discarded: np.ndarray
    archive: NondominatedArchive
    infeasible: BoxArray | None = None


Observer = Callable[[IterationState, IterationTrace], None]


# building blocks -------------------------------------------------------------


def box_rngs(seed: int, ids, k: int, tag: int) -> list[np.random.Generator]:
    return [np.random.default_rng([seed, int(b), k, tag]) for b in ids]


def _chunks(n_items: int, threads: int) -> list[slice]:
    if n_items == 0:
        return []
    parts = min(threads, n_items)
    edges = np.linspace(0, n_items, parts + 1).round().astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _fan_out(fn, n_items: int, threads: int) -> list:
    """Apply ``fn(slice)`` to contiguous chunks, preserving chunk order."""
    slices = _chunks(n_items, threads)
    if threads <= 1 or len(slices) <= 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, slices))


def mini_moea_runs(problem, boxes: BoxArray, idx: np.ndarray, cfg: SolverConfig, k: int) -> list[MiniMoeaResult]:
    idx = np.asarray(idx, dtype=np.int64)

    def work(s):
        sel = idx[s]
        rngs = box_rngs(cfg.seed, boxes.ids[sel], k, _TAG_MOEA)
        return run_mini_moea_batch(
            problem, boxes.lo[sel], boxes.hi[sel], boxes.ids[sel], cfg.minimoea, rngs, cfg.feasibility_tol
        )

    out = []
    for part in _fan_out(work, len(idx), cfg.threads):
        out.extend(part)
    return out


def verify_runs(problem, boxes: BoxArray, idx: np.ndarray, z_hat: np.ndarray, cfg: SolverConfig, k: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)

    def work(s):
        sel = idx[s]
        rngs = box_rngs(cfg.seed, boxes.ids[sel], k, _TAG_VERIFY)
        return verify_partial_lower_bounds(problem, boxes.lo[sel], boxes.hi[sel], z_hat[s], rngs, cfg.verifier).accepted

    parts = _fan_out(work, len(idx), cfg.threads)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=bool)


def discarding_test(lower_points: list, archive, boxes=None) -> np.ndarray:
    """Mask of boxes to keep.

    A box is dropped iff every point of its lower bound set is dominated by
    some archive entry.  ``archive`` may be an archive or an array of values.
    """
    values = archive.values if isinstance(archive, NondominatedArchive) else np.asarray(archive, dtype=float)
    nb = len(lower_points)
    if nb == 0:
        return np.zeros(0, dtype=bool)
    if len(values) == 0:
        return np.ones(nb, dtype=bool)
    counts = np.array([len(p) for p in lower_points])
    dom = dominated_by_any(np.concatenate(lower_points), values)
    owner = np.repeat(np.arange(nb), counts)
    n_dom = np.bincount(owner, weights=dom, minlength=nb)
    return n_dom < counts


def select_elites(flags: np.ndarray, singletons: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(E_U, L_minus, E_L)`` as boolean masks over boxes.

    ``E_U`` are the flagged boxes.  ``L_minus`` marks the singleton lower
    bounds that no other lower bound dominates from above, i.e. the maximal
    ones, which sit closest to the upper bounds.  ``E_L`` are their boxes,
    so as masks it equals ``L_minus``.
    """
    flags = np.asarray(flags, dtype=bool)
    L = np.asarray(singletons, dtype=float).reshape(len(flags), -1)
    maximal = ~dominated_by_any(-L, -L) if len(L) else np.zeros(0, dtype=bool)
    return flags.copy(), maximal, maximal.copy()


def update_flags(box_ids: np.ndarray, archive: NondominatedArchive) -> np.ndarray:
    """Flag exactly the boxes that are the origin of some archive entry."""
    return np.isin(box_ids, archive.box_ids)


def termination_gap(archive, lower_points) -> float:
    """Hausdorff distance between archive values and all lower bound points (inf if either is empty)."""
    values = archive.values if isinstance(archive, NondominatedArchive) else np.asarray(archive, dtype=float)
    if isinstance(lower_points, list):
        lower_points = np.concatenate(lower_points) if lower_points else np.empty((0, values.shape[-1]))
    if len(values) == 0 or len(lower_points) == 0:
        return float("inf")
    return hausdorff(values, lower_points)


def _remap_origins(archive: NondominatedArchive, boxes: BoxArray):
    if len(archive) == 0 or archive.n == 0:
        return
    where = boxes.locate(archive.preimages)
    live = np.isin(archive.box_ids, boxes.ids)
    # entries whose origin was just bisected move to the child holding their preimage
    parent_gone = ~live & (where >= 0)
    archive.box_ids = np.where(parent_gone, boxes.ids[np.maximum(where, 0)], archive.box_ids)


def _degenerate_state(problem, cfg) -> IterationState:
    dom = problem.domain(0)
    boxes = BoxArray.from_boxes([dom])
    archive = NondominatedArchive(problem.m, problem.n)
    c = 0.5 * (dom.lo + dom.hi)
    if not problem.constrained or problem.feasible(c, cfg.feasibility_tol):
        archive.insert(problem.evaluate(c), c, 0)
    lp = [lipschitz_lower_bounds(problem, dom.lo[None], dom.hi[None])]
    gap = termination_gap(archive, lp)
    st = IterationState(0, boxes, lp, np.zeros(1, dtype=bool), archive)
    st.stats.append(IterationStats(0, 1, len(archive), gap))
    return st


def _finish_iteration(state, trace, stats, t0, observers):
    stats.wall_ms = (time.perf_counter() - t0) * 1e3
    state.stats.append(stats)
    for obs in observers:
        obs(state, trace)
    log.debug("k=%d bnv=%d archive=%d gap=%.4g", stats.k, stats.bnv, stats.archive_size, stats.gap)


# Algorithm: basic branch and bound --------------------------------------------


def run_basic_bb(problem: ProblemDefinition, config: SolverConfig | None = None, observers=()) -> IterationState:
    """Centre-image upper bounds, Lipschitz lower bounds, sequential discarding."""
    cfg = config or SolverConfig(algorithm="basic-bb")
    if np.max(problem.hi - problem.lo) <= 0.0:
        return _degenerate_state(problem, cfg)
    max_iter = cfg.iterations_for(problem)
    ids = IdCounter(1)
    boxes = BoxArray.from_boxes([problem.domain(0)])
    archive = NondominatedArchive(problem.m, problem.n)
    state = IterationState(0, boxes, [], np.zeros(0, dtype=bool), archive)
    k = 1
    while True:
        t0 = time.perf_counter()
        children = boxes.bisect_all(ids)
        infeasible = None
        if problem.constrained:
            codes = feasibility_codes(problem.constraints, children.lo, children.hi)
            infeasible = children.subset(codes == Feasibility.INFEASIBLE)
            children = children.subset(codes != Feasibility.INFEASIBLE)
        L = lipschitz_lower_bounds(problem, children.lo, children.hi)
        C = children.centers
        U = problem.evaluate(C)
        ok = problem.feasible(C, cfg.feasibility_tol) if problem.constrained else np.ones(len(C), dtype=bool)
        keep = np.zeros(len(children), dtype=bool)
        for i in range(len(children)):
            if ok[i]:
                archive.insert(U[i], C[i], int(children.ids[i]))
            V = archive.values
            keep[i] = not (len(V) and (np.all(V <= L[i], axis=1) & np.any(V < L[i], axis=1)).any())
        lower = [L[i : i + 1] for i in range(len(children))]
        trace = IterationTrace(k, children, lower, np.zeros(len(children), dtype=bool), ~keep, archive, infeasible)
        boxes = children.subset(keep)
        kept_lower = [lower[i] for i in np.flatnonzero(keep)]
        gap = termination_gap(archive, kept_lower)
        state = IterationState(k, boxes, kept_lower, np.zeros(len(boxes), dtype=bool), archive, {}, state.stats)
        stats = IterationStats(k, len(boxes), len(archive), gap, discarded=int((~keep).sum()))
        _finish_iteration(state, trace, stats, t0, observers)
        if gap <= cfg.epsilon or k >= max_iter or len(boxes) == 0:
            break
        if cfg.max_boxes is not None and 2 * len(boxes) > cfg.max_boxes:
            state.capped = True
            break
        k += 1
    return state


# Algorithm: PBB-MOEA --------------------------------------------------------------


def run_pbb(problem: ProblemDefinition, config: SolverConfig | None = None, observers=()) -> IterationState:
    """Level-synchronous branch and bound with mini-MOEA bounding and elitism."""
    cfg = config or SolverConfig()
    if np.max(problem.hi - problem.lo) <= 0.0:
        return _degenerate_state(problem, cfg)
    max_iter = cfg.iterations_for(problem)
    repair_period = cfg.repair_for(problem)
    reset = cfg.reset_for(problem)
    m = problem.m
    ids = IdCounter(1)
    boxes = BoxArray.from_boxes([problem.domain(0)])
    boxes.flags[:] = True
    archive = NondominatedArchive(m, problem.n)
    state = IterationState(0, boxes, [], np.zeros(0, dtype=bool), archive)
    k = 1
    while True:
        t0 = time.perf_counter()
        children = boxes.bisect_all(ids)
        if not children.widths_consistent():
            raise RuntimeError("boxes of one level have different widths")
        if reset:
            archive = NondominatedArchive(m, problem.n)
        else:
            _remap_origins(archive, children)
        infeasible = None
        if problem.constrained:
            codes = feasibility_codes(problem.constraints, children.lo, children.hi)
            infeasible = children.subset(codes == Feasibility.INFEASIBLE)
            children = children.subset(codes != Feasibility.INFEASIBLE)
        N = len(children)
        L = lipschitz_lower_bounds(problem, children.lo, children.hi)
        repair = k % repair_period == 0
        if repair:
            children.flags[:] = True
            EU = np.ones(N, dtype=bool)
            EL = np.ones(N, dtype=bool)
        else:
            EU, _, EL = select_elites(children.flags, L)
            if not EU.any():
                EU[:] = True
        runs_idx = np.flatnonzero(EU | EL)
        results = dict(zip(runs_idx.tolist(), mini_moea_runs(problem, children, runs_idx, cfg, k)))

        # upper bounds from elite boxes, merged in box order
        u_idx = np.flatnonzero(EU)
        if len(u_idx):
            vals = [results[i].values for i in u_idx]
            pres = [results[i].preimages for i in u_idx]
            bids = [np.full(len(results[i].values), children.ids[i], dtype=np.int64) for i in u_idx]
            archive.extend(np.concatenate(vals), np.concatenate(pres), np.concatenate(bids))

        # lower bound improvement on E_L
        lower = [L[i : i + 1] for i in range(N)]
        improved = np.zeros(N, dtype=bool)
        l_idx = np.array([i for i in np.flatnonzero(EL) if not results[i].no_feasible], dtype=np.int64)
        ideal_points = {}
        if len(l_idx):
            Z = np.array([results[i].ideal for i in l_idx])
            for i, z in zip(l_idx, Z):
                ideal_points[int(children.ids[i])] = z
            distinct = np.all(Z != L[l_idx], axis=1)
            cand = l_idx[distinct]
            if len(cand):
                accepted = verify_runs(problem, children, cand, Z[distinct], cfg, k)
                for i, z in zip(cand[accepted], Z[distinct][accepted]):
                    lower[i] = exchange_coordinates(L[i], z)
                    improved[i] = True

        children.flags = update_flags(children.ids, archive)
        keep = discarding_test(lower, archive)
        trace = IterationTrace(k, children, lower, improved, ~keep, archive, infeasible)
        boxes = children.subset(keep)
        kept_lower = [lower[i] for i in np.flatnonzero(keep)]
        gap = termination_gap(archive, kept_lower)
        state = IterationState(k, boxes, kept_lower, improved[keep], archive, ideal_points, state.stats)
        stats = IterationStats(
            k, len(boxes), len(archive), gap, repair=bool(repair),
            elites_upper=int(EU.sum()), elites_lower=int(EL.sum()),
            improved=int(improved.sum()), discarded=int((~keep).sum()),
        )
        _finish_iteration(state, trace, stats, t0, observers)
        if gap <= cfg.epsilon or k >= max_iter or len(boxes) == 0:
            break
        if cfg.max_boxes is not None and 2 * len(boxes) > cfg.max_boxes:
            state.capped = True
            break
        k += 1
    return state


def solve(problem: ProblemDefinition, config: SolverConfig, observers=()) -> IterationState:
    if config.algorithm == "basic-bb":
        return run_basic_bb(problem, config, observers)
    return run_pbb(problem, config, observers)


def run_full_moea(
    problem: ProblemDefinition, moea: MiniMoeaConfig, seed: int = 0, tol: float = 0.0
) -> IterationState:
    """Plain MOEA over the whole domain, reported as a one-box, one-iteration state."""
    t0 = time.perf_counter()
    dom = problem.domain(0)
    boxes = BoxArray.from_boxes([dom])
    res = run_mini_moea_batch(
        problem, dom.lo[None], dom.hi[None], [0], moea, [np.random.default_rng([seed, 0, 0, _TAG_MOEA])], tol
    )[0]
    archive = NondominatedArchive(problem.m, problem.n)
    archive.extend(res.values, res.preimages, np.zeros(len(res.values), dtype=np.int64))
    state = IterationState(1, boxes, [], np.zeros(1, dtype=bool), archive)
    state.lower_points = [np.full((1, problem.m), -np.inf)]
    stats = IterationStats(1, 1, len(archive), float("inf"))
    stats.wall_ms = (time.perf_counter() - t0) * 1e3
    state.stats.append(stats)
    return state
