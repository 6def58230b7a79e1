"""Test instances, the problem-file format, and brute-force grid oracles.

Problem file (UTF-8)::

    [problem]
    name = t51
    n = 2
    m = 2

    [objective 1]
    expr = x1

    [objective 2]
    expr = (+ (min (abs (- x1 1)) (- 1.5 x1)) x2 1)

    [constraint 1]
    expr = (- 1 x1)

    [domain]
    lo = 0, 0
    hi = 2, 2

Constraints are feasible where ``expr >= 0``.
"""

from __future__ import annotations

import functools
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import expr as E
from .dominance import nondominated_mask
from .expr import Expr, ParseError
from .geometry import Box


class ProblemError(ValueError):
    """Invalid problem definition or file."""


@dataclass(eq=False)
class ProblemDefinition:
    name: str
    n: int
    objectives: list[Expr]
    constraints: list[Expr]
    lo: np.ndarray
    hi: np.ndarray
    # samples points of the Pareto set: sampler(k) -> (k, n)
    pareto_set_sampler: Callable[[int], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.objectives = list(self.objectives)
        self.constraints = list(self.constraints)
        self.lo = np.asarray(self.lo, dtype=float).reshape(-1)
        self.hi = np.asarray(self.hi, dtype=float).reshape(-1)
        self.validate()

    def validate(self):
        if self.n < 1:
            raise ProblemError("n must be positive")
        if len(self.objectives) < 2:
            raise ProblemError("at least two objectives are required")
        if self.lo.size != self.n or self.hi.size != self.n:
            raise ProblemError(f"domain bounds must have length n={self.n}")
        if np.any(self.lo > self.hi):
            raise ProblemError("domain requires lo <= hi")
        for kind, group in (("objective", self.objectives), ("constraint", self.constraints)):
            for i, e in enumerate(group):
                if e.max_var >= self.n:
                    raise ProblemError(
                        f"{kind} {i + 1} references x{e.max_var + 1} but n={self.n}"
                    )

    @property
    def m(self) -> int:
        return len(self.objectives)

    @property
    def p(self) -> int:
        return len(self.constraints)

    @property
    def constrained(self) -> bool:
        return bool(self.constraints)

    def domain(self, id: int = 0) -> Box:
        return Box(id, self.lo.copy(), self.hi.copy(), True)

    @functools.cached_property
    def gradients(self) -> list[list[Expr]]:
        return [E.grad(f, self.n) for f in self.objectives]

    def evaluate(self, X) -> np.ndarray:
        """Objective values; (n,) -> (m,), (N, n) -> (N, m)."""
        X = np.asarray(X, dtype=float)
        return np.stack([E.evaluate(f, X) for f in self.objectives], axis=-1)

    def constraint_values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if not self.constraints:
            return np.zeros(X.shape[:-1] + (0,))
        return np.stack([E.evaluate(g, X) for g in self.constraints], axis=-1)

    def violation(self, X) -> np.ndarray:
        """l1 constraint violation ``sum_j |min(g_j(x), 0)|``."""
        G = self.constraint_values(X)
        return np.abs(np.minimum(G, 0.0)).sum(axis=-1)

    def feasible(self, X, tol: float = 0.0) -> np.ndarray:
        G = self.constraint_values(X)
        return np.all(G >= -tol, axis=-1)

    def to_text(self) -> str:
        lines = ["[problem]", f"name = {self.name}", f"n = {self.n}", f"m = {self.m}", ""]
        for i, f in enumerate(self.objectives):
            lines += [f"[objective {i + 1}]", f"expr = {E.to_prefix(f)}", ""]
        for j, g in enumerate(self.constraints):
            lines += [f"[constraint {j + 1}]", f"expr = {E.to_prefix(g)}", ""]
        lines += [
            "[domain]",
            "lo = " + ", ".join(repr(float(v)) for v in self.lo),
            "hi = " + ", ".join(repr(float(v)) for v in self.hi),
            "",
        ]
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def structurally_equal(self, other: ProblemDefinition) -> bool:
        return (
            self.name == other.name
            and self.n == other.n
            and self.objectives == other.objectives
            and self.constraints == other.constraints
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )


# builtin instances ---------------------------------------------------------


def _x(n):
    return [E.var(i) for i in range(n)]


def t51() -> ProblemDefinition:
    x1, x2 = _x(2)
    f2 = E.minimum(E.fabs(x1 - 1), 1.5 - x1) + x2 + 1

    def pareto_set(k):
        # x2 = 0 and x1 in [0, 1] or (1.5, 2]; sampled proportionally to length
        t = np.linspace(0.0, 1.0, k)
        x1s = np.where(t <= 2 / 3, t * 1.5, 1.5 + (t - 2 / 3) * 1.5)
        x1s = x1s[(x1s <= 1.0) | (x1s > 1.5)]
        return np.column_stack([x1s, np.zeros_like(x1s)])

    return ProblemDefinition("t51", 2, [x1, f2], [], [0, 0], [2, 2], pareto_set)


def t51_front(f1: np.ndarray) -> np.ndarray:
    """f2 on the Pareto front of t51 (closure of both segments); NaN off the front."""
    f1 = np.asarray(f1, dtype=float)
    return np.where(f1 <= 1.0, 2.0 - f1, np.where(f1 >= 1.5, 2.5 - f1, np.nan))


def t51_front_distance(F: np.ndarray) -> np.ndarray:
    """Euclidean distance from objective vectors to the two closed front segments."""
    F = np.atleast_2d(F)

    def seg(p, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = b - a
        t = np.clip(((p - a) @ d) / (d @ d), 0.0, 1.0)
        return np.linalg.norm(p - (a + t[:, None] * d), axis=1)

    return np.minimum(seg(F, (0, 2), (1, 1)), seg(F, (1.5, 1), (2, 0.5)))


def t52(n: int = 3) -> ProblemDefinition:
    xs = _x(n)
    c = 1.0 / math.sqrt(n)
    s1 = E.total([(x - c) ** 2 for x in xs])
    s2 = E.total([(x + c) ** 2 for x in xs])
    f1 = 1 - E.exp(-s1)
    f2 = 1 - E.exp(-s2)

    def pareto_set(k):
        t = np.linspace(-c, c, k)
        return np.repeat(t[:, None], n, axis=1)

    return ProblemDefinition(f"t52", n, [f1, f2], [], [-2.0] * n, [2.0] * n, pareto_set)


def zdt2(n: int = 10) -> ProblemDefinition:
    if n < 2:
        raise ProblemError("zdt2 needs n >= 2")
    xs = _x(n)
    g = 1 + (9.0 / (n - 1)) * E.total(xs[1:])
    f1 = xs[0]
    # g * (1 - (f1/g)^2) rewritten; the expanded form has much tighter gradient enclosures
    f2 = g - f1**2 / g

    def pareto_set(k):
        X = np.zeros((k, n))
        X[:, 0] = np.linspace(0.0, 1.0, k)
        return X

    return ProblemDefinition("zdt2", n, [f1, f2], [], [0.0] * n, [1.0] * n, pareto_set)


def t54(n: int = 3) -> ProblemDefinition:
    xs = _x(n)

    def w(j, z):
        # j is 1-based; j = 3 goes with the first branch
        if j <= 3:
            return 0.01 * E.exp(-((z / 20.0) ** 2.5))
        return 0.01 * E.exp(-(z / 15.0))

    f1 = E.total(xs)
    f2 = 1 - E.total([1 - w(j + 1, x) for j, x in enumerate(xs)])
    return ProblemDefinition("t54", n, [f1, f2], [], [0.0] * n, [40.0] * n)


def t55() -> ProblemDefinition:
    x1, x2 = _x(2)
    r2 = x1**2 + x2**2
    f1 = 0.5 * r2 + E.sin(r2)
    f2 = (3 * x1 - 2 * x2 + 4) ** 2 / 8.0 + (x1 - x2 + 1) ** 2 / 27.0 + 15
    f3 = 1 / (r2 + 1) - 1.1 * E.exp(-x1**2 - x2**2)
    return ProblemDefinition("t55", 2, [f1, f2, f3], [], [-3, -3], [3, 3])


def t56() -> ProblemDefinition:
    x1, x2 = _x(2)
    g1 = x1**2 + x2**2 - 1 - 0.1 * E.cos(16 * E.atan(x1 / x2))
    g2 = 0.5 - (x1 - 0.5) ** 2 - (x2 - 0.5) ** 2
    return ProblemDefinition("t56", 2, [x1, x2], [g1, g2], [0, 0], [math.pi, math.pi])


def linear_pair() -> ProblemDefinition:
    """F(x) = (x, 1 - x) on [0, 1]; every point is Pareto optimal."""
    (x,) = _x(1)
    return ProblemDefinition("linear", 1, [x, 1 - x], [], [0.0], [1.0], lambda k: np.linspace(0, 1, k)[:, None])


BUILTINS: dict[str, tuple[Callable[..., ProblemDefinition], bool]] = {
    # name -> (factory, accepts n)
    "t51": (t51, False),
    "t52": (t52, True),
    "zdt2": (zdt2, True),
    "t54": (t54, True),
    "t55": (t55, False),
    "t56": (t56, False),
    "linear": (linear_pair, False),
}


def builtin(name: str, n: int | None = None) -> ProblemDefinition:
    try:
        factory, takes_n = BUILTINS[name]
    except KeyError:
        raise ProblemError(
            f"unknown problem {name!r}; valid problems: {', '.join(sorted(BUILTINS))}"
        ) from None
    if n is not None and takes_n:
        return factory(n)
    if n is not None and not takes_n and n != factory().n:
        raise ProblemError(f"problem {name!r} has fixed dimension {factory().n}")
    return factory()


# file format -----------------------------------------------------------------

_SECTION = re.compile(r"\[\s*([a-z]+)(?:\s+(\d+))?\s*\]$")


def _floats(text: str, line: int) -> list[float]:
    try:
        return [float(t) for t in re.split(r"[,\s]+", text.strip()) if t]
    except ValueError:
        raise ProblemError(f"line {line}: expected a list of numbers") from None


def parse_problem(text: str) -> ProblemDefinition:
    sections: dict[tuple[str, int], dict[str, tuple[str, int, int]]] = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        s = line.strip()
        if s.startswith("["):
            m = _SECTION.match(s)
            if not m:
                raise ProblemError(f"line {ln}, column 1: malformed section header {s!r}")
            current = (m.group(1), int(m.group(2) or 0))
            if current in sections:
                raise ProblemError(f"line {ln}: duplicate section {s}")
            sections[current] = {}
            continue
        if current is None or "=" not in line:
            raise ProblemError(f"line {ln}, column 1: expected 'key = value' inside a section")
        key, _, val = line.partition("=")
        col = len(key) + 2 + (len(val) - len(val.lstrip()))
        sections[current][key.strip().lower()] = (val.strip(), ln, col)

    def get(sec, key):
        try:
            return sections[sec][key]
        except KeyError:
            raise ProblemError(f"missing '{key}' in section [{' '.join(map(str, sec)).rstrip(' 0')}]") from None

    if ("problem", 0) not in sections:
        raise ProblemError("missing [problem] section")
    name = get(("problem", 0), "name")[0]
    try:
        n = int(get(("problem", 0), "n")[0])
    except ValueError:
        raise ProblemError("n must be an integer") from None

    def exprs(kind):
        idx = sorted(i for (k, i) in sections if k == kind)
        out = []
        for i in idx:
            text_, ln, col = get((kind, i), "expr")
            try:
                out.append(E.parse(text_))
            except ParseError as e:
                raise ProblemError(f"line {ln}, column {col + e.pos}: {e}") from None
        return out

    objectives = exprs("objective")
    constraints = exprs("constraint")
    if not objectives:
        raise ProblemError("no objectives defined")
    if "m" in sections[("problem", 0)]:
        m = int(get(("problem", 0), "m")[0])
        if m != len(objectives):
            raise ProblemError(f"m={m} but {len(objectives)} objectives given")
    if ("domain", 0) not in sections:
        raise ProblemError("missing [domain] section")
    lo_t, lo_ln, _ = get(("domain", 0), "lo")
    hi_t, hi_ln, _ = get(("domain", 0), "hi")
    lo = _floats(lo_t, lo_ln)
    hi = _floats(hi_t, hi_ln)
    if len(lo) == 1:
        lo = lo * n
    if len(hi) == 1:
        hi = hi * n
    return ProblemDefinition(name, n, objectives, constraints, lo, hi)


def load_problem(path) -> ProblemDefinition:
    return parse_problem(Path(path).read_text(encoding="utf-8"))


def save_problem(problem: ProblemDefinition, path):
    Path(path).write_text(problem.to_text(), encoding="utf-8")


# grid oracle -------------------------------------------------------------------


@dataclass
class GridParetoOracle:
    resolution: int
    front: np.ndarray
    preimages: np.ndarray
    spacing: np.ndarray

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self.spacing))


def grid_oracle(problem: ProblemDefinition, resolution: int, max_points: int = 2_000_000) -> GridParetoOracle:
    """Nondominated images of all feasible points on a full regular grid."""
    if problem.n > 3 or resolution**problem.n > max_points:
        raise ProblemError("grid oracle is limited to n <= 3 and a bounded number of points")
    axes = [np.linspace(problem.lo[i], problem.hi[i], resolution) for i in range(problem.n)]
    X = np.stack([a.reshape(-1) for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    if problem.constrained:
        X = X[problem.feasible(X)]
    F = problem.evaluate(X)
    keep = nondominated_mask(F)
    spacing = (problem.hi - problem.lo) / max(resolution - 1, 1)
    return GridParetoOracle(resolution, F[keep], X[keep], spacing)


def builtin_names() -> Sequence[str]:
    return sorted(BUILTINS)
