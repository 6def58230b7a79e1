"""Hybrid branch-and-bound / evolutionary solver for small multiobjective problems."""

from .dominance import NondominatedArchive, dominates, hausdorff, nondominated_filter, strictly_dominates, weakly_dominates
from .engine import SolverConfig, run_basic_bb, run_pbb, solve
from .geometry import Box, BoxArray, bisect
from .minimoea import MiniMoeaConfig, run_mini_moea
from .problems import ProblemDefinition, builtin, load_problem

__version__ = "0.1.0"
