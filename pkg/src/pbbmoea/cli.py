"""Command line front end.

    pbbmoea solve --problem t51 --algo pbb-moead --seed 7 --out r1
    pbbmoea solve --manifest r1/manifest.json --threads 4 --out r2
    pbbmoea compare --problem t52 --algos pbb-moead basic-bb --max-iters 9 --out cmp
    pbbmoea list-problems --json

Exit codes: 0 success, 1 runtime failure, 2 bad arguments or configuration.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import time
from pathlib import Path

from . import export
from .engine import ConfigError, SolverConfig, run_basic_bb, run_full_moea, run_pbb
from .expr import ParseError
from .minimoea import MiniMoeaConfig
from .problems import BUILTINS, ProblemError, builtin, builtin_names, parse_problem

log = logging.getLogger("pbbmoea")

ALGOS = ("basic-bb", "pbb-nsga2", "pbb-moead", "nsga2-full", "moead-full")
FULL_POPULATION = 200
FULL_GENERATIONS = 300


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# run specification ------------------------------------------------------------


def _resolve_problem(name, path, n):
    if (name is None) == (path is None):
        raise UsageError("give exactly one of --problem or --problem-file")
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read problem file: {exc}") from None
        return parse_problem(text), {"file": str(path), "text": text}
    if name not in BUILTINS:
        raise UsageError(f"unknown problem {name!r}; valid problems: {', '.join(builtin_names())}")
    if n is not None and not BUILTINS[name][1]:
        raise UsageError(f"problem {name!r} has a fixed dimension; drop --n")
    return builtin(name, n), {"builtin": name, "n": n}


def _read_moea_ini(path) -> dict:
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not cp.has_section("minimoea"):
        return {}
    sec = cp["minimoea"]
    allowed = {"variant": str, "population": int, "generations": int, "rho": float, "seed": int}
    out = {}
    for key, raw in sec.items():
        if key not in allowed:
            raise UsageError(f"{path}: unknown [minimoea] key {key!r}")
        try:
            out[key] = allowed[key](raw)
        except ValueError:
            raise UsageError(f"{path}: bad value for {key}: {raw!r}") from None
    return out


def build_spec(args) -> dict:
    """Everything that determines a run's results, as a JSON-able dict."""
    problem, source = _resolve_problem(args.problem, args.problem_file, args.n)
    ini = _read_moea_ini(args.config) if getattr(args, "config", None) else {}
    seed = ini.pop("seed", args.seed)
    algo = args.algo
    moea = {"rho": args.rho, **ini}
    if algo in ("pbb-nsga2", "nsga2-full"):
        moea.setdefault("variant", "nsga2")
    elif algo in ("pbb-moead", "moead-full"):
        moea.setdefault("variant", "moead")
    if algo.endswith("-full"):
        moea.setdefault("population", FULL_POPULATION)
        moea.setdefault("generations", FULL_GENERATIONS)
    cfg = {
        "algorithm": "basic-bb" if algo == "basic-bb" else "pbb",
        "epsilon": args.eps,
        "max_iterations": args.max_iters,
        "repair_period": args.repair_period,
        "seed": seed,
        "max_boxes": args.max_boxes,
    }
    spec = {
        "version": export.MANIFEST_VERSION,
        "problem": {**source, "name": problem.name, "digest": problem.digest()},
        "algo": algo,
        "config": cfg,
        "minimoea": moea,
    }
    make_config(spec, 1)  # validate now so errors exit with 2
    return spec


def problem_from_spec(spec: dict):
    src = spec["problem"]
    if "text" in src:
        problem = parse_problem(src["text"])
    else:
        problem = builtin(src["builtin"], src.get("n"))
    if problem.digest() != src["digest"]:
        raise UsageError("problem definition does not match the manifest digest")
    return problem


def make_config(spec: dict, threads: int) -> tuple[SolverConfig, MiniMoeaConfig]:
    try:
        moea = MiniMoeaConfig(**spec["minimoea"])
        cfg = SolverConfig(**spec["config"], threads=threads, minimoea=moea)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return cfg, moea


def execute(spec: dict, threads: int = 1):
    problem = problem_from_spec(spec)
    cfg, moea = make_config(spec, threads)
    algo = spec["algo"]
    if algo.endswith("-full"):
        state = run_full_moea(problem, moea, cfg.seed, cfg.feasibility_tol)
    elif algo == "basic-bb":
        state = run_basic_bb(problem, cfg)
    else:
        state = run_pbb(problem, cfg)
    return problem, state


def feasible_count(problem, state) -> int:
    if len(state.archive) == 0:
        return 0
    if not problem.constrained:
        return len(state.archive)
    return int(problem.feasible(state.archive.preimages).sum())


# commands --------------------------------------------------------------------------


def cmd_solve(args) -> int:
    if args.manifest:
        try:
            spec = export.read_manifest(args.manifest)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot use manifest {args.manifest}: {exc}") from None
        spec = {k: spec[k] for k in ("version", "problem", "algo", "config", "minimoea")}
    else:
        spec = build_spec(args)
    started = export.now()
    t0 = time.perf_counter()
    problem, state = execute(spec, args.threads)
    manifest = {**spec, "run": {"started": started, "threads": args.threads}}
    export.write_outputs(args.out, state, manifest)
    last = state.stats[-1]
    print(
        f"{spec['algo']} on {problem.name}: k={last.k} bnv={last.bnv} archive={last.archive_size} "
        f"gap={last.gap:.4g} ({time.perf_counter() - t0:.2f}s) -> {args.out}"
    )
    return 0


def cmd_compare(args) -> int:
    if len(args.algos) < 2:
        raise UsageError("compare needs at least two algorithms")
    out = Path(args.out)
    bnv_rows, gap_rows, summary = [], [], []
    for algo in args.algos:
        args.algo = algo
        spec = build_spec(args)
        t0 = time.perf_counter()
        problem, state = execute(spec, args.threads)
        secs = time.perf_counter() - t0
        export.write_outputs(out / algo, state, {**spec, "run": {"threads": args.threads}})
        if not algo.endswith("-full"):
            for s in state.stats:
                bnv_rows.append((s.k, algo, s.bnv))
                gap_rows.append((s.k, algo, s.gap))
        summary.append((algo, state.k, state.bnv, len(state.archive), feasible_count(problem, state), secs))
    out.mkdir(parents=True, exist_ok=True)
    (out / "bnv_curves.csv").write_text(export.curves_csv(bnv_rows, "bnv"), encoding="utf-8")
    (out / "gap_curves.csv").write_text(export.curves_csv(gap_rows, "gap"), encoding="utf-8")
    print(f"{'algo':<12} {'k':>4} {'bnv':>7} {'archive':>8} {'feasible':>9} {'seconds':>8}")
    for algo, k, bnv, size, feas, secs in summary:
        print(f"{algo:<12} {k:>4} {bnv:>7} {size:>8} {feas:>9} {secs:>8.2f}")
    return 0


def cmd_list_problems(args) -> int:
    rows = []
    for name in builtin_names():
        p = builtin(name)
        rows.append({"name": name, "n": p.n, "m": p.m, "constraints": p.p, "variable_n": BUILTINS[name][1]})
    if args.json:
        print(json.dumps(rows, indent=1))
    else:
        print(f"{'name':<12} {'n':>3} {'m':>3} {'constraints':>12}")
        for r in rows:
            n = f"{r['n']}*" if r["variable_n"] else str(r["n"])
            print(f"{r['name']:<12} {n:>3} {r['m']:>3} {r['constraints']:>12}")
        print("* default dimension; change it with --n")
    return 0


# argument parsing --------------------------------------------------------------------


def _run_flags(p, algo_flag: bool):
    p.add_argument("--problem", help="builtin problem name")
    p.add_argument("--problem-file", type=Path, help="problem definition file")
    p.add_argument("--n", type=int, help="dimension for scalable builtins")
    if algo_flag:
        p.add_argument("--algo", choices=ALGOS, default="pbb-moead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.02, help="gap tolerance in (0, 0.02]")
    p.add_argument("--max-iters", type=int, help="iteration cap (default 6n)")
    p.add_argument("--repair-period", type=int, help="repair every this many iterations (default 3n)")
    p.add_argument("--max-boxes", type=int, help="stop once the next level would exceed this many boxes")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--rho", type=float, default=1.0, help="constraint penalty in the mini MOEA")
    p.add_argument("--config", type=Path, help="INI file with a [minimoea] section")
    p.add_argument("--out", type=Path, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pbbmoea", description="Branch and bound with mini-MOEA bounding")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run one solver and write result files")
    _run_flags(p, True)
    p.add_argument("--manifest", type=Path, help="replay the run described by a manifest")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run several solvers under one budget")
    _run_flags(p, False)
    p.add_argument("--algos", nargs="+", choices=ALGOS, required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("list-problems", help="show builtin problems")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_list_problems)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be positive")
        if args.command == "solve" and args.manifest is None and args.problem is None and args.problem_file is None:
            raise UsageError("solve needs --problem, --problem-file or --manifest")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ProblemError, ParseError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        log.debug("run failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
