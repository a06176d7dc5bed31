"""Command-line runner.

Exit codes: 0 success, 1 configuration/validation/precondition error,
2 solver failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .evolution import LEDGER_COLUMNS, EvolutionProblem, averaging_norms, energy_ledger, evolve
from .expr import ExpressionError
from .functionals import StationaryProblem, energy_L
from .grid import envelope_fit
from .io import CSVFormatError, write_csv, write_json
from .minimize import MinimizeError
from .operators import assemble_kernel
from .params import ParamsError, validate
from .stationary import first_eigenpair, solve_P7, solve_S_lambda
from .verify import SUITES, CheckConfig, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3
THREADS_ENV = "MIXLOC_THREADS"

logger = logging.getLogger("mixloc")


class InputError(Exception):
    """Precondition failure detected while preparing a run (exit 1)."""


def _state_rows(grid, u):
    rows = []
    for i in range(grid.n_nodes):
        rows.append([i, *grid.nodes[i], grid.bdist[i], u[i]])
    return rows


def _state_header(grid, name):
    coords = ["x", "y"][: grid.dim]
    return ["node_index", *coords, "d", name]


def _validation(cfg: RunConfig, barrier=True):
    return validate(cfg.params, cfg.dim, barrier=barrier).to_list()


def _out_dir(args, cfg: RunConfig) -> Path:
    return Path(args.out if args.out is not None else cfg.output_dir)


def cmd_stationary(cfg: RunConfig, out: Path, problem: str = "S_lambda") -> int:
    grid = cfg.grid()
    kernel = assemble_kernel(grid, cfg.params)
    if problem == "S_lambda":
        g0 = cfg.g0.nodal(grid)
        if np.any(g0 < 0):
            raise InputError("g0 must be nonnegative")
        g_lower = None if cfg.g_lower is None else np.full(grid.n_nodes, cfg.g_lower)
        prob = StationaryProblem(cfg.lam, g0, cfg.params, grid, kernel, g_lower=g_lower)
        u, info = solve_S_lambda(prob, cfg.minimizer, full_output=True)
        energy = info["final_energy"]
    else:
        b = cfg.b.nodal(grid)
        if np.any(b < 0) or not np.any(b > 0):
            raise InputError("P7 needs a nonnegative source b that is not identically zero")
        u, info = solve_P7(b, cfg.params, grid, kernel, cfg.minimizer, full_output=True)
        energy = energy_L(u, b, cfg.params, grid, kernel)
    summary = {
        "problem": problem,
        "energy": energy,
        "solver": info,
        "params": cfg.params.to_dict(),
        "n_nodes": grid.n_nodes,
        "validation": _validation(cfg),
    }
    if np.all(u > 0):
        ap = cfg.params.alpha_prime
        summary["envelope"] = envelope_fit(u, grid, ap if np.isfinite(ap) else 1.0)
    write_csv(out / "solution.csv", _state_header(grid, "u"), _state_rows(grid, u))
    write_json(out / "stationary.json", summary)
    return EXIT_OK


def _initial_state(cfg: RunConfig, grid, kernel):
    if cfg.u0.kind == "stationary":
        b = cfg.u0.value.nodal(grid)
        if np.any(b < 0) or not np.any(b > 0):
            raise InputError("u0.stationary needs a nonnegative, nonzero source")
        return solve_P7(b, cfg.params, grid, kernel, cfg.minimizer)
    u0 = cfg.u0.nodal(grid)
    if np.any(u0 <= 0):
        raise InputError("u0 must be positive at every node")
    return u0


def cmd_evolve(cfg: RunConfig, out: Path) -> int:
    grid = cfg.grid()
    kernel = assemble_kernel(grid, cfg.params)
    u0 = _initial_state(cfg, grid, kernel)
    source = cfg.source.evolution_source(grid, cfg.n0)
    try:
        problem = EvolutionProblem(cfg.T, cfg.n0, source, u0, cfg.params, grid, kernel)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    traj = evolve(problem, cfg.minimizer)
    rows = []
    for n, (t, u) in enumerate(zip(traj.times, traj.states)):
        for i in range(grid.n_nodes):
            rows.append([n, t, i, u[i]])
    write_csv(out / "trajectory.csv", ["step", "t", "node_index", "u"], rows)
    ledger, cumulative = energy_ledger(traj, problem)
    write_csv(out / "ledger.csv", list(LEDGER_COLUMNS), [[r[c] for c in LEDGER_COLUMNS] for r in ledger])
    avg, full = averaging_norms(problem)
    summary = {
        "status": traj.status,
        "complete": traj.complete,
        "T": cfg.T,
        "n0": cfg.n0,
        "dt": problem.dt,
        "steps_completed": len(traj.states) - 1,
        "all_positive": traj.all_positive,
        "cumulative_defect": cumulative,
        "min_step_defect": min((r["defect"] for r in ledger), default=0.0),
        "source_average_norm_sq": avg,
        "source_norm_sq": full,
        "initial_envelope": problem.initial_envelope(),
        "max_iterations": max((d["iterations"] for d in traj.diagnostics), default=0),
        "max_grad_norm": max((d["grad_norm"] for d in traj.diagnostics), default=0.0),
        "params": cfg.params.to_dict(),
        "validation": _validation(cfg),
    }
    write_json(out / "summary.json", summary)
    return EXIT_OK if traj.complete else EXIT_SOLVER


def cmd_eigen(cfg: RunConfig, out: Path) -> int:
    grid = cfg.grid()
    kernel = assemble_kernel(grid, cfg.params)
    pair = first_eigenpair(grid, kernel, cfg.params.p)
    write_csv(out / "phi1.csv", _state_header(grid, "phi"), _state_rows(grid, pair.phi1))
    write_json(out / "eigen.json", {"lambda1": pair.lambda1, "residual": pair.residual, "p": cfg.params.p})
    return EXIT_OK


def check_config_from(cfg: RunConfig, threads: int) -> CheckConfig:
    vf = cfg.verify
    return CheckConfig(
        params=cfg.params,
        n_nodes=int(vf.get("n_nodes", cfg.cells)),
        dim=1,
        lam=float(vf.get("lam", cfg.lam)),
        g_lower=float(vf.get("g_lower", cfg.g_lower if cfg.g_lower is not None else 1.0)),
        T=float(vf.get("T", 1.0)),
        n0=int(vf.get("n0", 100)),
        opts=cfg.minimizer,
        threads=threads,
    )


def cmd_verify(cfg: RunConfig, out: Path, suite: str = "all", seed: int = 0, threads: int = 1) -> int:
    reports = run_suite(suite, check_config_from(cfg, threads), seed=seed)
    write_json(out / "verify.json", [r.to_dict() for r in reports])
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check_name} margin={r.margin:.6g}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def _resolve_threads(arg) -> int:
    env = os.environ.get(THREADS_ENV)
    raw = env if env not in (None, "") else arg
    if raw is None:
        return 1
    try:
        n = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"thread count must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"thread count must be at least 1, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (overrides config)")
    common.add_argument("--threads", default=argparse.SUPPRESS, help=f"worker threads ({THREADS_ENV} overrides)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="mixloc", parents=[common], description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    st = sub.add_parser("stationary", parents=[common], help="solve a stationary problem")
    st.add_argument("--problem", choices=("S_lambda", "P7"), default="S_lambda")
    sub.add_parser("evolve", parents=[common], help="run the implicit Euler scheme")
    sub.add_parser("eigen", parents=[common], help="first eigenpair")
    vf = sub.add_parser("verify", parents=[common], help="run verification checks")
    vf.add_argument("--suite", choices=("all",) + SUITES, default="all")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("config", "out", "seed", "threads", "verbose"):
        if not hasattr(args, name):
            setattr(args, name, None)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore" if not args.verbose else "default")
            cfg = load_config(args.config)
            threads = _resolve_threads(args.threads if args.threads is not None else cfg.threads)
            out = _out_dir(args, cfg)
            seed = args.seed if args.seed is not None else cfg.seed
            if args.command == "stationary":
                return cmd_stationary(cfg, out, args.problem)
            if args.command == "evolve":
                return cmd_evolve(cfg, out)
            if args.command == "eigen":
                return cmd_eigen(cfg, out)
            return cmd_verify(cfg, out, args.suite, seed, threads)
    except (ConfigError, ParamsError, CSVFormatError, ExpressionError, InputError) as exc:
        print(f"mixloc: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MinimizeError as exc:
        print(f"mixloc: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
