"""Command-line driver: ``idgsem run``, ``idgsem verify`` and ``idgsem reference``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import verify as V
from .physics import make_problem
from .solver import SolverConfig, SolverError, advance, make_setup

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3

SOLUTION_HEADER = ["x", "t", "u", "cell", "node"]
DIAGNOSTICS_HEADER = ["step", "t", "dt", "umin", "umax", "mass", "solver_iters", "entropy_defect_sq", "entropy_defect_k0"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _write_csv(path: Path, header: list, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def worker_count() -> int:
    """``IDGSEM_THREADS`` caps the number of worker processes."""
    env = os.environ.get("IDGSEM_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = min(cap, max(1, int(env)))
        except ValueError:
            pass
    return cap


def solution_rows(report):
    """Rows ``x, t, u, cell, node``; space-time runs list every level of the final slab."""
    setup = report.setup
    grid, basis = setup.disc.grid, setup.disc.basis
    x = grid.node_coordinates(basis)
    if not report.steps:
        levels, times = report.u_initial[None], [0.0]
    else:
        st = report.steps[-1]
        levels = st.levels
        if setup.scheme == "st":
            t0 = st.t - st.dt
            times = [t0 + 0.5 * st.dt * (1.0 + xr) for xr in setup.disc.basis_q.nodes]
            times[-1] = st.t
        else:
            times = [st.t]
    for U, t in zip(levels, times):
        for c in range(grid.n_cells):
            for i in range(basis.size):
                yield (x[c, i], t, U[c, i], c, i)


def diagnostics_rows(report):
    for d in V.step_diagnostics(report):
        yield (d.step, d.t, d.dt, d.u_min, d.u_max, d.mass, d.solver_iters, d.entropy_defect_sq, d.entropy_defect_k0)


# ---------------------------------------------------------------------------
# run


def _cmd_run(args) -> int:
    pr = make_problem(args.problem)
    try:
        setup = make_setup(pr, scheme=args.scheme, p=args.p, q=args.q, n_cells=args.n_cells, cfl=args.cfl,
                           viscosity=args.viscosity, flux=args.flux)
    except ValueError as exc:
        print(f"idgsem run: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cfg = SolverConfig(method=args.method)
    try:
        report = advance(setup, cfg, final_time=args.final_time)
    except SolverError as exc:
        print(f"solver failure at step {exc.step}: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_SOLVER
    out = Path(args.output)
    _write_csv(out / "solution.csv", SOLUTION_HEADER, solution_rows(report))
    _write_csv(out / "diagnostics.csv", DIAGNOSTICS_HEADER, diagnostics_rows(report))
    print(f"problem {pr.ident} scheme={setup.scheme} p={setup.disc.basis.degree} "
          f"n_cells={setup.disc.grid.n_cells} viscosity={setup.viscosity} steps={report.n_steps} t={report.final_time:.17g}")
    if report.steady_converged is not None:
        state = "converged" if report.steady_converged else "not converged"
        print(f"steady state {state}: last change {report.steady_change:.3e} after {report.n_steps} steps")
    checks = V.run_checks(report, f"p{pr.ident}")
    for c in checks:
        print(c.line())
    if args.strict and not all(c.passed for c in checks):
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _corrupt_d(D: np.ndarray) -> np.ndarray:
    D = D.copy()
    D[0, 1] += 1e-3
    return D


CHECK_GROUPS = ("sbp", "ec_identity", "lemma21", "lemma22", "lax_average", "three_point",
                "problem1", "problem2", "problem3", "problem4", "problem5")


def run_check_group(name: str, samples: int = 10_000, fault: Optional[str] = None) -> list:
    """Run one named group of checks; returns a list of :class:`CheckResult`."""
    if name == "sbp":
        return [V.check_sbp(deriv_hook=_corrupt_d if fault == "corrupt-d" else None)]
    if name == "ec_identity":
        return [V.check_ec_identities(n=samples)]
    if name == "lemma21":
        return [V.check_ec_fan_average(n=samples)]
    if name == "lemma22":
        return [V.check_entropy_mean_bound(n=samples)]
    if name == "lax_average":
        return [V.check_lax_average(n=samples)]
    if name == "three_point":
        return V.check_three_point(n=samples)
    if name.startswith("problem"):
        pid = int(name[len("problem"):])
        return V.run_checks(advance(make_setup(make_problem(pid))), f"p{pid}")
    raise ValueError(f"unknown check group {name!r}")


def _run_task(item):
    name, samples, fault = item
    try:
        return name, run_check_group(name, samples, fault), None
    except SolverError as exc:
        return name, [], f"solver failure at step {exc.step}: {exc}"


def _cmd_verify(args) -> int:
    names = list(CHECK_GROUPS)
    if args.only:
        unknown = [n for n in args.only if n not in CHECK_GROUPS]
        if unknown:
            print(f"idgsem verify: unknown check(s) {', '.join(unknown)}; choose from {', '.join(names)}", file=sys.stderr)
            return EXIT_USAGE
        names = [n for n in names if n in args.only]
    items = [(n, args.samples, args.inject_fault) for n in names]
    nworkers = min(worker_count(), len(items))
    if nworkers > 1:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            results = list(pool.map(_run_task, items))
    else:
        results = [_run_task(it) for it in items]
    ok = True
    for name, checks, err in results:
        if err is not None:
            print(f"CHECK {name} FAIL nan")
            print(f"# {err}", file=sys.stderr)
            ok = False
        for c in checks:
            print(c.line())
            ok &= c.passed
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# reference


def _cmd_reference(args) -> int:
    from .reference import GOLDEN_BINS, GOLDEN_CELLS, generate_goldens

    out = generate_goldens(Path(args.output) if args.output else None, problems=tuple(args.problem),
                           n_cells=args.n_cells or GOLDEN_CELLS, n_bins=args.bins or GOLDEN_BINS, log=print)
    print(f"wrote golden profiles to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="idgsem", description="Implicit DGSEM for 1D scalar conservation laws.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one test problem and write solution and diagnostics CSVs")
    run.add_argument("--problem", type=int, choices=range(1, 6), required=True)
    run.add_argument("--scheme", choices=("be", "st"), default=None, help="default: be for problem 2, else st")
    run.add_argument("--p", type=int, default=None, help="space degree (default 3)")
    run.add_argument("--q", type=int, default=None, help="time degree (default 3; 0 selects backward Euler)")
    run.add_argument("--n-cells", type=int, default=None, help="number of cells (default 40)")
    run.add_argument("--cfl", type=float, default=None, help="default 1, or 1000 for problem 2")
    run.add_argument("--viscosity", choices=("none", "full", "adaptive"), default="full")
    run.add_argument("--flux", choices=("godunov", "rusanov"), default="godunov")
    run.add_argument("--method", choices=("newton", "picard", "newton_with_picard_fallback"),
                     default="newton_with_picard_fallback")
    run.add_argument("--final-time", type=float, default=None, help="override the problem's final time")
    run.add_argument("--output", default="idgsem_out", help="output directory")
    run.add_argument("--strict", action="store_true", help="exit 3 when a check fails")
    run.set_defaults(func=_cmd_run)

    ver = sub.add_parser("verify", help="run the property sweeps and the five acceptance runs")
    ver.add_argument("--only", nargs="+", metavar="NAME", help="run only the named checks")
    ver.add_argument("--samples", type=int, default=10_000, help="random samples per sweep")
    ver.add_argument("--inject-fault", choices=("corrupt-d",), default=None, help=argparse.SUPPRESS)
    ver.set_defaults(func=_cmd_verify)

    ref = sub.add_parser("reference", help="regenerate golden finite-volume profiles")
    ref.add_argument("--problem", type=int, nargs="+", choices=range(1, 6), default=[1, 2, 3, 4, 5])
    ref.add_argument("--n-cells", type=int, default=None)
    ref.add_argument("--bins", type=int, default=None)
    ref.add_argument("--output", default=None, help="default: the packaged data directory")
    ref.set_defaults(func=_cmd_reference)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    for name, least in (("p", 1), ("q", 0), ("n_cells", 2)):
        v = getattr(args, name, None)
        if v is not None and v < least:
            parser.error(f"--{name.replace('_', '-')} must be at least {least}")
    if getattr(args, "cfl", None) is not None and not args.cfl > 0:
        parser.error("--cfl must be positive")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
