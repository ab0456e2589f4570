"""Nonlinear solvers for one implicit step and the time-marching driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import adapt
from .basis import build_basis
from .grid import Grid1D, exterior_traces, project_initial
from .physics import Problem, lipschitz_constant
from .scheme import (
    Discretization,
    ViscosityConfig,
    be_jacobian,
    be_normalized,
    space_viscosity_bound,
    st_jacobian,
    st_normalized,
    time_viscosity_bound,
)
from .twopoint import EcFlux, InterfaceFlux

log = logging.getLogger(__name__)

METHODS = ("picard", "newton", "newton_with_picard_fallback")
WATCHDOG_STEPS = 6


class SolverError(RuntimeError):
    """Nonlinear solve failed; ``step`` is the time-step index when known."""

    def __init__(self, msg: str, *, step: Optional[int] = None, residual: float = np.nan):
        super().__init__(msg if step is None else f"step {step}: {msg}")
        self.step = step
        self.residual = residual


@dataclass
class SolverConfig:
    method: str = "newton_with_picard_fallback"
    tol_abs: float = 1e-11
    tol_rel: float = 1e-10
    max_newton: int = 200
    max_picard: int = 20000
    steady_tol: float = 1e-10
    max_steady_steps: int = 1000
    #: Picard stalls if the residual has not decreased within this many sweeps
    stall_window: int = 50

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.tol_abs <= 0 or self.tol_rel <= 0 or self.steady_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residual: float
    method: str
    history: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Newton


def newton_solve(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    jacobian_fn: Callable[[np.ndarray], object],
    guess: np.ndarray,
    cfg: SolverConfig = SolverConfig(),
) -> SolveResult:
    """Damped Newton iteration with a sparse direct solve per iterate.

    Stops once ``||F||_inf <= tol_abs + tol_rel ||F(guess)||_inf``.
    """
    x = np.array(guess, dtype=float)
    F = residual_fn(x)
    r0 = float(np.max(np.abs(F)))
    tol = cfg.tol_abs + cfg.tol_rel * r0
    hist = [r0]
    r = r0
    for it in range(cfg.max_newton + 1):
        if r <= tol:
            return SolveResult(x, it, True, r, "newton", hist)
        if it == cfg.max_newton:
            break
        Jm = jacobian_fn(x)
        try:
            dx = spla.spsolve(Jm.tocsc(), -F.ravel()).reshape(x.shape)
        except RuntimeError:
            break
        if not np.all(np.isfinite(dx)):
            break
        lam = 1.0
        while True:
            xn = x + lam * dx
            Fn = residual_fn(xn)
            rn = float(np.max(np.abs(Fn)))
            if rn <= (1.0 - 1e-4 * lam) * r or lam < 1e-6:
                break
            lam *= 0.5
        if lam < 1e-6 and rn >= r:
            # watchdog: a few undamped steps, which can cross a flux kink
            # where the damped iteration cycles; keep the best iterate
            best = (r, x, F)
            xw, Fw = x + dx, residual_fn(x + dx)
            for k in range(WATCHDOG_STEPS + 1):
                rw = float(np.max(np.abs(Fw)))
                if rw < best[0]:
                    best = (rw, xw, Fw)
                if rw <= tol or k == WATCHDOG_STEPS:
                    break
                try:
                    dxw = spla.spsolve(jacobian_fn(xw).tocsc(), -Fw.ravel()).reshape(x.shape)
                except RuntimeError:
                    break
                if not np.all(np.isfinite(dxw)):
                    break
                xw = xw + dxw
                Fw = residual_fn(xw)
            if best[0] >= r:
                break
            r, x, F = best
            hist.append(r)
            continue
        x, F, r = xn, Fn, rn
        hist.append(r)
        # a full step below roundoff cannot improve the iterate any further
        if lam == 1.0 and np.max(np.abs(dx)) <= 8.0 * np.finfo(float).eps * max(1.0, np.max(np.abs(x))):
            return SolveResult(x, it + 1, True, r, "newton", hist)
    return SolveResult(x, len(hist) - 1, False, r, "newton", hist)


# ---------------------------------------------------------------------------
# Picard: the convex-combination fixed-point map


def _picard_space_parts(U, disc: Discretization, dt: float, d_cell: np.ndarray, lip: float):
    """Weights and states of the space coupling for stacked levels ``U``.

    Returns ``(gsum, gstate)`` with ``gsum = sum gamma`` and
    ``gstate = sum gamma * state`` per DOF, where volume couplings use the
    Riemann-fan average and faces the three-point monotone state.
    """
    basis = disc.basis
    D = basis.deriv
    w = basis.weights
    J = disc.grid.jacobian
    ec = disc.ec
    npn = basis.size
    if np.any(d_cell <= 0):
        raise ValueError("Picard iteration needs a positive viscosity in every cell")
    Ui = np.broadcast_to(U[..., :, None], U.shape + (npn,))
    Uk = np.broadcast_to(U[..., None, :], U.shape + (npn,))
    beta = ec.beta(Ui, Uk)
    d = d_cell[:, None, None]
    gamma = dt * d * w[None, None, :] / (2.0 * beta * J)
    offd = ~np.eye(npn, dtype=bool)
    absD = np.where(offd, np.abs(D), 1.0)
    alpha = d * w[None, None, :] / (8.0 * beta * absD)
    n = np.where(offd, np.sign(D), 1.0)
    fan = ec.fan_average_U(Ui, Uk, n, alpha, check=False)
    gamma = np.where(offd, gamma, 0.0)
    gsum = gamma.sum(axis=-1)
    gstate = (gamma * fan).sum(axis=-1)

    f = disc.flux.f
    left, right = exterior_traces(U, disc.grid)
    hr = disc.iflux.h(U[..., -1], right, 1.0)
    hl = disc.iflux.h(U[..., 0], left, -1.0)
    br = U[..., -1] - (hr - f(U[..., -1])) / (2.0 * lip)
    bl = U[..., 0] - (hl + f(U[..., 0])) / (2.0 * lip)
    ge_r = 2.0 * dt * lip / (w[-1] * J)
    ge_l = 2.0 * dt * lip / (w[0] * J)
    gsum[..., -1] += ge_r
    gstate[..., -1] += ge_r * br
    gsum[..., 0] += ge_l
    gstate[..., 0] += ge_l * bl
    return gsum, gstate


def picard_step_be(uold, guess, dt: float, disc: Discretization, visc: ViscosityConfig, lip: float) -> np.ndarray:
    """One subiteration of the backward-Euler fixed-point map."""
    U = np.asarray(guess, dtype=float)
    gsum, gstate = _picard_space_parts(U[None], disc, dt, visc.cell_space(disc.grid.n_cells), lip)
    return (np.asarray(uold) + gstate[0]) / (1.0 + gsum[0])


def picard_step_st(uprev, guess, dt: float, disc: Discretization, visc: ViscosityConfig, lip: float) -> np.ndarray:
    """One subiteration of the space-time fixed-point map."""
    S = np.asarray(guess, dtype=float)
    bq = disc.basis_q
    nq = bq.size
    nc = disc.grid.n_cells
    wq = bq.weights
    Dq = bq.deriv
    gsum, gstate = _picard_space_parts(S, disc, dt, visc.cell_space(nc), lip)
    half_w = 0.5 * wq[:, None, None]
    diag = half_w * gsum
    rhs = half_w * gstate
    diag[0] += 1.0
    rhs[0] += uprev
    dn = visc.cell_time(nc)
    if np.any(dn <= 0):
        raise ValueError("Picard iteration needs a positive time viscosity in every cell")
    for r in range(nq):
        for m in range(nq):
            if m == r:
                continue
            beta = disc.ec.beta(S[r], S[m])
            g = wq[r] * (dn[:, None] * wq[m] - 4.0 * Dq[r, m] * beta)
            diag[r] += g
            rhs[r] += g * S[m]
    return rhs / diag


def picard_solve(step_fn, residual_fn, guess, cfg: SolverConfig, on_iterate=None, check_every: int = 10) -> SolveResult:
    """Repeat ``step_fn`` until the residual meets the tolerance.

    The residual is evaluated every ``check_every`` sweeps; ``on_iterate``
    sees every subiterate.
    """
    x = np.array(guess, dtype=float)
    r0 = float(np.max(np.abs(residual_fn(x))))
    tol = cfg.tol_abs + cfg.tol_rel * r0
    hist = [r0]
    best, best_at = r0, 0
    r = r0
    it = 0
    while r > tol:
        if it >= cfg.max_picard or it - best_at > cfg.stall_window:
            return SolveResult(x, it, False, r, "picard", hist)
        for _ in range(check_every):
            x = step_fn(x)
            it += 1
            if on_iterate is not None:
                on_iterate(x)
        r = float(np.max(np.abs(residual_fn(x))))
        hist.append(r)
        if r < best:
            best, best_at = r, it
    return SolveResult(x, it, True, r, "picard", hist)


# ---------------------------------------------------------------------------
# setup and time marching


@dataclass(frozen=True, eq=False)
class Setup:
    """Discretization, viscosity coefficients and step size for one run."""

    problem: Problem
    disc: Discretization
    scheme: str
    viscosity: str
    lipschitz: float
    lipschitz_raw: float
    d_space: float
    d_time: float
    dt: float

    def viscosity_config(self, values: Optional[np.ndarray] = None) -> ViscosityConfig:
        mult = None
        if self.viscosity == "adaptive":
            if values is None:
                raise ValueError("adaptive viscosity needs the current solution")
            mult = adapt.update_multipliers(values, self.disc.basis).multipliers
        return ViscosityConfig(self.viscosity, self.d_space, self.d_time, mult)


def make_setup(
    problem: Problem,
    *,
    scheme: Optional[str] = None,
    p: Optional[int] = None,
    q: Optional[int] = None,
    n_cells: Optional[int] = None,
    cfl: Optional[float] = None,
    viscosity: str = "full",
    flux: str = "godunov",
) -> Setup:
    """Assemble a run configuration; unspecified values follow the problem."""
    q = problem.q if q is None else q
    if scheme is None:
        scheme = "be" if q == 0 else "st"
    if scheme not in ("be", "st"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "st" and q < 1:
        raise ValueError("space-time scheme requires q >= 1")
    basis = build_basis(problem.p if p is None else p)
    basis_q = build_basis(q) if scheme == "st" else None
    grid = Grid1D.for_problem(problem, n_cells)
    lo, hi = problem.bounds
    lip = lipschitz_constant(problem.flux, lo, hi)
    lip_raw = lipschitz_constant(problem.flux, lo, hi, inflate=1.0)
    disc = Discretization(grid, basis, EcFlux(problem.flux), InterfaceFlux(flux, problem.flux, problem.bounds), basis_q)
    d_space = space_viscosity_bound(basis, lip)
    d_time = time_viscosity_bound(basis_q) if basis_q is not None else 0.0
    cfl = problem.cfl if cfl is None else cfl
    dt = cfl * grid.cell_width / lip_raw
    return Setup(problem, disc, scheme, viscosity, lip, lip_raw, d_space, d_time, dt)


@dataclass
class StepRecord:
    step: int
    t: float
    dt: float
    #: solution at the start of the step, shape ``(nc, np)``
    u_start: np.ndarray
    #: solution at the step's time nodes, shape ``(levels, nc, np)``
    levels: np.ndarray
    iterations: int
    method: str
    residual: float
    visc: ViscosityConfig

    @property
    def u_end(self) -> np.ndarray:
        return self.levels[-1]


@dataclass
class RunReport:
    setup: Setup
    u_initial: np.ndarray
    steps: list = field(default_factory=list)
    steady_converged: Optional[bool] = None
    steady_change: float = np.nan

    @property
    def final(self) -> np.ndarray:
        return self.steps[-1].u_end if self.steps else self.u_initial

    @property
    def final_time(self) -> float:
        return self.steps[-1].t if self.steps else 0.0

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def all_levels(self):
        """Every stored time level, initial field first."""
        yield self.u_initial
        for s in self.steps:
            yield from s.levels


def solve_step(setup: Setup, u_start: np.ndarray, dt: float, cfg: SolverConfig, on_picard_iterate=None):
    """Solve one implicit step or slab from ``u_start``."""
    disc = setup.disc
    visc = setup.viscosity_config(u_start)
    if setup.scheme == "be":
        res = lambda x: be_normalized(x, u_start, dt, disc, visc)  # noqa: E731
        jac = lambda x: be_jacobian(x, dt, disc, visc)  # noqa: E731
        pstep = lambda x: picard_step_be(u_start, x, dt, disc, visc, setup.lipschitz)  # noqa: E731
        guess = u_start.copy()
    else:
        res = lambda x: st_normalized(x, u_start, dt, disc, visc)  # noqa: E731
        jac = lambda x: st_jacobian(x, dt, disc, visc)  # noqa: E731
        pstep = lambda x: picard_step_st(u_start, x, dt, disc, visc, setup.lipschitz)  # noqa: E731
        guess = np.broadcast_to(u_start, (disc.basis_q.size,) + u_start.shape).copy()

    out = None
    if cfg.method in ("newton", "newton_with_picard_fallback"):
        out = newton_solve(res, jac, guess, cfg)
        if not out.converged and cfg.method == "newton_with_picard_fallback" and visc.mode == "full":
            log.info("newton stalled at %.3e, falling back to picard", out.residual)
            out = picard_solve(pstep, res, guess, cfg, on_picard_iterate)
    else:
        if visc.mode != "full":
            raise ValueError("picard iteration requires full viscosity")
        out = picard_solve(pstep, res, guess, cfg, on_picard_iterate)
    levels = out.x[None] if setup.scheme == "be" else out.x
    return out, levels, visc


def advance(setup: Setup, cfg: SolverConfig = SolverConfig(), *, final_time: Optional[float] = None) -> RunReport:
    """March from the initial datum to the final time (or to steady state).

    ``final_time`` overrides the problem's value; steady problems stop once
    successive solutions differ by less than ``cfg.steady_tol``.
    """
    problem = setup.problem
    u = project_initial(setup.disc.grid, setup.disc.basis, problem).values
    report = RunReport(setup, u.copy())
    T = problem.final_time if final_time is None else final_time
    steady = T is None
    t = 0.0
    step = 0
    while True:
        if steady:
            if step >= cfg.max_steady_steps:
                report.steady_converged = False
                break
            dt = setup.dt
        else:
            if t >= T * (1.0 - 1e-12) or T <= 0:
                break
            dt = min(setup.dt, T - t)
            if T - t - dt <= 1e-12 * T:
                dt = T - t
        out, levels, visc = solve_step(setup, u, dt, cfg)
        if not out.converged:
            raise SolverError(f"{out.method} did not converge (residual {out.residual:.3e})", step=step, residual=out.residual)
        step += 1
        t = T if (not steady and abs(t + dt - T) <= 1e-12 * max(T, 1.0)) else t + dt
        report.steps.append(StepRecord(step, t, dt, u, levels, out.iterations, out.method, out.residual, visc))
        change = float(np.max(np.abs(levels[-1] - u)))
        u = levels[-1].copy()
        if steady:
            report.steady_change = change
            if change < cfg.steady_tol:
                report.steady_converged = True
                break
    return report
