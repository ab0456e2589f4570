"""Checks on computed runs and randomized property sweeps of the building blocks.

Every check returns a :class:`CheckResult` whose ``worst`` value is the
largest violation found (nonpositive means no violation) unless stated
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .basis import LobattoBasis, build_basis, lagrange_eval
from .grid import Grid1D, cell_averages, exterior_traces, mass
from .physics import (
    EntropyPair,
    Flux,
    buckley_leverett,
    burgers,
    kruzkov_entropy,
    lipschitz_constant,
    square_entropy,
)
from .solver import RunReport
from .twopoint import EcFlux, InterfaceFlux, ec_interface_entropy_flux, lax_average_W

KRUZKOV_CONSTANTS = (-0.5, 0.0, 0.5)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def line(self) -> str:
        return f"CHECK {self.name} {'PASS' if self.passed else 'FAIL'} {self.worst:.6g}"


# ---------------------------------------------------------------------------
# checks on runs


def level_bounds(report: RunReport) -> tuple[float, float]:
    lo, hi = np.inf, -np.inf
    for lv in report.all_levels():
        lo = min(lo, float(lv.min()))
        hi = max(hi, float(lv.max()))
    return lo, hi


def check_mpp(report: RunReport, m: float, M: float, tol: float = 1e-9, name: str = "mpp") -> CheckResult:
    """Every stored DOF within ``[m - tol, M + tol]``; ``worst`` is the largest excursion."""
    lo, hi = level_bounds(report)
    worst = max(m - lo, hi - M)
    return CheckResult(name, worst <= tol, worst, f"range [{lo:.17g}, {hi:.17g}]")


def _time_weights(report: RunReport) -> np.ndarray:
    bq = report.setup.disc.basis_q
    return np.ones(1) if report.setup.scheme == "be" else 0.5 * bq.weights


def entropy_defects(report: RunReport, entropy: EntropyPair) -> np.ndarray:
    """Scaled per-step maximum over cells of the cell entropy inequality defect.

    ``<eta(u_new)> - <eta(u_old)> + dt/dx sum_r w_r/2 (Q_right - Q_left)``
    with the Godunov entropy flux, divided by ``max(1, ||eta||_inf dt/dx)``.
    """
    disc = report.setup.disc
    basis, grid = disc.basis, disc.grid
    iflux = disc.iflux
    tw = _time_weights(report)
    out = np.zeros(report.n_steps)
    for k, st in enumerate(report.steps):
        lam = st.dt / grid.cell_width
        flux_sum = np.zeros(grid.n_cells)
        for r, U in enumerate(st.levels):
            left, right = exterior_traces(U, grid)
            qr = iflux.entropy_flux(U[:, -1], right, 1.0, entropy)
            ql = iflux.entropy_flux(U[:, 0], left, -1.0, entropy)
            flux_sum += tw[r] * (qr + ql)
        new = cell_averages(entropy.eta(st.u_end), basis)
        old = cell_averages(entropy.eta(st.u_start), basis)
        defect = new - old + lam * flux_sum
        eta_max = max(float(np.max(np.abs(entropy.eta(st.u_end)))), float(np.max(np.abs(entropy.eta(st.u_start)))))
        out[k] = float(np.max(defect)) / max(1.0, eta_max * lam)
    return out


def check_entropy_cells(report: RunReport, entropy: EntropyPair, tol: float = 1e-9, name: Optional[str] = None) -> CheckResult:
    d = entropy_defects(report, entropy)
    worst = float(d.max()) if d.size else 0.0
    return CheckResult(name or f"entropy_{entropy.name}", worst <= tol, worst)


def ec_entropy_defects(report: RunReport) -> np.ndarray:
    """Cell defects of the EC-entropy inequality with the EC interface entropy flux.

    Meaningful for runs without viscosity, where it must be nonpositive.
    """
    disc = report.setup.disc
    basis, grid, ec = disc.basis, disc.grid, disc.ec
    theta = ec.entropy.theta
    tw = _time_weights(report)
    out = np.zeros(report.n_steps)
    for k, st in enumerate(report.steps):
        lam = st.dt / grid.cell_width
        flux_sum = np.zeros(grid.n_cells)
        for r, U in enumerate(st.levels):
            left, right = exterior_traces(U, grid)
            gr = ec_interface_entropy_flux(ec, disc.iflux, U[:, -1], right, 1.0)
            gl = ec_interface_entropy_flux(ec, disc.iflux, U[:, 0], left, -1.0)
            flux_sum += tw[r] * (gr + gl)
        defect = cell_averages(theta(st.u_end), basis) - cell_averages(theta(st.u_start), basis) + lam * flux_sum
        scale = max(1.0, float(np.max(np.abs(theta(st.u_end)))) * lam)
        out[k] = float(np.max(defect)) / scale
    return out


def boundary_flux_integrals(report: RunReport) -> np.ndarray:
    """Per step: ``dt sum_r w_r/2 (h at the right boundary - h at the left boundary)``."""
    disc = report.setup.disc
    grid = disc.grid
    tw = _time_weights(report)
    out = np.zeros(report.n_steps)
    if grid.bc.is_periodic:
        return out
    for k, st in enumerate(report.steps):
        acc = 0.0
        for r, U in enumerate(st.levels):
            out_r = float(disc.iflux.h(U[-1, -1], grid.bc.right, 1.0))
            in_l = -float(disc.iflux.h(U[0, 0], grid.bc.left, -1.0))
            acc += tw[r] * (out_r - in_l)
        out[k] = st.dt * acc
    return out


def mass_drift(report: RunReport) -> np.ndarray:
    """``mass(t_n) - mass(0) + integrated boundary outflow`` after every step."""
    disc = report.setup.disc
    m0 = mass(report.u_initial, disc.grid, disc.basis)
    flux = np.cumsum(boundary_flux_integrals(report))
    ms = np.array([mass(st.u_end, disc.grid, disc.basis) for st in report.steps])
    return ms - m0 + flux


def check_conservation(report: RunReport, tol: Optional[float] = None, name: str = "conservation") -> CheckResult:
    """Periodic runs use ``tol = 1e-10`` by default, Dirichlet runs ``1e-9``."""
    if tol is None:
        tol = 1e-10 if report.setup.disc.grid.bc.is_periodic else 1e-9
    d = mass_drift(report)
    worst = float(np.max(np.abs(d))) if d.size else 0.0
    return CheckResult(name, worst <= tol, worst)


def error_norms(values: np.ndarray, grid: Grid1D, basis: LobattoBasis, reference: Callable, *, n_sub: int = 1,
                gauss_points: int = 6) -> tuple[float, float]:
    """``(L1, Linf)`` distance between the nodal solution and ``reference(x)``.

    ``n_sub = 1`` uses the Gauss-Lobatto nodes as quadrature; larger values
    evaluate the interpolant on ``n_sub`` sub-intervals per cell with a
    Gauss-Legendre rule, which resolves discontinuous references better.
    ``Linf`` is taken over the nodes.
    """
    U = np.asarray(values, dtype=float)
    xn = grid.node_coordinates(basis)
    linf = float(np.max(np.abs(U - reference(xn))))
    if n_sub <= 1:
        l1 = float(np.sum(grid.jacobian * (np.abs(U - reference(xn)) @ basis.weights)))
        return l1, linf
    gx, gw = np.polynomial.legendre.leggauss(gauss_points)
    edges = np.linspace(-1.0, 1.0, n_sub + 1)
    xi = (0.5 * (edges[:-1, None] + edges[1:, None]) + 0.5 * (edges[1:, None] - edges[:-1, None]) * gx[None, :]).ravel()
    wi = np.tile(gw / n_sub, n_sub)
    uh = lagrange_eval(basis, U, xi)
    xq = grid.faces[:-1, None] + grid.jacobian * (xi[None, :] + 1.0)
    l1 = float(np.sum(grid.jacobian * (np.abs(uh - reference(xq)) @ wi)))
    return l1, linf


@dataclass(frozen=True)
class StepDiagnostics:
    step: int
    t: float
    dt: float
    u_min: float
    u_max: float
    mass: float
    solver_iters: int
    entropy_defect_sq: float
    entropy_defect_k0: float


def step_diagnostics(report: RunReport) -> list[StepDiagnostics]:
    disc = report.setup.disc
    flux = disc.flux
    rows = []
    godunov = disc.iflux.kind == "godunov"
    dsq = entropy_defects(report, square_entropy(flux)) if godunov else np.full(report.n_steps, np.nan)
    dk0 = entropy_defects(report, kruzkov_entropy(0.0, flux)) if godunov else np.full(report.n_steps, np.nan)
    rows.append(StepDiagnostics(0, 0.0, 0.0, float(report.u_initial.min()), float(report.u_initial.max()),
                                mass(report.u_initial, disc.grid, disc.basis), 0, 0.0, 0.0))
    for k, st in enumerate(report.steps):
        rows.append(StepDiagnostics(st.step, st.t, st.dt, float(st.levels.min()), float(st.levels.max()),
                                    mass(st.u_end, disc.grid, disc.basis), st.iterations, float(dsq[k]), float(dk0[k])))
    return rows


def run_checks(report: RunReport, label: str, *, kruzkov: Iterable[float] = KRUZKOV_CONSTANTS) -> list[CheckResult]:
    """MPP, cell entropy (square and Kruzkov) and conservation checks for one run."""
    pr = report.setup.problem
    out = [check_mpp(report, *pr.bounds, name=f"mpp_{label}")]
    if report.setup.disc.iflux.kind == "godunov":
        out.append(check_entropy_cells(report, square_entropy(pr.flux), name=f"entropy_square_{label}"))
        for K in kruzkov:
            out.append(check_entropy_cells(report, kruzkov_entropy(K, pr.flux), name=f"entropy_kruzkov{K:+g}_{label}"))
    out.append(check_conservation(report, name=f"conservation_{label}"))
    return out


# ---------------------------------------------------------------------------
# property sweeps


def sweep_fluxes() -> list[Flux]:
    return [burgers(), buckley_leverett(0.5), buckley_leverett(0.25)]


def check_sbp(degrees: Iterable[int] = range(1, 7), tol: float = 1e-13, deriv_hook: Optional[Callable] = None) -> CheckResult:
    """SBP identity and row/column sums of ``Q`` for every degree.

    ``deriv_hook`` may replace ``D`` before the check (fault injection).
    """
    worst = 0.0
    for p in degrees:
        b = build_basis(p)
        D = np.array(b.deriv)
        if deriv_hook is not None:
            D = deriv_hook(D)
        Q = b.weights[:, None] * D
        B = np.zeros_like(Q)
        B[0, 0], B[-1, -1] = -1.0, 1.0
        col = np.zeros(p + 1)
        col[0], col[-1] = -1.0, 1.0
        worst = max(worst, np.max(np.abs(Q + Q.T - B)), np.max(np.abs(Q.sum(axis=1))), np.max(np.abs(Q.sum(axis=0) - col)))
    return CheckResult("sbp", worst <= tol, float(worst))


def _pairs(n: int, lo: float, hi: float, seed: int):
    rng = np.random.default_rng(seed)
    return rng, rng.uniform(lo, hi, n), rng.uniform(lo, hi, n)


def check_ec_identities(n: int = 10_000, seed: int = 0, lo: float = -5.0, hi: float = 5.0, tol: float = 1e-11) -> CheckResult:
    """Space and time EC identities for the square entropy and all sweep fluxes."""
    worst = 0.0
    for k, flux in enumerate(sweep_fluxes()):
        _, a, b = _pairs(n, lo, hi, seed + k)
        ec = EcFlux(flux)
        for sgn in (1.0, -1.0):
            lhs = (b - a) * ec.h_ec(a, b, sgn)
            rhs = (ec.psi(b) - ec.psi(a)) * sgn
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        lt = (b - a) * ec.u_ec(a, b)
        rt = ec.psi_t(b) - ec.psi_t(a)
        worst = max(worst, float(np.max(np.abs(lt - rt))))
    return CheckResult("ec_identity", worst <= tol, worst)


def _entropies(flux: Flux) -> list[EntropyPair]:
    return [square_entropy(flux)] + [kruzkov_entropy(K, flux) for K in KRUZKOV_CONSTANTS]


def _local_alpha(flux: Flux, a, b, rng, spread: float = 2.0):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    L = np.array([lipschitz_constant(flux, x, y, inflate=1.0) for x, y in zip(lo, hi)])
    # include alpha equal to the bound itself
    factor = 1.0 + spread * rng.uniform(0.0, 1.0, a.size) * (rng.uniform(size=a.size) > 0.1)
    return np.maximum(L, 1e-3) * factor


def check_ec_fan_average(n: int = 10_000, seed: int = 1, lo: float = -5.0, hi: float = 5.0, tol: float = 1e-10) -> CheckResult:
    """Bounds and entropy inequality of the Riemann-fan average built on ``h_ec``."""
    worst = -np.inf
    for k, flux in enumerate(sweep_fluxes()):
        rng, a, b = _pairs(n, lo, hi, seed + 10 * k)
        nrm = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
        alpha = _local_alpha(flux, a, b, rng)
        ec = EcFlux(flux)
        U = ec.fan_average_U(a, b, nrm, alpha, check=False)
        worst = max(worst, float(np.max(np.minimum(a, b) - U)), float(np.max(U - np.maximum(a, b))))
        for ent in _entropies(flux):
            rhs = 0.5 * (ent.eta(a) + ec.eta_bar(a, b, ent)) - (ec.q_ec(a, b, nrm, ent) - ent.qflux(a) * nrm) / (2.0 * alpha)
            worst = max(worst, float(np.max(ent.eta(U) - rhs)))
    return CheckResult("lemma21", worst <= tol, worst)


def check_entropy_mean_bound(n: int = 10_000, seed: int = 2, lo: float = -5.0, hi: float = 5.0, tol: float = 1e-10) -> CheckResult:
    """``eta_bar(a, b) - eta(a) <= 2 beta (eta(b) - eta(a))`` and ``beta`` in (0, 1/2]."""
    worst = -np.inf
    for k, flux in enumerate(sweep_fluxes()):
        _, a, b = _pairs(n, lo, hi, seed + 10 * k)
        ec = EcFlux(flux)
        beta = ec.beta(a, b)
        worst = max(worst, float(np.max(beta - 0.5)), float(np.max(-beta)))
        for ent in _entropies(flux):
            worst = max(worst, float(np.max(ec.eta_bar(a, b, ent) - ent.eta(a) - 2.0 * beta * (ent.eta(b) - ent.eta(a)))))
    return CheckResult("lemma22", worst <= tol, worst)


def check_lax_average(n: int = 10_000, seed: int = 3, lo: float = -5.0, hi: float = 5.0, tol: float = 1e-10) -> CheckResult:
    """Bounds and entropy inequality of the exact Riemann-fan average ``W``."""
    worst = -np.inf
    for k, flux in enumerate(sweep_fluxes()):
        rng, a, b = _pairs(n, lo, hi, seed + 10 * k)
        nrm = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
        alpha = _local_alpha(flux, a, b, rng)
        W = lax_average_W(flux, a, b, nrm, alpha, check=False)
        worst = max(worst, float(np.max(np.minimum(a, b) - W)), float(np.max(W - np.maximum(a, b))))
        for ent in _entropies(flux):
            rhs = 0.5 * (ent.eta(a) + ent.eta(b)) - (ent.qflux(b) - ent.qflux(a)) * nrm / (2.0 * alpha)
            worst = max(worst, float(np.max(ent.eta(W) - rhs)))
    return CheckResult("lax_average", worst <= tol, worst)


def check_three_point(n: int = 10_000, seed: int = 4, lo: float = -5.0, hi: float = 5.0, tol: float = 1e-10,
                      kinds: Iterable[str] = ("godunov", "rusanov")) -> list[CheckResult]:
    """Bound preservation (all kinds) and entropy stability (Godunov) of the three-point scheme."""
    kinds = tuple(kinds)
    worst_b = {k: -np.inf for k in kinds}
    worst_e = -np.inf
    for j, flux in enumerate(sweep_fluxes()):
        rng = np.random.default_rng(seed + 10 * j)
        a, u, b = rng.uniform(lo, hi, (3, n))
        nrm = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
        m = np.minimum(np.minimum(a, u), b)
        M = np.maximum(np.maximum(a, u), b)
        L = np.array([lipschitz_constant(flux, x, y) for x, y in zip(m, M)])
        alpha = L * (1.0 + 2.0 * rng.uniform(size=n) * (rng.uniform(size=n) > 0.1))
        for kind in kinds:
            ifl = InterfaceFlux(kind, flux, (lo, hi))
            w = u - (ifl.h(u, b, nrm) - ifl.h(a, u, nrm)) / (2.0 * alpha)
            worst_b[kind] = max(worst_b[kind], float(np.max(m - w)), float(np.max(w - M)))
            if kind == "godunov":
                for ent in _entropies(flux):
                    rhs = ent.eta(u) - (ifl.entropy_flux(u, b, nrm, ent) - ifl.entropy_flux(a, u, nrm, ent)) / (2.0 * alpha)
                    worst_e = max(worst_e, float(np.max(ent.eta(w) - rhs)))
    results = []
    for kind in kinds:
        results.append(CheckResult(f"three_point_mpp_{kind}", worst_b[kind] <= tol, worst_b[kind]))
        if kind == "godunov":
            results.append(CheckResult("three_point_entropy_godunov", worst_e <= tol, worst_e))
    return results
