"""Reference solutions: characteristics, Riemann fans and a fine finite-volume march."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .physics import Flux, Problem, lipschitz_constant, make_problem

GOLDEN_VERSION = "v1"
GOLDEN_CELLS = 100_000
GOLDEN_BINS = 10_000
FV_CFL = 0.45


@dataclass(frozen=True)
class ReferenceSolution:
    kind: str  # characteristics | steady_shock | riemann_selfsim | fv_oracle
    evaluator: Callable

    def __call__(self, x, t=None):
        return self.evaluator(x, t)


# ---------------------------------------------------------------------------
# Burgers characteristics


def burgers_characteristics(u0: Callable, x, t: float, *, period: float = 1.0, shock: Optional[float] = None,
                            samples: int = 4001):
    """Solution of Burgers' equation from ``x = xi + t u0(xi)``.

    ``u0`` is ``period``-periodic. Before shock formation the root is unique.
    With a stationary shock at ``shock`` the root is the smallest one for
    points left of the shock and the largest one for points right of it.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return u0(x)
    grid = np.linspace(0.0, period, samples)
    umax = float(np.max(np.abs(u0(grid))))
    out = np.empty_like(x)
    for j, xj in enumerate(x):
        lo, hi = xj - t * umax - 1e-9, xj + t * umax + 1e-9
        xi = np.linspace(lo, hi, samples)
        g = xi + t * u0(xi) - xj
        roots = []
        for k in np.nonzero(g[:-1] * g[1:] <= 0.0)[0]:
            if g[k] == 0.0:
                roots.append(xi[k])
            elif g[k + 1] != 0.0:
                roots.append(brentq(lambda s: s + t * float(u0(np.array(s))) - xj, xi[k], xi[k + 1], xtol=1e-15))
        if not roots:
            raise ValueError(f"no characteristic root bracketed at x={xj}")
        if shock is None or len(roots) == 1:
            r = roots[0]
        else:
            r = min(roots) if (xj - shock) % period > period / 2 else max(roots)
        out[j] = u0(np.array(r))
    return out


def problem1_exact(x, t: float):
    """Problem 1: periodic sine data, stationary shock at 1/2 after ``t = 1/(2 pi)``."""
    u0 = make_problem(1).u0
    shock = 0.5 if t > 1.0 / (2.0 * np.pi) else None
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = burgers_characteristics(u0, x, t, shock=shock)
    if shock is not None:
        # the shock location itself is assigned the average state
        out[np.abs(x - shock) < 1e-14] = 0.0
    return out


def steady_shock(x, t=None):
    """Problem 2 steady state: 1 left of 1/2, -1 right of it."""
    x = np.asarray(x, dtype=float)
    return np.where(x < 0.5, 1.0, np.where(x > 0.5, -1.0, 0.0))


# ---------------------------------------------------------------------------
# Riemann problems


@dataclass(frozen=True, eq=False)
class RiemannFan:
    """Self-similar entropy solution via the convex (or concave) envelope of ``f``."""

    flux: Flux
    ul: float
    ur: float
    samples: int = 20001

    def __post_init__(self):
        lo, hi = min(self.ul, self.ur), max(self.ul, self.ur)
        us = np.unique(np.concatenate([np.linspace(lo, hi, self.samples), self.flux.critical_points(lo, hi)]))
        fs = self.flux.f(us)
        # increasing data take the lower hull, decreasing data the upper hull
        sign = 1.0 if self.ul <= self.ur else -1.0
        hull = _lower_hull(us, sign * fs)
        object.__setattr__(self, "_u", us)
        object.__setattr__(self, "_hull", hull)
        object.__setattr__(self, "_sign", sign)

    def __call__(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if self.ul == self.ur:
            return np.full(xi.shape, float(self.ul))
        us, hull, sign = self._u, self._hull, self._sign
        hu = us[hull]
        hf = sign * self.flux.f(hu)
        slopes = np.diff(hf) / np.diff(hu)  # nondecreasing along the hull
        adjacent = np.diff(hull) == 1
        out = np.empty_like(xi)
        for j, s in enumerate(xi):
            # Osher: minimize sign*f(u) - sign*s*u over the interval
            k = int(np.searchsorted(slopes, sign * s))
            if 0 < k < slopes.size and adjacent[k - 1] and adjacent[k]:
                out[j] = self._rarefaction(sign * s, hu[k - 1], hu[k + 1], sign)
            else:
                out[j] = hu[k]
        return out

    def _rarefaction(self, s, a, b, sign):
        g = lambda u: sign * float(self.flux.df(np.array(u))) - s  # noqa: E731
        ga, gb = g(a), g(b)
        if ga * gb > 0:
            return a if abs(ga) < abs(gb) else b
        return brentq(g, a, b, xtol=1e-14)


def _lower_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    hull: list[int] = []
    for k in range(x.size):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (x[j] - x[i]) * (y[k] - y[i]) - (y[j] - y[i]) * (x[k] - x[i])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    return np.array(hull)


def riemann_selfsim(flux: Flux, ul: float, ur: float, xi):
    """Entropy solution of the Riemann problem at ``x / t = xi``."""
    return RiemannFan(flux, float(ul), float(ur))(xi)


# ---------------------------------------------------------------------------
# first-order Godunov finite-volume oracle


class _FastGodunov:
    """Minimax Godunov flux (``n = +1``) with precomputed critical values."""

    def __init__(self, flux: Flux, lo: float, hi: float):
        self.f = flux.f
        self.crit = flux.critical_points(lo, hi)
        self.fcrit = flux.f(self.crit)

    def __call__(self, a, b, fa, fb):
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        mn = np.minimum(fa, fb)
        mx = np.maximum(fa, fb)
        for c, fc in zip(self.crit, self.fcrit):
            inside = (lo <= c) & (c <= hi)
            mn = np.where(inside, np.minimum(mn, fc), mn)
            mx = np.where(inside, np.maximum(mx, fc), mx)
        return np.where(a <= b, mn, mx)


def fv_oracle(problem: Problem, n_cells: int, t: float, *, cfl: float = FV_CFL, check_bounds: bool = True):
    """March first-order Godunov to time ``t``; returns cell centers and averages.

    The scheme is monotone, so every step must stay within the problem
    bounds; this is asserted when ``check_bounds`` is set.
    """
    if n_cells < 2:
        raise ValueError("n_cells must be >= 2")
    lo, hi = problem.bounds
    dx = (problem.x_right - problem.x_left) / n_cells
    xc = problem.x_left + dx * (np.arange(n_cells) + 0.5)
    # exact cell averages of the initial data by 8-point Gauss-Legendre per cell
    gx, gw = np.polynomial.legendre.leggauss(8)
    u = (problem.u0(xc[:, None] + 0.5 * dx * gx[None, :]) @ gw) * 0.5
    lip = lipschitz_constant(problem.flux, lo, hi, inflate=1.0)
    dt_max = cfl * dx / lip
    flux = _FastGodunov(problem.flux, lo, hi)
    f = problem.flux.f
    periodic = problem.bc.is_periodic
    time = 0.0
    eps = 1e-12 * max(t, 1.0)
    while time < t - eps:
        dt = min(dt_max, t - time)
        if periodic:
            ext = np.concatenate(([u[-1]], u, [u[0]]))
        else:
            ext = np.concatenate(([problem.bc.left], u, [problem.bc.right]))
        fe = f(ext)
        h = flux(ext[:-1], ext[1:], fe[:-1], fe[1:])
        u = u - dt / dx * (h[1:] - h[:-1])
        time += dt
        if check_bounds and (u.min() < lo - 1e-12 or u.max() > hi + 1e-12):
            raise AssertionError(f"finite-volume oracle left [{lo}, {hi}] at t={time}")
    return xc, u


def bin_average(x: np.ndarray, u: np.ndarray, n_bins: int):
    k = x.size // n_bins
    if k * n_bins != x.size:
        raise ValueError("bin count must divide the number of cells")
    return x.reshape(n_bins, k).mean(axis=1), u.reshape(n_bins, k).mean(axis=1)


# ---------------------------------------------------------------------------
# golden profiles


def oracle_time(problem: Problem) -> float:
    """Final time used for the oracle; the steady problem marches to t = 1."""
    return 1.0 if problem.final_time is None else problem.final_time


def golden_dir(version: str = GOLDEN_VERSION) -> Path:
    return Path(str(resources.files("idgsem") / "reference_data" / version))


def write_golden(path: Path, x: np.ndarray, u: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "u"])
        for xi, ui in zip(x, u):
            w.writerow([f"{xi:.17g}", f"{ui:.17g}"])


def read_golden(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return data[:, 0], data[:, 1]


def generate_goldens(out_dir: Optional[Path] = None, *, problems=(1, 2, 3, 4, 5), n_cells: int = GOLDEN_CELLS,
                     n_bins: int = GOLDEN_BINS, log: Callable[[str], None] = lambda s: None) -> Path:
    out_dir = Path(out_dir) if out_dir is not None else golden_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"version": out_dir.name, "n_cells": n_cells, "n_bins": n_bins, "cfl": FV_CFL, "problems": {}}
    man_path = out_dir / "manifest.json"
    if man_path.exists():
        manifest["problems"] = json.loads(man_path.read_text()).get("problems", {})
    for pid in problems:
        pr = make_problem(pid)
        t = oracle_time(pr)
        log(f"problem {pid}: {n_cells} cells to t={t:g}")
        x, u = fv_oracle(pr, n_cells, t)
        xb, ub = bin_average(x, u, n_bins)
        name = f"problem{pid}.csv"
        write_golden(out_dir / name, xb, ub)
        manifest["problems"][str(pid)] = {"file": name, "t": t}
        man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out_dir


def golden_reference(pid: int, version: str = GOLDEN_VERSION) -> ReferenceSolution:
    """Piecewise-linear interpolant of the stored bin averages."""
    x, u = read_golden(golden_dir(version) / f"problem{pid}.csv")

    def ev(xq, t=None):
        return np.interp(np.asarray(xq, dtype=float), x, u)

    return ReferenceSolution("fv_oracle", ev)


def exact_reference(pid: int) -> ReferenceSolution:
    """Analytic references where available (problems 1, 2, 4, 5)."""
    pr = make_problem(pid)
    if pid == 1:
        return ReferenceSolution("characteristics", lambda x, t=None: problem1_exact(x, pr.final_time if t is None else t))
    if pid == 2:
        return ReferenceSolution("steady_shock", steady_shock)
    if pid in (4, 5):
        ul, ur = float(pr.u0(np.array(0.0))), float(pr.u0(np.array(1.0)))
        fan = RiemannFan(pr.flux, ul, ur)

        def ev(x, t=None):
            t = pr.final_time if t is None else t
            return fan((np.asarray(x, dtype=float) - 0.5) / t)

        return ReferenceSolution("riemann_selfsim", ev)
    raise ValueError(f"no analytic reference for problem {pid}")
