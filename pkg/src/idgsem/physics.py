"""Flux functions, entropy pairs and the five test problems."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

ArrayFn = Callable[[np.ndarray], np.ndarray]

LIPSCHITZ_SAMPLES = 4097
LIPSCHITZ_INFLATION = 1.01


@dataclass(frozen=True, eq=False)
class Flux:
    """Scalar flux ``f`` with derivative and, when known, an antiderivative.

    ``kind`` selects closed forms in the two-point fluxes: ``"burgers"`` and
    ``"linear"`` have polynomial EC fluxes, anything else goes through
    quadrature.
    """

    name: str
    f: ArrayFn
    df: ArrayFn
    antideriv: Optional[ArrayFn] = None
    kind: str = "generic"
    speed: float = 1.0  # only meaningful for kind == "linear"

    def __call__(self, u):
        return self.f(np.asarray(u, dtype=float))

    def critical_points(self, lo: float, hi: float) -> np.ndarray:
        """Zeros of ``f'`` inside ``[lo, hi]`` (dense sampling + Brent polish)."""
        return _critical_points(self, float(lo), float(hi))


@lru_cache(maxsize=256)
def _critical_points(flux: Flux, lo: float, hi: float) -> np.ndarray:
    if flux.kind == "linear" or hi <= lo:
        return np.empty(0)
    xs = np.linspace(lo, hi, LIPSCHITZ_SAMPLES)
    ds = flux.df(xs)
    roots = []
    for k in range(xs.size - 1):
        if ds[k] == 0.0:
            roots.append(xs[k])
        elif ds[k] * ds[k + 1] < 0.0:
            roots.append(brentq(lambda t: float(flux.df(np.array(t))), xs[k], xs[k + 1], xtol=1e-15, rtol=1e-15))
    if ds[-1] == 0.0:
        roots.append(xs[-1])
    out = np.unique(np.array(roots, dtype=float))
    out.setflags(write=False)
    return out


def burgers() -> Flux:
    return Flux(
        "burgers",
        f=lambda u: 0.5 * u * u,
        df=lambda u: u,
        antideriv=lambda u: u**3 / 6.0,
        kind="burgers",
    )


def linear_flux(a: float = 1.0) -> Flux:
    return Flux(
        f"linear({a:g})",
        f=lambda u: a * u,
        df=lambda u: a * np.ones_like(u),
        antideriv=lambda u: 0.5 * a * u * u,
        kind="linear",
        speed=a,
    )


def buckley_leverett(c: float) -> Flux:
    """``f(u) = u^2 / (u^2 + c (1 - u)^2)``."""

    def f(u):
        return u * u / (u * u + c * (1.0 - u) ** 2)

    def df(u):
        den = u * u + c * (1.0 - u) ** 2
        return 2.0 * c * u * (1.0 - u) / den**2

    # f = 1/s + (2cu - c) / (s D) with D = s (u - a0)^2 + c / s
    s = 1.0 + c
    a0 = c / s
    rc = np.sqrt(c)

    def F(u):
        den = u * u + c * (1.0 - u) ** 2
        return u / s + (c / s**2) * np.log(den) + (c * (c - 1.0) / (s**2 * rc)) * np.arctan(s * (u - a0) / rc)

    return Flux(f"buckley_leverett({c:g})", f=f, df=df, antideriv=F, kind="generic")


@dataclass(frozen=True, eq=False)
class EntropyPair:
    """Convex entropy ``eta`` and entropy flux ``q`` with ``q' = eta' f'``."""

    eta: ArrayFn
    eta_deriv: ArrayFn
    qflux: ArrayFn
    kind: str = "custom"
    #: location of a kink of ``eta`` (Kruzkov constant), if any
    kink: Optional[float] = None

    @property
    def name(self) -> str:
        if self.kind == "kruzkov":
            return f"kruzkov({self.kink:g})"
        return self.kind


def square_entropy(flux: Flux) -> EntropyPair:
    """``eta = u^2/2`` with ``q = u f(u) - F(u)``, ``F' = f``."""
    if flux.antideriv is not None:
        F = flux.antideriv

        def q(u):
            u = np.asarray(u, dtype=float)
            return u * flux.f(u) - (F(u) - F(np.zeros_like(u)))

    else:
        q = _quadrature_entropy_flux(flux, lambda w: w)
    return EntropyPair(
        eta=lambda u: 0.5 * np.asarray(u, dtype=float) ** 2,
        eta_deriv=lambda u: np.asarray(u, dtype=float),
        qflux=q,
        kind="square",
    )


def kruzkov_entropy(K: float, flux: Flux) -> EntropyPair:
    """``eta = |u - K|``, ``q = sgn(u - K) (f(u) - f(K))``; ``eta'(K) := 0``."""
    fK = float(flux.f(np.array(K, dtype=float)))
    return EntropyPair(
        eta=lambda u: np.abs(np.asarray(u, dtype=float) - K),
        eta_deriv=lambda u: np.sign(np.asarray(u, dtype=float) - K),
        qflux=lambda u: np.sign(np.asarray(u, dtype=float) - K) * (flux.f(np.asarray(u, dtype=float)) - fK),
        kind="kruzkov",
        kink=float(K),
    )


def _quadrature_entropy_flux(flux: Flux, eta_deriv: ArrayFn, n: int = 64) -> ArrayFn:
    x, w = np.polynomial.legendre.leggauss(n)

    def q(u):
        u = np.asarray(u, dtype=float)
        s = 0.5 * (x + 1.0)
        pts = u[..., None] * s
        vals = eta_deriv(pts) * flux.df(pts)
        return 0.5 * u * (vals @ w)

    return q


def lipschitz_constant(flux: Flux, lo: float, hi: float, *, inflate: float = LIPSCHITZ_INFLATION) -> float:
    """Upper bound of ``|f'|`` on ``[lo, hi]`` from dense sampling, inflated."""
    if hi < lo:
        raise ValueError("lipschitz_constant requires lo <= hi")
    xs = np.linspace(lo, hi, LIPSCHITZ_SAMPLES)
    return float(np.max(np.abs(flux.df(xs)))) * inflate


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str  # "periodic" | "dirichlet"
    left: float = 0.0
    right: float = 0.0

    @classmethod
    def periodic(cls) -> "BoundaryCondition":
        return cls("periodic")

    @classmethod
    def dirichlet(cls, left: float, right: float) -> "BoundaryCondition":
        return cls("dirichlet", float(left), float(right))

    @property
    def is_periodic(self) -> bool:
        return self.kind == "periodic"


@dataclass(frozen=True, eq=False)
class Problem:
    """One row of the test-problem table, with its numerical parameters."""

    ident: int
    name: str
    flux: Flux
    u0: ArrayFn
    bc: BoundaryCondition
    bounds: tuple[float, float]
    final_time: Optional[float]  # None for a steady problem
    p: int = 3
    q: int = 3  # 0 selects the backward-Euler scheme
    n_cells: int = 40
    cfl: float = 1.0
    x_left: float = 0.0
    x_right: float = 1.0
    extras: dict = field(default_factory=dict)

    @property
    def steady(self) -> bool:
        return self.final_time is None


def _indicator_lt(a):
    return lambda x: (np.asarray(x, dtype=float) < a).astype(float)


def make_problem(ident: int) -> Problem:
    if ident == 1:
        return Problem(
            1, "burgers_sine", burgers(),
            lambda x: np.sin(2.0 * np.pi * np.asarray(x, dtype=float)),
            BoundaryCondition.periodic(), (-1.0, 1.0), 0.4,
        )
    if ident == 2:
        return Problem(
            2, "burgers_steady_shock", burgers(),
            lambda x: 1.0 - 2.0 * np.asarray(x, dtype=float),
            BoundaryCondition.dirichlet(1.0, -1.0), (-1.0, 1.0), None,
            q=0, cfl=1e3,
        )
    if ident == 3:
        return Problem(
            3, "burgers_shifted_sine", burgers(),
            lambda x: 1.0 + np.sin(2.0 * np.pi * np.asarray(x, dtype=float)),
            BoundaryCondition.periodic(), (0.0, 2.0), 3.0 / (4.0 * np.pi),
        )
    if ident == 4:
        return Problem(
            4, "buckley_leverett_half", buckley_leverett(0.5),
            _indicator_lt(0.5),
            BoundaryCondition.dirichlet(1.0, 0.0), (0.0, 1.0), 0.2,
        )
    if ident == 5:
        def u0(x):
            x = np.asarray(x, dtype=float)
            return 3.0 * ((x > 0.5).astype(float) - (x < 0.5).astype(float))

        return Problem(
            5, "buckley_leverett_quarter", buckley_leverett(0.25), u0,
            BoundaryCondition.dirichlet(-3.0, 3.0), (-3.0, 3.0), 1.0,
        )
    raise ValueError(f"unknown problem id {ident!r}; expected 1..5")
