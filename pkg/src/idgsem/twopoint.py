"""Two-point fluxes: entropy-conservative volume/time fluxes and interface fluxes.

All functions are vectorized over their state arguments. The normal ``n`` is
``+1`` or ``-1`` (scalar or array).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .physics import EntropyPair, Flux, lipschitz_constant

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


@dataclass(frozen=True, eq=False)
class ConvexEntropy:
    """Strictly convex entropy ``theta`` that defines the EC fluxes.

    ``v = theta'`` is the entropy variable and ``u_of_v`` its inverse.
    """

    name: str
    theta: Callable
    v: Callable
    dv: Callable
    u_of_v: Callable

    @property
    def is_square(self) -> bool:
        return self.name == "square"


SQUARE = ConvexEntropy(
    "square",
    theta=lambda u: 0.5 * u * u,
    v=lambda u: u,
    dv=lambda u: np.ones_like(u),
    u_of_v=lambda v: v,
)

EXPONENTIAL = ConvexEntropy(
    "exponential",
    theta=np.exp,
    v=np.exp,
    dv=np.exp,
    u_of_v=np.log,
)


def entropy_lipschitz_ratio(entropy: ConvexEntropy, lo: float, hi: float, n: int = 401) -> float:
    """Sampled ``sup theta''(b) (b - a) / (v(b) - v(a))`` over ``lo <= a != b <= hi``."""
    if entropy.is_square:
        return 1.0
    xs = np.linspace(lo, hi, n)
    a, b = np.meshgrid(xs, xs, indexing="ij")
    mask = a != b
    vb, va = entropy.v(b[mask]), entropy.v(a[mask])
    ratio = entropy.dv(b[mask]) * (b[mask] - a[mask]) / (vb - va)
    return float(max(1.0, ratio.max()))


@dataclass(frozen=True, eq=False)
class EcFlux:
    """Entropy-conservative two-point fluxes for one convex entropy.

    For the square entropy the space flux is the average of ``f`` along the
    segment ``[a, b]``; Burgers and linear fluxes use closed forms, other
    fluxes a composite Gauss-Legendre rule.
    """

    flux: Flux
    entropy: ConvexEntropy = SQUARE
    quadrature_points: int = 32
    #: maximum sub-interval length (in entropy variables) for composite rules
    panel_width: float = 1.0

    # -- helpers ---------------------------------------------------------
    def _panels(self, width: np.ndarray) -> int:
        w = float(np.max(np.abs(width))) if np.size(width) else 0.0
        return max(1, int(np.ceil(w / self.panel_width)))

    def _theta_rule(self, width: np.ndarray, n: Optional[int] = None):
        n = n or self.quadrature_points
        x, w = gauss_legendre_unit(n)
        m = self._panels(width)
        if m == 1:
            return x, w
        xs = ((np.arange(m)[:, None] + x[None, :]) / m).ravel()
        ws = np.tile(w / m, m)
        return xs, ws

    def _path(self, a, b, theta):
        """States ``u(theta v(b) + (1 - theta) v(a))`` with trailing theta axis."""
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        if self.entropy.is_square:
            return a + theta * (b - a)
        va, vb = self.entropy.v(a), self.entropy.v(b)
        return self.entropy.u_of_v(va + theta * (vb - va))

    def _vwidth(self, a, b):
        return self.entropy.v(np.asarray(b, dtype=float)) - self.entropy.v(np.asarray(a, dtype=float))

    # -- space flux -------------------------------------------------------
    def h_ec(self, a, b, n=1.0):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.entropy.is_square:
            if self.flux.kind == "burgers":
                return (a * a + a * b + b * b) / 6.0 * n
            if self.flux.kind == "linear":
                return self.flux.speed * 0.5 * (a + b) * n
        th, w = self._theta_rule(self._vwidth(a, b))
        return (self.flux.f(self._path(a, b, th)) @ w) * n

    def dh_ec_da(self, a, b, n=1.0):
        """Derivative of ``h_ec`` with respect to its first argument."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.entropy.is_square:
            if self.flux.kind == "burgers":
                return (2.0 * a + b) / 6.0 * n
            if self.flux.kind == "linear":
                return 0.5 * self.flux.speed * np.ones(np.broadcast(a, b).shape) * n
            th, w = self._theta_rule(b - a)
            return (self.flux.df(self._path(a, b, th)) * (1.0 - th)) @ w * n
        th, w = self._theta_rule(self._vwidth(a, b))
        path = self._path(a, b, th)
        # du/dv = 1 / theta''(u)
        dudv = 1.0 / self.entropy.dv(path)
        return (self.flux.df(path) * dudv * (1.0 - th)) @ w * self.entropy.dv(a) * n

    # -- time flux --------------------------------------------------------
    def u_ec(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.entropy.is_square:
            return 0.5 * (a + b)
        th, w = self._theta_rule(self._vwidth(a, b))
        return self._path(a, b, th) @ w

    def du_ec_da(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.entropy.is_square:
            return 0.5 * np.ones(np.broadcast(a, b).shape)
        th, w = self._theta_rule(self._vwidth(a, b))
        path = self._path(a, b, th)
        return (1.0 / self.entropy.dv(path) * (1.0 - th)) @ w * self.entropy.dv(a)

    def beta(self, a, b):
        """``beta(a, b)`` in (0, 1/2]; identically 1/4 for the square entropy."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        shape = np.broadcast(a, b).shape
        if self.entropy.is_square:
            return np.full(shape, 0.25)
        a, b = np.broadcast_to(a, shape), np.broadcast_to(b, shape)
        out = np.full(shape, 0.25)
        close = np.abs(b - a) <= 1e-7 * (1.0 + np.abs(a))
        if np.any(~close):
            aa, bb = a[~close], b[~close]
            out[~close] = (self.u_ec(aa, bb) - aa) / (2.0 * (bb - aa))
        return out

    # -- entropy potentials -------------------------------------------------
    def psi(self, u):
        """Space entropy-flux potential ``v f - g``; for the square entropy, ``F``."""
        u = np.asarray(u, dtype=float)
        if self.entropy.is_square and self.flux.antideriv is not None:
            return self.flux.antideriv(u) - self.flux.antideriv(np.zeros_like(u))
        # d psi / dv = f(u(v)); anchored so that psi(0) = v(0) f(0)
        ref = np.zeros_like(u)
        th, w = self._theta_rule(self._vwidth(ref, u), n=64)
        vals = self.flux.f(self._path(ref, u, th)) @ w
        return vals * self._vwidth(ref, u) + self.entropy.v(ref) * self.flux.f(ref)

    def psi_t(self, u):
        u = np.asarray(u, dtype=float)
        return self.entropy.v(u) * u - self.entropy.theta(u)

    # -- Riemann-fan averages -------------------------------------------------
    def fan_average_U(self, a, b, n, alpha, *, check: bool = True):
        """``(1 - beta) a + beta b - (h_ec(a, b, n) - f(a) n) / (2 alpha |n|)``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if check:
            _check_alpha(self.flux, a, b, alpha)
        beta = self.beta(a, b)
        return (1.0 - beta) * a + beta * b - (self.h_ec(a, b, n) - self.flux.f(a) * n) / (2.0 * alpha * np.abs(n))

    def eta_bar(self, a, b, entropy: EntropyPair):
        return self._entropy_average(a, b, entropy, entropy.eta)

    def q_ec(self, a, b, n, entropy: EntropyPair):
        return self._entropy_average(a, b, entropy, entropy.qflux) * n

    def _entropy_average(self, a, b, entropy: EntropyPair, fn):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        a, b = np.broadcast_arrays(a, b)
        th, w = gauss_legendre_unit(64)
        if entropy.kink is None:
            return fn(self._path(a, b, th)) @ w
        # split the theta-integral at the kink so each piece is smooth
        va, vb = self.entropy.v(a), self.entropy.v(b)
        vk = self.entropy.v(np.array(entropy.kink))
        with np.errstate(divide="ignore", invalid="ignore"):
            tk = np.where(vb != va, (vk - va) / (vb - va), 0.0)
        tk = np.clip(tk, 0.0, 1.0)[..., None]
        lo = th * tk
        hi = tk + th * (1.0 - tk)
        part_lo = fn(self._path(a, b, lo)) @ w * tk[..., 0]
        part_hi = fn(self._path(a, b, hi)) @ w * (1.0 - tk[..., 0])
        return part_lo + part_hi


def _check_alpha(flux: Flux, a, b, alpha):
    lo = float(np.min(np.minimum(a, b)))
    hi = float(np.max(np.maximum(a, b)))
    # inflation of the sampled bound is not required here, only its value
    need = lipschitz_constant(flux, lo, hi, inflate=1.0)
    if np.any(np.asarray(alpha) < need * (1.0 - 1e-12)):
        raise ValueError(f"alpha={np.min(alpha):g} is below the Lipschitz bound {need:g}")


def lax_average_W(flux: Flux, a, b, n, alpha, *, check: bool = True):
    """``(a + b)/2 - (f(b) - f(a)) n / (2 alpha)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if check:
        _check_alpha(flux, a, b, alpha)
    return 0.5 * (a + b) - (flux.f(b) - flux.f(a)) * n / (2.0 * alpha)


# ---------------------------------------------------------------------------
# interface fluxes


@dataclass(frozen=True, eq=False)
class InterfaceFlux:
    """Monotone interface flux: ``"godunov"`` or ``"rusanov"``.

    ``bounds`` is the state range the flux is used on; Godunov caches the
    critical points of ``f`` over it.
    """

    kind: str
    flux: Flux
    bounds: tuple[float, float] = (-10.0, 10.0)

    def __post_init__(self):
        if self.kind not in ("godunov", "rusanov"):
            raise ValueError(f"unknown interface flux {self.kind!r}")

    @property
    def crit(self) -> np.ndarray:
        return self.flux.critical_points(*self.bounds)

    # candidates ordered by closeness to the first argument
    def _godunov_state(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        crit = self.crit
        increasing = a <= b
        # crit sorted ascending; reversed when searching downward from a
        cands = [a]
        for c in crit:
            cands.append(np.full(a.shape, c))
        cands.append(b)
        C = np.stack(cands, axis=-1)
        if crit.size:
            inner = C[..., 1:-1]
            C[..., 1:-1] = np.where(increasing[..., None], inner, inner[..., ::-1])
        valid = (C >= lo[..., None]) & (C <= hi[..., None])
        fv = self.flux.f(C)
        # a <= b: min over [a, b]; a > b: max over [b, a]
        key = np.where(increasing[..., None], fv, -fv)
        key = np.where(valid, key, np.inf)
        idx = np.argmin(key, axis=-1)
        # equal states: the flux is locally f(a) or f(b) depending on the wind
        idx = np.where((a == b) & (self.flux.df(a) < 0.0), C.shape[-1] - 1, idx)
        ustar = np.take_along_axis(C, idx[..., None], axis=-1)[..., 0]
        return ustar, idx, C.shape[-1]

    def _godunov_pos(self, a, b):
        ustar, _, _ = self._godunov_state(a, b)
        return self.flux.f(ustar)

    def _rusanov_lambda(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        s = np.linspace(0.0, 1.0, 4097)
        out = np.empty(a.shape)
        flat_lo, flat_hi, flat_out = lo.ravel(), hi.ravel(), out.reshape(-1)
        chunk = 256
        for k in range(0, flat_lo.size, chunk):
            pts = flat_lo[k:k + chunk, None] + s[None, :] * (flat_hi - flat_lo)[k:k + chunk, None]
            flat_out[k:k + chunk] = np.max(np.abs(self.flux.df(pts)), axis=1) * 1.01
        return out

    def h(self, a, b, n=1.0):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        n = np.asarray(n, dtype=float)
        if self.kind == "rusanov":
            lam = self._rusanov_lambda(a, b)
            return 0.5 * (self.flux.f(a) + self.flux.f(b)) * n - 0.5 * lam * (b - a)
        pos = self._godunov_pos(a, b)
        neg = -self._godunov_pos(b, a)
        return np.where(n > 0, pos, neg)

    def dh(self, a, b, n=1.0):
        """Generalized derivatives ``(dh/da, dh/db)``.

        Godunov: derivative of the active branch of the min/max with ties
        broken toward the first argument. Rusanov: the dissipation speed is
        held fixed.
        """
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        n = np.broadcast_to(np.asarray(n, dtype=float), a.shape)
        if self.kind == "rusanov":
            lam = self._rusanov_lambda(a, b)
            return 0.5 * self.flux.df(a) * n + 0.5 * lam, 0.5 * self.flux.df(b) * n - 0.5 * lam
        da_p, db_p = self._godunov_grad(a, b)
        db_m, da_m = self._godunov_grad(b, a)
        da = np.where(n > 0, da_p, -da_m)
        db = np.where(n > 0, db_p, -db_m)
        return da, db

    def _godunov_grad(self, a, b):
        _, idx, ncand = self._godunov_state(a, b)
        da = np.where(idx == 0, self.flux.df(a), 0.0)
        db = np.where(idx == ncand - 1, self.flux.df(b), 0.0)
        return da, db

    def godunov_state(self, a, b, n=1.0):
        """State whose physical flux realizes the Godunov flux at the interface."""
        a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        n = np.broadcast_to(np.asarray(n, dtype=float), a.shape)
        pos, _, _ = self._godunov_state(a, b)
        neg, _, _ = self._godunov_state(b, a)
        return np.where(n > 0, pos, neg)

    def entropy_flux(self, a, b, n, entropy: EntropyPair):
        """Numerical entropy flux ``q(u*) n`` paired with the Godunov flux."""
        if self.kind != "godunov":
            raise NotImplementedError(f"no entropy flux companion for {self.kind!r}")
        ustar = self.godunov_state(a, b, n)
        return entropy.qflux(ustar) * np.asarray(n, dtype=float)


def interface_flux(kind: str, flux: Flux, a, b, n=1.0, bounds=(-10.0, 10.0)):
    return InterfaceFlux(kind, flux, bounds).h(a, b, n)


def interface_entropy_flux(kind: str, flux: Flux, a, b, n, entropy: EntropyPair, bounds=(-10.0, 10.0)):
    return InterfaceFlux(kind, flux, bounds).entropy_flux(a, b, n, entropy)


def ec_interface_entropy_flux(ec: EcFlux, iflux: InterfaceFlux, a, b, n=1.0):
    """``G_ec = h (v(a) + v(b)) / 2 - (psi(a) + psi(b)) n / 2``."""
    v = ec.entropy.v
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 0.5 * iflux.h(a, b, n) * (v(a) + v(b)) - 0.5 * (ec.psi(a) + ec.psi(b)) * n
