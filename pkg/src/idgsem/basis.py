"""Gauss-Lobatto nodal basis on the reference interval [-1, 1].

Provides the quadrature nodes and weights, the nodal differentiation matrix
``D`` with ``D[k, l] = l_l'(xi_k)``, the summation-by-parts matrix
``Q = diag(w) D`` and the map from nodal values to Legendre modal
coefficients (normalized so that ``P_n(1) = 1``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEGREE = 12


def legendre_table(n: int, x: np.ndarray) -> np.ndarray:
    """Values ``P_0(x), ..., P_n(x)`` stacked along the first axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = x
    for k in range(1, n):
        out[k + 1] = ((2 * k + 1) * x * out[k] - k * out[k - 1]) / (k + 1)
    return out


def _lobatto_nodes(p: int) -> np.ndarray:
    # Newton on (1 - x^2) P_p'(x) starting from Chebyshev-Gauss-Lobatto points;
    # the update uses the Legendre recurrence form of that polynomial.
    x = -np.cos(np.pi * np.arange(p + 1) / p)
    for _ in range(100):
        tab = legendre_table(p, x)
        pp, pm = tab[p], tab[p - 1]
        dx = np.zeros_like(x)
        dx[1:-1] = (x[1:-1] * pp[1:-1] - pm[1:-1]) / ((p + 1) * pp[1:-1])
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    x[0], x[-1] = -1.0, 1.0
    return _polish_nodes(p, x)


def _polish_nodes(p: int, x: np.ndarray) -> np.ndarray:
    # bracketed bisection refinement of the interior roots of P_p'
    def dleg(t: float) -> float:
        tab = legendre_table(p, np.array(t))
        # (1 - t^2) P_p'(t) = p (P_{p-1}(t) - t P_p(t))
        return float(p * (tab[p - 1] - t * tab[p]))

    out = x.copy()
    for k in range(1, p):
        h = 1e-12
        lo, hi = x[k] - h, x[k] + h
        flo, fhi = dleg(lo), dleg(hi)
        if flo * fhi > 0:
            continue
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = dleg(mid)
            if fm == 0.0 or hi - lo < 1e-16:
                lo = hi = mid
                break
            if flo * fm < 0:
                hi, fhi = mid, fm
            else:
                lo, flo = mid, fm
        out[k] = 0.5 * (lo + hi)
    # enforce exact symmetry of the node set
    return 0.5 * (out - out[::-1])


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def differentiation_matrix(nodes: np.ndarray) -> np.ndarray:
    """``D[k, l] = l_l'(x_k)`` from barycentric weights.

    The diagonal uses the negative-sum form so rows annihilate constants to
    rounding error.
    """
    lam = barycentric_weights(nodes)
    n = nodes.size
    D = np.zeros((n, n))
    for k in range(n):
        for l in range(n):
            if k != l:
                D[k, l] = lam[l] / lam[k] / (nodes[k] - nodes[l])
        D[k, k] = -np.sum(D[k, np.arange(n) != k])
    return D


@dataclass(frozen=True, eq=False)
class LobattoBasis:
    degree: int
    nodes: np.ndarray
    weights: np.ndarray
    deriv: np.ndarray
    qmat: np.ndarray
    #: nodal values -> Legendre modal coefficients
    legendre_vandermonde: np.ndarray
    #: modal coefficients -> nodal values, ``V[i, k] = P_k(x_i)``
    vandermonde: np.ndarray
    bary: np.ndarray

    @property
    def size(self) -> int:
        return self.degree + 1


def build_basis(p: int) -> LobattoBasis:
    """Gauss-Lobatto basis of degree ``p`` (``1 <= p <= 12``)."""
    if int(p) != p or p < 1:
        raise ValueError(f"degree must be an integer >= 1, got {p!r}")
    if p > MAX_DEGREE:
        raise ValueError(f"degree {p} exceeds the supported maximum {MAX_DEGREE}")
    return _build_basis(int(p))


@lru_cache(maxsize=None)
def _build_basis(p: int) -> LobattoBasis:
    nodes = _lobatto_nodes(p)
    pp = legendre_table(p, nodes)[p]
    weights = 2.0 / (p * (p + 1) * pp**2)
    D = differentiation_matrix(nodes)
    V = legendre_table(p, nodes).T
    for arr in (nodes, weights, D, V):
        arr.setflags(write=False)
    Q = weights[:, None] * D
    Q.setflags(write=False)
    Vinv = np.linalg.inv(V)
    Vinv.setflags(write=False)
    lam = barycentric_weights(nodes)
    lam.setflags(write=False)
    return LobattoBasis(p, nodes, weights, D, Q, Vinv, V, lam)


def lagrange_eval(basis: LobattoBasis, nodal_values, xi):
    """Evaluate the interpolant of ``nodal_values`` at ``xi`` (barycentric form).

    ``nodal_values`` may carry leading batch dimensions; the last axis runs
    over the nodes. ``xi`` may be a scalar or an array.
    """
    u = np.asarray(nodal_values, dtype=float)
    xi_arr = np.atleast_1d(np.asarray(xi, dtype=float))
    diff = xi_arr[:, None] - basis.nodes[None, :]
    # points within a few ulps of a node take the nodal value (avoids overflow)
    exact = np.abs(diff) <= 4.0 * np.finfo(float).eps
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tmp = basis.bary[None, :] / diff
    hit = exact.any(axis=1)
    tmp[hit] = exact[hit].astype(float)
    weights = tmp / tmp.sum(axis=1, keepdims=True)
    out = u @ weights.T
    if np.ndim(xi) == 0:
        return out[..., 0] if out.ndim > 1 else float(out[0])
    return out


def interpolation_matrix(basis: LobattoBasis, xi) -> np.ndarray:
    """Matrix ``L`` with ``L[j, k] = l_k(xi_j)``."""
    return lagrange_eval(basis, np.eye(basis.size), np.atleast_1d(xi)).T


def modal_coefficients(basis: LobattoBasis, nodal_values) -> np.ndarray:
    """Legendre coefficients of the interpolant, last axis over modes."""
    return np.asarray(nodal_values, dtype=float) @ basis.legendre_vandermonde.T
