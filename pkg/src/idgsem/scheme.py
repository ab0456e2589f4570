"""Residuals of the backward-Euler and space-time DGSEM schemes.

Nodal data are arrays with cells on axis ``-2`` and space nodes on the last
axis. Space-time slabs carry the time nodes on a leading axis, so one slab has
shape ``(q+1, n_cells, p+1)``. The backward-Euler unknowns are treated as a
slab with a single level wherever that keeps the assembly shared.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .basis import LobattoBasis
from .grid import Grid1D, exterior_traces
from .twopoint import EcFlux, InterfaceFlux

VISCOSITY_MODES = ("none", "full", "adaptive")


def _offdiag_ratio(basis: LobattoBasis) -> float:
    """``max_{k != l} max(|D_kl| / w_l, |D_kl| / w_k)``."""
    D = np.abs(basis.deriv)
    w = basis.weights
    off = ~np.eye(basis.size, dtype=bool)
    r1 = (D / w[None, :])[off]
    r2 = (D / w[:, None])[off]
    return float(max(r1.max(), r2.max()))


def space_viscosity_bound(basis: LobattoBasis, lipschitz: float, *, square: bool = True, l_u: float = 1.0) -> float:
    """Smallest admissible ``d_kappa`` for the bound-preserving scheme."""
    factor = 2.0 * lipschitz if square else 4.0 * lipschitz * l_u
    return factor * _offdiag_ratio(basis)


def time_viscosity_bound(basis_q: LobattoBasis, l_u: float = 1.0) -> float:
    """Smallest admissible ``d_n`` for the space-time scheme."""
    return 2.0 * l_u * _offdiag_ratio(basis_q)


@dataclass
class ViscosityConfig:
    """Graph-viscosity coefficients.

    :arg mode: ``"none"``, ``"full"`` or ``"adaptive"``.
    :arg d_space: coefficient ``d_kappa`` shared by all cells.
    :arg d_time: coefficient ``d_n`` (space-time scheme only).
    :arg multiplier: per-cell factor in ``[0, 1]``; used in adaptive mode.
    """

    mode: str = "none"
    d_space: float = 0.0
    d_time: float = 0.0
    multiplier: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.mode not in VISCOSITY_MODES:
            raise ValueError(f"unknown viscosity mode {self.mode!r}")
        if self.d_space < 0 or self.d_time < 0:
            raise ValueError("viscosity coefficients must be nonnegative")

    def factor(self, n_cells: int) -> np.ndarray:
        if self.mode == "none":
            return np.zeros(n_cells)
        if self.mode == "full" or self.multiplier is None:
            return np.ones(n_cells)
        m = np.asarray(self.multiplier, dtype=float)
        if m.shape != (n_cells,) or np.any(m < 0) or np.any(m > 1):
            raise ValueError("adaptive multipliers must be n_cells values in [0, 1]")
        return m

    def cell_space(self, n_cells: int) -> np.ndarray:
        return self.d_space * self.factor(n_cells)

    def cell_time(self, n_cells: int) -> np.ndarray:
        return self.d_time * self.factor(n_cells)


@dataclass(frozen=True, eq=False)
class Discretization:
    """Everything needed to evaluate the residuals on a grid."""

    grid: Grid1D
    basis: LobattoBasis
    ec: EcFlux
    iflux: InterfaceFlux
    basis_q: Optional[LobattoBasis] = None

    @property
    def flux(self):
        return self.ec.flux


# ---------------------------------------------------------------------------
# residuals


def boundary_fluxes(U: np.ndarray, disc: Discretization) -> tuple[np.ndarray, np.ndarray]:
    """Interface fluxes ``h(U_p, ext_r, +1)`` and ``h(U_0, ext_l, -1)`` per cell."""
    left, right = exterior_traces(U, disc.grid)
    hr = disc.iflux.h(U[..., -1], right, 1.0)
    hl = disc.iflux.h(U[..., 0], left, -1.0)
    return hr, hl


def space_residual(U: np.ndarray, disc: Discretization) -> np.ndarray:
    """``R_c^i = 2 sum_k Q_ik h_ec(U_c^i, U_c^k) + face terms``."""
    U = np.asarray(U, dtype=float)
    Q = disc.basis.qmat
    H = disc.ec.h_ec(U[..., :, None], U[..., None, :])
    R = 2.0 * np.einsum("ik,...ik->...i", Q, H)
    hr, hl = boundary_fluxes(U, disc)
    f = disc.flux.f
    R[..., -1] += hr - f(U[..., -1])
    R[..., 0] += hl + f(U[..., 0])
    return R


def graph_viscosity(U: np.ndarray, basis: LobattoBasis, d_cell: np.ndarray) -> np.ndarray:
    """``V_c^i = d_c w_i sum_k (w_k / 2) (U_c^i - U_c^k)``."""
    U = np.asarray(U, dtype=float)
    w = basis.weights
    mean = 0.5 * (U @ w)
    return np.asarray(d_cell)[:, None] * w * (U - mean[..., None])


def be_residual(unew: np.ndarray, uold: np.ndarray, dt: float, disc: Discretization, visc: ViscosityConfig) -> np.ndarray:
    """``w_i J (U^new - U^old) / dt + R(U^new) + V(U^new)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    J = disc.grid.jacobian
    d = visc.cell_space(disc.grid.n_cells)
    w = disc.basis.weights
    return w * J * (unew - uold) / dt + space_residual(unew, disc) + graph_viscosity(unew, disc.basis, d)


def st_time_term(slab: np.ndarray, uprev: np.ndarray, basis_q: LobattoBasis, ec: EcFlux, d_time) -> np.ndarray:
    """Time derivative with upwind coupling to the previous slab and time viscosity.

    ``T^r = sum_m 2 Q^q_rm u_ec(U^r, U^m) + delta_r0 (U^0 - U_prev) + d_n w_r sum_m w_m (U^r - U^m)``;
    ``d_time`` is a scalar or one value per cell.
    """
    S = np.asarray(slab, dtype=float)
    Qq = basis_q.qmat
    wq = basis_q.weights
    # move the time axis last for the two-point evaluation
    St = np.moveaxis(S, 0, -1)
    Uec = ec.u_ec(St[..., :, None], St[..., None, :])
    T = np.moveaxis(2.0 * np.einsum("rm,...rm->...r", Qq, Uec), -1, 0)
    T[0] += S[0] - uprev
    dn = np.broadcast_to(np.asarray(d_time, dtype=float), (S.shape[1],))
    tmean = np.tensordot(wq, S, axes=(0, 0))
    T += dn[None, :, None] * wq[:, None, None] * (2.0 * S - tmean[None])
    return T


def st_residual(slab: np.ndarray, uprev: np.ndarray, dt: float, disc: Discretization, visc: ViscosityConfig) -> np.ndarray:
    """``w_i J T^r + (w_r dt / 2) (R(U^r) + V(U^r))`` for every time node."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    bq = _require_q(disc)
    nc = disc.grid.n_cells
    J = disc.grid.jacobian
    T = st_time_term(slab, uprev, bq, disc.ec, visc.cell_time(nc))
    RV = space_residual(slab, disc) + graph_viscosity(slab, disc.basis, visc.cell_space(nc))
    return disc.basis.weights * J * T + 0.5 * dt * bq.weights[:, None, None] * RV


def _require_q(disc: Discretization) -> LobattoBasis:
    if disc.basis_q is None:
        raise ValueError("space-time scheme requires a time basis with q >= 1")
    return disc.basis_q


# Normalized residuals: each equation divided by ``w_i J``.


def be_normalized(unew, uold, dt, disc, visc):
    return be_residual(unew, uold, dt, disc, visc) / (disc.basis.weights * disc.grid.jacobian)


def st_normalized(slab, uprev, dt, disc, visc):
    return st_residual(slab, uprev, dt, disc, visc) / (disc.basis.weights * disc.grid.jacobian)


# ---------------------------------------------------------------------------
# Jacobians


def _space_jacobian_entries(U: np.ndarray, disc: Discretization, d_cell: np.ndarray, row_scale: np.ndarray):
    """COO entries of ``diag(row_scale) d(R + V)/dU`` for stacked levels.

    ``U`` has shape ``(L, nc, np)``; ``row_scale`` broadcasts to it. Unknowns
    are numbered in C order of ``U``.
    """
    L, nc, npn = U.shape
    Q = disc.basis.qmat
    w = disc.basis.weights
    f, df = disc.flux.f, disc.flux.df
    idx = np.arange(U.size).reshape(U.shape)
    scale = np.broadcast_to(row_scale, U.shape)

    # volume: J_ii = 2 sum_k Q_ik A_ik + 2 Q_ii A_ii, J_ik = 2 Q_ik A_ki
    A = disc.ec.dh_ec_da(U[..., :, None], U[..., None, :])
    A_T = np.swapaxes(A, -1, -2)
    block = 2.0 * Q * A_T
    diag = 2.0 * np.einsum("ik,...ik->...i", Q, A)
    block[..., np.arange(npn), np.arange(npn)] += diag
    # viscosity: d w_i (delta_ik - w_k / 2)
    block += np.asarray(d_cell)[None, :, None, None] * (w[:, None] * (np.eye(npn) - 0.5 * w[None, :]))
    block *= scale[..., :, None]
    rows = [np.broadcast_to(idx[..., :, None], block.shape).ravel()]
    cols = [np.broadcast_to(idx[..., None, :], block.shape).ravel()]
    vals = [block.ravel()]

    # faces
    left, right = exterior_traces(U, disc.grid)
    da_r, db_r = disc.iflux.dh(U[..., -1], right, 1.0)
    da_l, db_l = disc.iflux.dh(U[..., 0], left, -1.0)
    ip, i0 = idx[..., -1], idx[..., 0]
    rows += [ip.ravel(), i0.ravel()]
    cols += [ip.ravel(), i0.ravel()]
    vals += [((da_r - df(U[..., -1])) * scale[..., -1]).ravel(), ((da_l + df(U[..., 0])) * scale[..., 0]).ravel()]
    nbr_r = np.roll(idx[..., 0], -1, axis=-1)
    nbr_l = np.roll(idx[..., -1], 1, axis=-1)
    keep_r = np.ones(nc, dtype=bool)
    keep_l = np.ones(nc, dtype=bool)
    if not disc.grid.bc.is_periodic:
        keep_r[-1] = False
        keep_l[0] = False
    sel_r = np.broadcast_to(keep_r, ip.shape)
    sel_l = np.broadcast_to(keep_l, i0.shape)
    rows += [ip[sel_r], i0[sel_l]]
    cols += [nbr_r[sel_r], nbr_l[sel_l]]
    vals += [(db_r * scale[..., -1])[sel_r], (db_l * scale[..., 0])[sel_l]]
    return rows, cols, vals


def be_jacobian(unew: np.ndarray, dt: float, disc: Discretization, visc: ViscosityConfig) -> sp.csr_matrix:
    """Jacobian of :func:`be_normalized` with respect to ``unew``."""
    U = np.asarray(unew, dtype=float)[None]
    scale = 1.0 / (disc.basis.weights * disc.grid.jacobian)
    rows, cols, vals = _space_jacobian_entries(U, disc, visc.cell_space(disc.grid.n_cells), scale)
    n = U.size
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(np.full(n, 1.0 / dt))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def st_jacobian(slab: np.ndarray, dt: float, disc: Discretization, visc: ViscosityConfig) -> sp.csr_matrix:
    """Jacobian of :func:`st_normalized` with respect to the slab values."""
    bq = _require_q(disc)
    S = np.asarray(slab, dtype=float)
    nq, nc, npn = S.shape
    wq = bq.weights
    J = disc.grid.jacobian
    scale = 0.5 * dt * wq[:, None, None] / (disc.basis.weights * J)
    rows, cols, vals = _space_jacobian_entries(S, disc, visc.cell_space(nc), scale)

    # time term, coupling levels r and m at fixed (c, i)
    idx = np.arange(S.size).reshape(S.shape)
    St = np.moveaxis(S, 0, -1)  # (nc, np, nq)
    B = disc.ec.du_ec_da(St[..., :, None], St[..., None, :])
    Qq = bq.qmat
    block = 2.0 * Qq * np.swapaxes(B, -1, -2)
    block[..., np.arange(nq), np.arange(nq)] += 2.0 * np.einsum("rm,...rm->...r", Qq, B)
    block[..., 0, 0] += 1.0
    dn = visc.cell_time(nc)
    block += dn[:, None, None, None] * (wq[:, None] * (2.0 * np.eye(nq) - wq[None, :]))
    It = np.moveaxis(idx, 0, -1)
    rows.append(np.broadcast_to(It[..., :, None], block.shape).ravel())
    cols.append(np.broadcast_to(It[..., None, :], block.shape).ravel())
    vals.append(block.ravel())
    n = S.size
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def fd_jacobian(fun, x: np.ndarray, eps: float = 1e-7) -> np.ndarray:
    """Dense central finite-difference Jacobian of ``fun`` at ``x`` (test aid)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    out = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = eps
        fp = fun((x.ravel() + e).reshape(x.shape)).ravel()
        fm = fun((x.ravel() - e).reshape(x.shape)).ravel()
        out[:, k] = (fp - fm) / (2.0 * eps)
    return out
