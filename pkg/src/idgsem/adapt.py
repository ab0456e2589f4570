"""Modal smoothness indicator and the viscosity multiplier built on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import LobattoBasis, modal_coefficients

SENTINEL = -300.0
HALF_WIDTH = 0.1


def threshold(p: int) -> float:
    """``S_0 = -4 log10(2p)``."""
    return -4.0 * np.log10(2.0 * p)


def _modal_energies(basis: LobattoBasis) -> np.ndarray:
    # discrete GL norm of P_n: exact 2/(2n+1) below the top mode, 2/p for P_p
    p = basis.degree
    n = np.arange(p + 1)
    e = 2.0 / (2.0 * n + 1.0)
    e[p] = 2.0 / p
    return e


def smoothness_values(values: np.ndarray, basis: LobattoBasis) -> np.ndarray:
    """``log10(||u - Pi u||^2 / ||u||^2)`` for every cell, GL-discrete norms.

    ``Pi`` drops the top Legendre mode. Cells whose top coefficient is at
    roundoff level (polynomials of lower degree) or whose norm is zero
    return :data:`SENTINEL`.
    """
    u = np.asarray(values, dtype=float)
    c = modal_coefficients(basis, u)
    top = c[..., -1] ** 2 * _modal_energies(basis)[-1]
    total = (u * u) @ basis.weights
    out = np.full(u.shape[:-1], SENTINEL)
    scale = np.max(np.abs(u), axis=-1)
    ok = (np.abs(c[..., -1]) > 16.0 * np.finfo(float).eps * scale) & (total > 0.0)
    with np.errstate(divide="ignore"):
        out[ok] = np.maximum(np.log10(top[ok] / total[ok]), SENTINEL)
    return out


def smoothness(values: np.ndarray, basis: LobattoBasis, c: int) -> float:
    return float(smoothness_values(np.asarray(values)[c], basis))


def multiplier(s, s0: float):
    """0 below ``s0 - 0.1``, 1 above ``s0 + 0.1``, sine ramp in between."""
    s = np.asarray(s, dtype=float)
    ramp = 0.5 + 0.5 * np.sin(5.0 * np.pi * (s - s0))
    out = np.where(s < s0 - HALF_WIDTH, 0.0, np.where(s > s0 + HALF_WIDTH, 1.0, ramp))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class IndicatorState:
    s_values: np.ndarray
    s_threshold: float
    multipliers: np.ndarray


def update_multipliers(values: np.ndarray, basis: LobattoBasis) -> IndicatorState:
    """Indicator and multipliers from the solution at the start of a step."""
    s = smoothness_values(values, basis)
    s0 = threshold(basis.degree)
    return IndicatorState(s, s0, np.asarray(multiplier(s, s0), dtype=float))
