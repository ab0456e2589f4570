"""Uniform 1D mesh, nodal fields and boundary traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import LobattoBasis
from .physics import BoundaryCondition, Problem

# In 1D the metric products forming the volume normals, the face Jacobians
# and the face normals are constants.
VOLUME_NORMAL = 1.0
FACE_JACOBIAN = 1.0
LEFT_NORMAL = -1.0
RIGHT_NORMAL = 1.0


@dataclass(frozen=True)
class Grid1D:
    n_cells: int
    x_left: float = 0.0
    x_right: float = 1.0
    bc: BoundaryCondition = BoundaryCondition.periodic()

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError(f"n_cells must be >= 2, got {self.n_cells}")
        if not self.x_right > self.x_left:
            raise ValueError("x_right must exceed x_left")

    @classmethod
    def for_problem(cls, problem: Problem, n_cells: int | None = None) -> "Grid1D":
        return cls(n_cells or problem.n_cells, problem.x_left, problem.x_right, problem.bc)

    @property
    def cell_width(self) -> float:
        return (self.x_right - self.x_left) / self.n_cells

    @property
    def jacobian(self) -> float:
        return 0.5 * self.cell_width

    @property
    def cell_sizes(self) -> np.ndarray:
        return np.full(self.n_cells, self.cell_width)

    @property
    def faces(self) -> np.ndarray:
        return self.x_left + self.cell_width * np.arange(self.n_cells + 1)

    def node_coordinates(self, basis: LobattoBasis) -> np.ndarray:
        """Physical node positions, shape ``(n_cells, p+1)``."""
        left = self.faces[:-1]
        return left[:, None] + self.jacobian * (basis.nodes[None, :] + 1.0)

    def cell_of(self, x) -> np.ndarray:
        """Index of the cell containing ``x`` (right face belongs to the last cell)."""
        idx = np.floor((np.asarray(x, dtype=float) - self.x_left) / self.cell_width).astype(int)
        return np.clip(idx, 0, self.n_cells - 1)


@dataclass
class Field:
    """Nodal values ``values[c, i] = U_c^i``."""

    grid: Grid1D
    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expect = (self.grid.n_cells, self.degree + 1)
        if self.values.shape != expect:
            raise ValueError(f"field shape {self.values.shape} != {expect}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def copy(self) -> "Field":
        return Field(self.grid, self.degree, self.values.copy())


def project_initial(grid: Grid1D, basis: LobattoBasis, problem: Problem) -> Field:
    """Nodal interpolation of the initial datum."""
    x = grid.node_coordinates(basis)
    return Field(grid, basis.degree, problem.u0(x))


def cell_averages(values: np.ndarray, basis: LobattoBasis) -> np.ndarray:
    """``(1/2) sum_i w_i U^i`` along the last axis."""
    return 0.5 * np.asarray(values) @ basis.weights


def cell_average(field: Field, basis: LobattoBasis, c: int) -> float:
    return float(cell_averages(field.values[c], basis))


def mass(values: np.ndarray, grid: Grid1D, basis: LobattoBasis) -> float:
    return float(np.sum(grid.cell_sizes * cell_averages(values, basis)))


def exterior_traces(values: np.ndarray, grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """Exterior states at the left and right face of every cell.

    ``values`` has the cell index on axis ``-2`` and nodes on the last axis;
    leading axes (time levels) are carried along.
    """
    U = np.asarray(values, dtype=float)
    left = np.roll(U[..., :, -1], 1, axis=-1)
    right = np.roll(U[..., :, 0], -1, axis=-1)
    if not grid.bc.is_periodic:
        left[..., 0] = grid.bc.left
        right[..., -1] = grid.bc.right
    return left, right


def neighbor_trace(field: Field, c: int, side: str) -> float:
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    left, right = exterior_traces(field.values, field.grid)
    return float(left[c] if side == "left" else right[c])
