import numpy as np
import pytest

from idgsem.basis import build_basis
from idgsem.grid import Field, Grid1D, cell_average, cell_averages, exterior_traces, mass, neighbor_trace, project_initial
from idgsem.physics import BoundaryCondition, make_problem


def test_geometry():
    g = Grid1D(4)
    assert g.cell_width == 0.25 and g.jacobian == 0.125
    np.testing.assert_allclose(g.faces, [0, 0.25, 0.5, 0.75, 1.0])
    x = g.node_coordinates(build_basis(1))
    np.testing.assert_allclose(x, [[0, 0.25], [0.25, 0.5], [0.5, 0.75], [0.75, 1.0]])
    np.testing.assert_array_equal(g.cell_of([0.0, 0.3, 0.999, 1.0]), [0, 1, 3, 3])


@pytest.mark.parametrize("kwargs", [dict(n_cells=1), dict(n_cells=4, x_left=1.0, x_right=0.0)])
def test_invalid_grid(kwargs):
    with pytest.raises(ValueError):
        Grid1D(**kwargs)


def test_field_validation():
    g = Grid1D(3)
    with pytest.raises(ValueError):
        Field(g, 2, np.zeros((3, 2)))
    with pytest.raises(ValueError):
        Field(g, 1, np.array([[0, 1], [np.nan, 0], [0, 0]]))
    f = Field(g, 1, np.zeros((3, 2)))
    c = f.copy()
    c.values[0, 0] = 1.0
    assert f.values[0, 0] == 0.0


@pytest.mark.parametrize("p", [1, 3, 5])
def test_mass_and_averages_exact_for_polynomials(p):
    b = build_basis(p)
    g = Grid1D(5)
    x = g.node_coordinates(b)
    u = 3.0 * x**2 - x
    # exact for degree <= 2p - 1, so p >= 2 here; p = 1 integrates the interpolant
    expect = 1.0 - 0.5 if p >= 2 else np.sum(g.cell_width * 0.5 * (u[:, 0] + u[:, 1]))
    assert mass(u, g, b) == pytest.approx(expect, rel=1e-13)
    np.testing.assert_allclose(cell_averages(np.ones((5, p + 1)), b), 1.0)
    assert cell_average(Field(g, p, u), b, 0) == pytest.approx(float(cell_averages(u, b)[0]))


def test_exterior_traces_periodic_and_dirichlet():
    U = np.arange(6.0).reshape(3, 2)
    left, right = exterior_traces(U, Grid1D(3))
    np.testing.assert_array_equal(left, [5, 1, 3])
    np.testing.assert_array_equal(right, [2, 4, 0])
    left, right = exterior_traces(U, Grid1D(3, bc=BoundaryCondition.dirichlet(-7.0, 9.0)))
    np.testing.assert_array_equal(left, [-7, 1, 3])
    np.testing.assert_array_equal(right, [2, 4, 9])
    # leading level axis is carried along
    L, R = exterior_traces(np.stack([U, U + 10]), Grid1D(3))
    np.testing.assert_array_equal(L[1], [15, 11, 13])


def test_neighbor_trace():
    f = Field(Grid1D(3), 1, np.arange(6.0).reshape(3, 2))
    assert neighbor_trace(f, 0, "left") == 5.0
    assert neighbor_trace(f, 2, "right") == 0.0
    with pytest.raises(ValueError):
        neighbor_trace(f, 0, "up")


def test_project_initial_is_nodal_interpolation():
    pr = make_problem(1)
    b = build_basis(3)
    g = Grid1D.for_problem(pr)
    f = project_initial(g, b, pr)
    np.testing.assert_allclose(f.values, np.sin(2 * np.pi * g.node_coordinates(b)))
    assert g.n_cells == 40
