import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idgsem.adapt import SENTINEL, multiplier, smoothness, smoothness_values, threshold, update_multipliers
from idgsem.basis import build_basis, legendre_table
from idgsem.grid import Grid1D, project_initial
from idgsem.physics import make_problem


@pytest.mark.parametrize("p", [1, 2, 3, 5])
def test_top_mode_only_gives_zero(p):
    b = build_basis(p)
    u = legendre_table(p, b.nodes)[p]
    assert smoothness(u[None], b, 0) == pytest.approx(0.0, abs=1e-13)


def test_constant_and_zero_cells_give_sentinel():
    b = build_basis(3)
    vals = np.stack([np.full(4, 2.0), np.zeros(4)])
    np.testing.assert_array_equal(smoothness_values(vals, b), [SENTINEL, SENTINEL])


def test_mixed_modes_hand_value():
    b = build_basis(3)
    tab = legendre_table(3, b.nodes)
    u = tab[0] + 1e-3 * tab[3]
    # discrete norms: ||P_0||^2 = 2, ||P_3||^2 = 2/3 on 4 Lobatto nodes, modes orthogonal
    top = 1e-6 * 2.0 / 3.0
    expect = np.log10(top / (2.0 + top))
    assert smoothness(u[None], b, 0) == pytest.approx(expect, rel=1e-12)


def test_threshold():
    assert threshold(3) == pytest.approx(-4.0 * np.log10(6.0))


@pytest.mark.parametrize("ds,expected", [(-0.2, 0.0), (0.2, 1.0), (0.0, 0.5), (-0.1, 0.0), (0.1, 1.0)])
def test_multiplier_branches(ds, expected):
    s0 = threshold(3)
    assert multiplier(s0 + ds, s0) == pytest.approx(expected, abs=1e-15)


@given(a=st.floats(-0.1, 0.1), b=st.floats(-0.1, 0.1))
def test_multiplier_monotone_in_ramp(a, b):
    lo, hi = sorted((a, b))
    assert multiplier(lo, 0.0) <= multiplier(hi, 0.0) + 1e-15


def test_multiplier_vectorized_range():
    s = np.linspace(-5, 5, 1001)
    m = multiplier(s, -1.0)
    assert np.all((m >= 0) & (m <= 1))


def test_update_multipliers_smooth_field_is_zero():
    pr = make_problem(1)
    b = build_basis(3)
    u = project_initial(Grid1D.for_problem(pr, 160), b, pr).values
    state = update_multipliers(u, b)
    np.testing.assert_array_equal(state.multipliers, 0.0)
    assert state.s_threshold == threshold(3)


def test_update_multipliers_flags_the_jump():
    pr = make_problem(4)
    b = build_basis(3)
    g = Grid1D.for_problem(pr)
    u = project_initial(g, b, pr).values
    m = update_multipliers(u, b).multipliers
    jump = g.cell_of(0.5 - 1e-9)
    assert m[jump] == 1.0
    assert np.all(np.delete(m, jump) == 0.0)


def test_update_multipliers_constant_field():
    b = build_basis(2)
    np.testing.assert_array_equal(update_multipliers(np.ones((5, 3)), b).multipliers, 0.0)
