import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from idgsem.physics import (
    BoundaryCondition,
    buckley_leverett,
    burgers,
    kruzkov_entropy,
    linear_flux,
    lipschitz_constant,
    make_problem,
    square_entropy,
)

FLUXES = [burgers(), linear_flux(2.0), buckley_leverett(0.5), buckley_leverett(0.25)]


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
def test_derivative_matches_central_difference(flux):
    u = np.linspace(-3.0, 3.0, 41)
    h = 1e-6
    fd = (flux.f(u + h) - flux.f(u - h)) / (2 * h)
    np.testing.assert_allclose(flux.df(u), fd, atol=1e-7)


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
@pytest.mark.parametrize("a,b", [(-3.0, 2.5), (0.0, 1.0), (-0.7, -0.2)])
def test_antiderivative_matches_quadrature(flux, a, b):
    ref, _ = quad(lambda s: float(flux.f(np.array(s))), a, b, epsabs=1e-13, epsrel=1e-13)
    assert flux.antideriv(np.array(b)) - flux.antideriv(np.array(a)) == pytest.approx(ref, abs=1e-11)


def test_buckley_leverett_values():
    f = buckley_leverett(0.5)
    assert f(np.array(0.0)) == 0.0
    assert f(np.array(1.0)) == 1.0
    assert f(np.array(0.5)) == pytest.approx(0.25 / (0.25 + 0.125))


@pytest.mark.parametrize("c", [0.5, 0.25])
def test_buckley_leverett_critical_points(c):
    f = buckley_leverett(c)
    cp = f.critical_points(-3.0, 3.0)
    # f' = 2 c u (1 - u) / D^2 vanishes at 0 and 1
    np.testing.assert_allclose(cp, [0.0, 1.0], atol=1e-12)


def test_burgers_critical_point_and_linear_has_none():
    np.testing.assert_allclose(burgers().critical_points(-1.0, 1.0), [0.0], atol=1e-15)
    assert burgers().critical_points(0.5, 1.0).size == 0
    assert linear_flux(1.0).critical_points(-1.0, 1.0).size == 0


@pytest.mark.parametrize("flux,lo,hi,expected", [
    (burgers(), -1.0, 1.0, 1.0),
    (burgers(), 0.0, 2.0, 2.0),
    (linear_flux(-3.0), 0.0, 1.0, 3.0),
])
def test_lipschitz_constant(flux, lo, hi, expected):
    assert lipschitz_constant(flux, lo, hi, inflate=1.0) == pytest.approx(expected)
    assert lipschitz_constant(flux, lo, hi) == pytest.approx(1.01 * expected)


def test_lipschitz_buckley_leverett_half():
    # max of f' on [0, 1] for c = 1/2 from a fine independent grid
    f = buckley_leverett(0.5)
    u = np.linspace(0.0, 1.0, 200001)
    assert lipschitz_constant(f, 0.0, 1.0, inflate=1.0) == pytest.approx(np.abs(f.df(u)).max(), rel=1e-6)


def test_lipschitz_rejects_bad_interval():
    with pytest.raises(ValueError):
        lipschitz_constant(burgers(), 1.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(u=st.floats(-4, 4), K=st.sampled_from([-0.5, 0.0, 0.5]))
def test_entropy_flux_derivative(u, K):
    # q' = eta' f' away from the Kruzkov kink
    for flux in (burgers(), buckley_leverett(0.25)):
        h = 1e-6
        for ent in (square_entropy(flux), kruzkov_entropy(K, flux)):
            if ent.kink is not None and abs(u - K) < 1e-4:
                continue
            dq = (ent.qflux(np.array(u + h)) - ent.qflux(np.array(u - h))) / (2 * h)
            assert dq == pytest.approx(ent.eta_deriv(np.array(u)) * flux.df(np.array(u)), abs=1e-6)


def test_square_entropy_flux_burgers_closed_form():
    ent = square_entropy(burgers())
    u = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(ent.qflux(u), u**3 / 3.0, atol=1e-14)


def test_kruzkov_names():
    assert kruzkov_entropy(0.5, burgers()).name == "kruzkov(0.5)"
    assert square_entropy(burgers()).name == "square"


@pytest.mark.parametrize("pid,bounds,final,q,cfl,periodic", [
    (1, (-1.0, 1.0), 0.4, 3, 1.0, True),
    (2, (-1.0, 1.0), None, 0, 1e3, False),
    (3, (0.0, 2.0), 3.0 / (4.0 * np.pi), 3, 1.0, True),
    (4, (0.0, 1.0), 0.2, 3, 1.0, False),
    (5, (-3.0, 3.0), 1.0, 3, 1.0, False),
])
def test_problem_table(pid, bounds, final, q, cfl, periodic):
    pr = make_problem(pid)
    assert pr.bounds == bounds
    assert pr.final_time == final
    assert pr.p == 3 and pr.q == q and pr.n_cells == 40 and pr.cfl == cfl
    assert pr.bc.is_periodic == periodic
    x = np.linspace(0.0, 1.0, 1001)
    u0 = pr.u0(x)
    assert u0.min() >= bounds[0] and u0.max() <= bounds[1]


def test_problem_boundary_values():
    assert make_problem(2).bc == BoundaryCondition.dirichlet(1.0, -1.0)
    assert make_problem(4).bc == BoundaryCondition.dirichlet(1.0, 0.0)
    assert make_problem(5).bc == BoundaryCondition.dirichlet(-3.0, 3.0)


@pytest.mark.parametrize("pid", [0, 6])
def test_unknown_problem(pid):
    with pytest.raises(ValueError):
        make_problem(pid)
