import numpy as np
import pytest
import scipy.sparse as sp

from conftest import cached_run
from idgsem.basis import build_basis
from idgsem.grid import Grid1D
from idgsem.physics import BoundaryCondition, Problem, burgers, linear_flux, make_problem
from idgsem.scheme import Discretization, ViscosityConfig, be_jacobian, be_normalized, space_viscosity_bound
from idgsem.solver import (
    SolverConfig,
    SolverError,
    advance,
    make_setup,
    newton_solve,
    picard_solve,
    picard_step_be,
    picard_step_st,
    solve_step,
)
from idgsem.twopoint import EcFlux, InterfaceFlux


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(method="gmres")
    with pytest.raises(ValueError):
        SolverConfig(tol_abs=0.0)


def test_newton_linear_advection_one_iteration():
    flux = linear_flux(1.0)
    disc = Discretization(Grid1D(8), build_basis(3), EcFlux(flux), InterfaceFlux("godunov", flux, (-1, 1)))
    x = disc.grid.node_coordinates(disc.basis)
    uold = np.sin(2 * np.pi * x)
    visc = ViscosityConfig("none")
    res = lambda u: be_normalized(u, uold, 0.05, disc, visc)  # noqa: E731
    out = newton_solve(res, lambda u: be_jacobian(u, 0.05, disc, visc), uold, SolverConfig())
    assert out.converged and out.iterations == 1
    # dense-solve oracle: the residual is affine, F(u) = A u - b
    n = uold.size
    A = np.column_stack([(res(np.eye(n)[k].reshape(uold.shape)) - res(np.zeros_like(uold))).ravel() for k in range(n)])
    ref = np.linalg.solve(A, -res(np.zeros_like(uold)).ravel())
    np.testing.assert_allclose(out.x.ravel(), ref, atol=1e-12)


def test_newton_superlinear_on_problem1_step():
    s = make_setup(make_problem(1))
    u0 = cached_run(1).u_initial
    out, _, _ = solve_step(s, u0, s.dt, SolverConfig(method="newton"))
    h = out.history
    assert out.converged
    assert h[-1] < 1e-3 * h[-2] or h[-1] < 1e-11


def test_zero_duration_run_returns_initial():
    r = advance(make_setup(make_problem(1)), final_time=0.0)
    assert r.n_steps == 0
    np.testing.assert_array_equal(r.final, r.u_initial)


def test_problem1_step_count():
    s = make_setup(make_problem(1))
    assert s.dt == pytest.approx(1.0 / 40.0)
    r = cached_run(1)
    assert r.n_steps == 16 and r.final_time == 0.4


def test_problem2_is_backward_euler_and_steady():
    s = make_setup(make_problem(2))
    assert s.scheme == "be" and s.dt == pytest.approx(25.0)
    r = cached_run(2)
    assert r.steady_converged and r.steady_change < 1e-10


def test_last_step_is_clipped():
    r = advance(make_setup(make_problem(1)), final_time=0.06)
    assert [st.dt for st in r.steps] == pytest.approx([0.025, 0.025, 0.01])
    assert r.final_time == 0.06


def test_space_time_needs_q():
    with pytest.raises(ValueError):
        make_setup(make_problem(1), scheme="st", q=0)
    with pytest.raises(ValueError):
        make_setup(make_problem(1), scheme="cn")


def test_picard_requires_full_viscosity():
    s = make_setup(make_problem(1), viscosity="none")
    with pytest.raises(ValueError):
        solve_step(s, cached_run(1).u_initial, s.dt, SolverConfig(method="picard"))


def test_solver_failure_is_reported():
    cfg = SolverConfig(method="newton", max_newton=1)
    with pytest.raises(SolverError) as exc:
        advance(make_setup(make_problem(4)), cfg)
    assert exc.value.step == 0


def _disc(pid):
    s = make_setup(make_problem(pid))
    return s


@pytest.mark.parametrize("pid", [1, 4])
def test_picard_constant_fixed_point(pid):
    s = _disc(pid)
    c = np.mean(s.problem.bounds)
    U = np.full((40, 4), c)
    visc = s.viscosity_config(U)
    if s.problem.bc.is_periodic:
        np.testing.assert_allclose(picard_step_st(U, np.stack([U] * 4), s.dt, s.disc, visc, s.lipschitz), c, atol=1e-14)


@pytest.mark.parametrize("scheme,pid", [("be", 1), ("be", 4), ("st", 1), ("st", 5)])
def test_picard_map_preserves_bounds(scheme, pid, rng):
    pr = make_problem(pid)
    s = make_setup(pr, scheme=scheme)
    m, M = pr.bounds
    for _ in range(25):
        uold = rng.uniform(m, M, (40, 4))
        visc = s.viscosity_config(uold)
        if scheme == "be":
            guess = rng.uniform(m, M, (40, 4))
            out = picard_step_be(uold, guess, s.dt, s.disc, visc, s.lipschitz)
        else:
            guess = rng.uniform(m, M, (4, 40, 4))
            out = picard_step_st(uold, guess, s.dt, s.disc, visc, s.lipschitz)
        assert out.min() >= m - 1e-13 and out.max() <= M + 1e-13


def test_picard_converges_on_problem1_step():
    s = make_setup(make_problem(1))
    u0 = cached_run(1).u_initial
    seen = []
    cfg = SolverConfig(method="picard")
    out, _, _ = solve_step(s, u0, s.dt, cfg, on_picard_iterate=lambda x: seen.append((x.min(), x.max())))
    assert out.converged
    assert min(a for a, _ in seen) >= -1.0 - 1e-12 and max(b for _, b in seen) <= 1.0 + 1e-12


def test_picard_solve_detects_stall():
    cfg = SolverConfig(stall_window=5, max_picard=1000)
    out = picard_solve(lambda x: x, lambda x: np.ones_like(x), np.zeros(3), cfg, check_every=1)
    assert not out.converged


def test_adaptive_run_completes():
    r = advance(make_setup(make_problem(4), viscosity="adaptive"))
    assert r.final_time == pytest.approx(0.2)
    assert any(np.any(st.visc.multiplier > 0) for st in r.steps)
