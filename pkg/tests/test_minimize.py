import numpy as np
import pytest

from mixloc.functionals import StationaryProblem, energy_J, grad_J
from mixloc.grid import build_grid
from mixloc.minimize import MinimizeError, MinimizeOptions, minimize
from mixloc.operators import assemble_kernel
from mixloc.params import ModelParams

A = np.array([[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]])
B = np.array([1.0, -2.0, 0.5])


def quad(u):
    return 0.5 * u @ A @ u - B @ u


def quad_grad(u):
    return A @ u - B


@pytest.mark.parametrize("history", [0, 10])
def test_quadratic_matches_linear_solve(history):
    u, rep = minimize(quad, quad_grad, np.zeros(3), MinimizeOptions(history=history))
    assert rep.converged
    assert np.max(np.abs(u - np.linalg.solve(A, B))) <= 1e-8


def test_stationary_start_takes_no_iterations():
    u_star = np.linalg.solve(A, B)
    u, rep = minimize(quad, quad_grad, u_star, MinimizeOptions(grad_tol=1e-10))
    assert rep.iterations == 0 and rep.converged
    np.testing.assert_array_equal(u, u_star)


def test_energy_trace_monotone():
    u, rep = minimize(quad, quad_grad, np.array([5.0, -3.0, 2.0]))
    tr = np.array(rep.energy_trace)
    assert np.all(np.diff(tr) <= 1e-12 * (1 + np.abs(tr[:-1])))


def test_vanishing_source_gives_zero():
    pr = ModelParams(p=2, s=0.5)
    g = build_grid(1, 8)
    k = assemble_kernel(g, pr)
    with pytest.warns(UserWarning):
        prob = StationaryProblem(0.5, np.zeros(8), pr, g, k)
    u, rep = minimize(lambda v: energy_J(v, prob), lambda v: grad_J(v, prob), np.linspace(0.1, 1, 8))
    assert rep.converged
    assert np.max(np.abs(u)) <= 1e-9


def test_nonconvergence_reported_not_raised():
    u, rep = minimize(quad, quad_grad, np.ones(3), MinimizeOptions(max_iters=1))
    assert not rep.converged and rep.message == "maximum iterations reached"
    err = MinimizeError(rep, "toy")
    assert "toy" in str(err) and err.report is rep


def test_infinite_energy_region_is_avoided():
    # log barrier: minimizer of x - log(x) is 1
    e = lambda u: np.inf if u[0] <= 0 else float(u[0] - np.log(u[0]))  # noqa: E731
    gr = lambda u: np.array([1 - 1 / u[0]])  # noqa: E731
    u, rep = minimize(e, gr, np.array([5.0]))
    assert rep.converged and u[0] == pytest.approx(1.0, abs=1e-8)
    _, rep = minimize(e, gr, np.array([-1.0]))
    assert not rep.converged


@pytest.mark.parametrize(
    "kw", [{"grad_tol": 0}, {"ls_shrink": 1.0}, {"ls_slope": 0.6}, {"max_iters": -1}, {"history": -2}]
)
def test_options_validation(kw):
    with pytest.raises(ValueError):
        MinimizeOptions(**kw)
    assert MinimizeOptions().with_(history=3).history == 3
