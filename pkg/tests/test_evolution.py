import numpy as np
import pytest

from mixloc.evolution import (
    EvolutionProblem,
    averaging_norms,
    energy_ledger,
    evolve,
    rothe_step,
    time_average_g,
)
from mixloc.grid import build_grid, lp_norm
from mixloc.minimize import MinimizeOptions
from mixloc.operators import assemble_kernel, linear_operator
from mixloc.params import ModelParams
from mixloc.stationary import solve_P7


def test_time_average_examples(linear_setup):
    pr, g, k = linear_setup
    u0 = np.ones(g.n_nodes)
    const = EvolutionProblem(1.0, 10, np.linspace(1, 2, g.n_nodes), u0, pr, g, k)
    np.testing.assert_array_equal(time_average_g(const, 3), np.linspace(1, 2, g.n_nodes))
    lin = EvolutionProblem(1.0, 10, lambda t, x: np.full(len(x), t), u0, pr, g, k)
    np.testing.assert_allclose(time_average_g(lin, 1), 0.05, rtol=1e-14)
    ex = EvolutionProblem(2.0, 7, lambda t, x: np.full(len(x), np.exp(-t)), u0, pr, g, k)
    t = ex.times
    for n in range(1, 8):
        exact = (np.exp(-t[n - 1]) - np.exp(-t[n])) / ex.dt
        assert np.max(np.abs(time_average_g(ex, n) - exact)) <= 1e-12
    with pytest.raises(ValueError):
        time_average_g(ex, 0)


def test_table_source(linear_setup):
    pr, g, k = linear_setup
    tab = np.arange(4 * g.n_nodes, dtype=float).reshape(4, g.n_nodes)
    prob = EvolutionProblem(1.0, 4, tab, np.ones(g.n_nodes), pr, g, k)
    np.testing.assert_array_equal(time_average_g(prob, 2), tab[1])
    with pytest.raises(ValueError):
        EvolutionProblem(1.0, 5, tab, np.ones(g.n_nodes), pr, g, k)


def test_problem_validation(linear_setup):
    pr, g, k = linear_setup
    with pytest.raises(ValueError):
        EvolutionProblem(1.0, 4, 1.0, np.zeros(g.n_nodes), pr, g, k)
    with pytest.raises(ValueError):
        EvolutionProblem(-1.0, 4, 1.0, np.ones(g.n_nodes), pr, g, k)
    with pytest.raises(ValueError):
        EvolutionProblem(1.0, 0, 1.0, np.ones(g.n_nodes), pr, g, k)
    prob = EvolutionProblem(1.0, 3, 1.0, np.ones(g.n_nodes), pr, g, k)
    assert prob.dt == 1.0 / 3
    assert prob.initial_envelope()["c1"] > 0


def test_homogeneous_case_flagged():
    pr = ModelParams(p=1.5, s=0.75, m=0.5, delta=0.2)  # m + 1 = p
    g = build_grid(1, 8)
    k = assemble_kernel(g, pr)
    with pytest.warns(UserWarning, match="m \\+ 1 = p"):
        EvolutionProblem(1.0, 2, 1.0, np.ones(8), pr, g, k)


def test_jensen_for_averaged_source(linear_setup):
    pr, g, k = linear_setup
    src = lambda t, x: 1 + np.sin(7 * t) * np.cos(3 * x[:, 0]) + t**2  # noqa: E731
    prob = EvolutionProblem(1.5, 9, src, np.ones(g.n_nodes), pr, g, k)
    avg, full = averaging_norms(prob)
    assert avg <= full


def test_rothe_step_linear_oracle(linear_setup, rng):
    pr, g, k = linear_setup
    A = linear_operator(g, k)
    h = g.quad_weight
    up = rng.uniform(0.1, 1, g.n_nodes)
    gn = rng.uniform(0, 2, g.n_nodes)
    u, diag = rothe_step(up, gn, 0.05, pr, g, k)
    ref = np.linalg.solve(h * np.eye(g.n_nodes) + 0.05 * A, h * (up + 0.05 * gn))
    assert np.linalg.norm(u - ref) <= 1e-8 * np.linalg.norm(ref)
    assert diag["converged"]


@pytest.mark.parametrize("which", ["linear", "degenerate"])
def test_rothe_step_fixed_point(which, linear_setup, degenerate_setup):
    pr, g, k = linear_setup if which == "linear" else degenerate_setup
    b = 1 + g.nodes[:, 0]
    u_inf = solve_P7(b, pr, g, k, MinimizeOptions(grad_tol=1e-13))
    u, _ = rothe_step(u_inf, b, 0.01, pr, g, k)
    assert np.max(np.abs(u - u_inf)) <= 1e-9 * np.max(u_inf)


def test_rothe_step_monotone_in_data(degenerate_setup, rng):
    pr, g, k = degenerate_setup
    up2 = rng.uniform(0.1, 0.5, g.n_nodes)
    up1 = up2 + rng.uniform(0, 0.2, g.n_nodes)
    g2 = rng.uniform(0.5, 1, g.n_nodes)
    g1 = g2 + rng.uniform(0, 1, g.n_nodes)
    u1, _ = rothe_step(up1, g1, 0.02, pr, g, k)
    u2, _ = rothe_step(up2, g2, 0.02, pr, g, k)
    assert np.all(u1 >= u2 - 1e-10)


def test_pure_dissipation_decays(linear_setup):
    pr, g, k = linear_setup
    u0 = 0.5 + np.sin(np.pi * g.nodes[:, 0])
    traj = evolve(EvolutionProblem(0.5, 25, 0.0, u0, pr, g, k))
    assert traj.complete and traj.all_positive
    for r in (1, 2, 4):
        norms = [lp_norm(u, g, r) for u in traj.states]
        assert np.all(np.diff(norms) < 0)


@pytest.mark.parametrize("which", ["linear", "degenerate"])
def test_stationary_trajectory(which, linear_setup, degenerate_setup):
    pr, g, k = linear_setup if which == "linear" else degenerate_setup
    opts = MinimizeOptions()
    b = 1 + 0.5 * np.sin(np.pi * g.nodes[:, 0])
    u_inf = solve_P7(b, pr, g, k, opts)
    prob = EvolutionProblem(1.0, 20, b, u_inf, pr, g, k)
    traj = evolve(prob, opts)
    assert max(np.max(np.abs(u - u_inf)) for u in traj.states) <= 10 * opts.grad_tol
    rows, cum = energy_ledger(traj, prob)
    for row in rows:
        for key in ("dissipation", "energy_increment", "work_g", "work_singular", "defect"):
            assert abs(row[key]) <= 1e-10


def _smooth_problem(pr, g, k, n0):
    x = g.nodes[:, 0]
    u0 = solve_P7(np.full(g.n_nodes, 1.5) + np.sin(np.pi * x), pr, g, k, MinimizeOptions(grad_tol=1e-13))
    src = lambda t, X: 1.5 + np.sin(np.pi * X[:, 0]) * (1 + 0.5 * np.sin(3 * t))  # noqa: E731
    return EvolutionProblem(1.0, n0, src, u0, pr, g, k)


def test_time_refinement_first_order(linear_setup):
    pr, g, k = linear_setup
    ends = [evolve(_smooth_problem(pr, g, k, n0)).terminal() for n0 in (20, 40, 80, 160)]
    diffs = [np.linalg.norm(a - b) for a, b in zip(ends[:-1], ends[1:])]
    assert diffs[0] / diffs[1] >= 1.7 and diffs[1] / diffs[2] >= 1.7


@pytest.mark.parametrize("which", ["linear", "degenerate"])
def test_ledger_signs(which, linear_setup, degenerate_setup):
    pr, g, k = linear_setup if which == "linear" else degenerate_setup
    prob = _smooth_problem(pr, g, k, 40)
    traj = evolve(prob)
    rows, cum = energy_ledger(traj, prob)
    assert len(rows) == 40
    assert all(r["dissipation"] >= 0 for r in rows)
    assert all(r["defect"] >= -1e-10 for r in rows)
    assert cum == pytest.approx(sum(r["defect"] for r in rows))


def test_failed_step_truncates(linear_setup):
    pr, g, k = linear_setup
    prob = _smooth_problem(pr, g, k, 10)
    traj = evolve(prob, MinimizeOptions(max_iters=1))
    assert not traj.complete and traj.status.startswith("failed at step 1")
    assert len(traj.states) == 1 and len(traj.times) == 1
    rows, cum = energy_ledger(traj, prob)
    assert rows == [] and cum == 0.0
