import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma as Gamma

from mixloc.grid import build_grid
from mixloc.operators import (
    assemble_kernel,
    diffusion_energy,
    linear_operator,
    local_energy,
    local_grad,
    nonlocal_energy,
    nonlocal_grad,
)
from mixloc.params import ModelParams
from mixloc.verify import fd_gradient


def test_tail_weight_midpoint_1d():
    # 3 nodes, the middle one at x = 0.5; s p = 0.5
    g = build_grid(1, 3)
    k = assemble_kernel(g, ModelParams(p=2, s=0.25))
    f = lambda y: abs(0.5 - y) ** -1.5  # noqa: E731
    oracle = integrate.quad(f, -np.inf, 0)[0] + integrate.quad(f, 1, np.inf)[0]
    assert oracle == pytest.approx(5.656854249492381, rel=1e-10)
    assert k.tail_weight[1] == pytest.approx(g.spacing * oracle, rel=1e-12)


def test_pair_weight_quarter_spacing():
    g = build_grid(1, 3)  # h = 0.25, neighbours 0.25 apart
    k = assemble_kernel(g, ModelParams(p=2, s=0.25))
    assert k.pair_weight[0, 1] == pytest.approx(0.5)
    assert np.all(np.diag(k.pair_weight) == 0)


def _tail_oracle_2d(x, box, a):
    """Inclusion-exclusion over the four exterior half-planes."""
    c = np.sqrt(np.pi) * Gamma((1 + a) / 2) / Gamma((2 + a) / 2)
    dists = [x[0], box[0] - x[0], x[1], box[1] - x[1]]
    total = sum(c * t ** (-a) / a for t in dists)
    for tx in (x[0], box[0] - x[0]):
        for ty in (x[1], box[1] - x[1]):
            val = integrate.dblquad(
                lambda v, u: (u * u + v * v) ** (-(2 + a) / 2), tx, np.inf, ty, np.inf, epsabs=0, epsrel=1e-11
            )[0]
            total -= val
    return total


def test_tail_weight_2d_against_half_plane_decomposition():
    g = build_grid(2, 4, [1.0, 1.4])
    pr = ModelParams(p=2, s=0.6)
    k = assemble_kernel(g, pr)
    for i in (0, 3, 7):
        oracle = _tail_oracle_2d(g.nodes[i], g.box_lengths, pr.sp)
        assert k.tail_weight[i] == pytest.approx(g.quad_weight * oracle, rel=1e-7)


def test_kernel_is_symmetric_and_tail_reflects():
    g = build_grid(2, 5)
    k = assemble_kernel(g, ModelParams(p=2.5, s=0.4))
    np.testing.assert_array_equal(k.pair_weight, k.pair_weight.T)
    np.testing.assert_allclose(k.tail_weight[g.reversal()], k.tail_weight, rtol=1e-9)
    assert np.all(k.tail_weight > 0)


def _loop_nonlocal(u, W, tau, p):
    n = len(u)
    tot = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                tot += W[i, j] * abs(u[i] - u[j]) ** p
        tot += 2 * tau[i] * abs(u[i]) ** p
    return tot


def test_nonlocal_energy_examples(rng):
    g = build_grid(1, 7)
    for p in (1.5, 2.0, 3.0):
        k = assemble_kernel(g, ModelParams(p=p, s=0.5))
        assert nonlocal_energy(np.zeros(7), k) == 0.0
        assert nonlocal_energy(np.full(7, 1.3), k) == pytest.approx(2 * 1.3**p * k.tail_weight.sum())
        e = np.zeros(7)
        e[2] = 1.0
        assert nonlocal_energy(e, k) == pytest.approx(2 * (k.pair_weight[2].sum() + k.tail_weight[2]))
        u = rng.normal(size=7)
        assert nonlocal_energy(u, k) == pytest.approx(_loop_nonlocal(u, k.pair_weight, k.tail_weight, p))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_nonlocal_grad_finite_differences(p, rng):
    g = build_grid(1, 10)
    k = assemble_kernel(g, ModelParams(p=p, s=0.5))
    u = rng.normal(size=10)
    gr = nonlocal_grad(u, k)
    fd = fd_gradient(lambda v: nonlocal_energy(v, k), u)
    assert np.max(np.abs(fd - gr)) <= 1e-6 * np.max(np.abs(gr))
    np.testing.assert_array_equal(nonlocal_grad(np.zeros(10), k), np.zeros(10))


def test_nonlocal_grad_linear_for_p2(rng):
    g = build_grid(1, 8)
    k = assemble_kernel(g, ModelParams(p=2, s=0.3))
    u, v = rng.normal(size=(2, 8))
    np.testing.assert_allclose(nonlocal_grad(u + v, k), nonlocal_grad(u, k) + nonlocal_grad(v, k), atol=1e-12)


def test_local_energy_single_node():
    # one interior node at 0.5, h = 0.5: built by hand since build_grid needs two nodes
    from mixloc.grid import Grid

    g = Grid(1, 1, 0.5, (1.0,), (1,), np.array([[0.5]]), np.array([0.5]))
    for p in (1.5, 2.0, 3.0):
        assert local_energy(np.array([1.0]), g, p) == pytest.approx(2.0**p)
    assert local_energy(np.array([1.0]), g, 2.0) == pytest.approx(4.0)


def test_local_energy_zero_and_homogeneity(rng):
    g = build_grid(2, 4)
    u = rng.normal(size=g.n_nodes)
    assert local_energy(np.zeros(g.n_nodes), g, 2.5) == 0.0
    assert local_energy(-2.0 * u, g, 2.5) == pytest.approx(2.0**2.5 * local_energy(u, g, 2.5))


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_local_grad_finite_differences(dim, p, rng):
    g = build_grid(dim, 5)
    u = rng.normal(size=g.n_nodes)
    gr = local_grad(u, g, p)
    fd = fd_gradient(lambda v: local_energy(v, g, p), u)
    assert np.max(np.abs(fd - gr)) <= 1e-6 * np.max(np.abs(gr))


def test_local_grad_matches_tridiagonal_matrix(rng):
    n = 9
    g = build_grid(1, n)
    h = g.spacing
    T = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
    u = rng.normal(size=n)
    # energy = h u^T T u, gradient = 2 h T u
    np.testing.assert_allclose(local_grad(u, g, 2.0), 2 * h * T @ u, rtol=1e-12, atol=1e-10)


def test_linear_operator_reproduces_energy(rng):
    g = build_grid(1, 12)
    k = assemble_kernel(g, ModelParams(p=2, s=0.75))
    A = linear_operator(g, k)
    u = rng.normal(size=12)
    assert u @ A @ u == pytest.approx(diffusion_energy(u, g, k), rel=1e-12)
    assert np.all(np.linalg.eigvalsh(A) > 0)
    with pytest.raises(ValueError):
        linear_operator(g, assemble_kernel(g, ModelParams(p=3, s=0.75)))
