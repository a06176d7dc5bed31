"""Discrete local p-Dirichlet energy and discrete Gagliardo energy.

The nonlocal energy of a nodal function ``u`` (zero outside the box) is

    sum_{i != j} W_ij |u_i - u_j|^p  +  2 sum_i tau_i |u_i|^p

with ``W_ij = h^{2N} / |x_i - x_j|^{N+sp}`` and
``tau_i = h^N * int_{R^N \\ Omega} |x_i - y|^{-(N+sp)} dy``. The diagonal
``i = j`` is excluded, which is how the principal value enters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .grid import Grid
from .params import ModelParams


def signed_power(t, q):
    """``|t|^(q-1) t`` written as ``sign(t)|t|^q``; zero at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.abs(t) ** q


@dataclass(frozen=True)
class NonlocalKernel:
    pair_weight: np.ndarray = field(repr=False)
    tail_weight: np.ndarray = field(repr=False)
    s: float
    p: float


def _tail_integral_2d(x, box, a, epsrel):
    """``int_{R^2 \\ box} |x - y|^{-(2+a)} dy`` in polar coordinates around x.

    Along the ray of angle theta the integrand contributes
    ``rho(theta)^{-a} / a`` where ``rho`` is the exit distance.
    """
    lx, ly = box
    px, py = x

    def rho(theta):
        c, s = np.cos(theta), np.sin(theta)
        r = np.inf
        if c > 0:
            r = min(r, (lx - px) / c)
        elif c < 0:
            r = min(r, -px / c)
        if s > 0:
            r = min(r, (ly - py) / s)
        elif s < 0:
            r = min(r, -py / s)
        return r

    corners = [
        np.arctan2(ly - py, lx - px),
        np.arctan2(ly - py, -px),
        np.arctan2(-py, -px),
        np.arctan2(-py, lx - px),
    ]
    breaks = sorted({float(c % (2 * np.pi)) for c in corners} | {0.0, 2 * np.pi})
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo <= 0:
            continue
        val, err, info = integrate.quad(
            lambda th: rho(th) ** (-a) / a,
            lo,
            hi,
            epsabs=0.0,
            epsrel=epsrel,
            limit=200,
            full_output=1,
        )[:3]
        if not np.isfinite(val) or err > 10 * epsrel * abs(val) + 1e-300:
            raise RuntimeError(f"tail quadrature did not converge at node {x}")
        total += val
    return total


def assemble_kernel(grid: Grid, params: ModelParams, quad_rtol: float = 1e-8) -> NonlocalKernel:
    """Precompute pair and exterior-tail weights for ``grid``."""
    p, s = params.p, params.s
    a = s * p
    if a >= p:
        raise ValueError("s * p must be below p")
    N = grid.dim
    qw = grid.quad_weight
    x = grid.nodes
    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    np.fill_diagonal(dist, 1.0)
    W = qw**2 / dist ** (N + a)
    np.fill_diagonal(W, 0.0)
    W = 0.5 * (W + W.T)

    if N == 1:
        L = grid.box_lengths[0]
        xi = x[:, 0]
        tau = qw * (xi ** (-a) + (L - xi) ** (-a)) / a
    else:
        tau = np.array(
            [qw * _tail_integral_2d(xi, grid.box_lengths, a, quad_rtol) for xi in x]
        )
    W.setflags(write=False)
    tau.setflags(write=False)
    return NonlocalKernel(pair_weight=W, tail_weight=tau, s=s, p=p)


def nonlocal_energy(u, kernel: NonlocalKernel) -> float:
    u = np.asarray(u, dtype=float)
    p = kernel.p
    D = np.abs(u[:, None] - u[None, :])
    return float(
        np.sum(kernel.pair_weight * D**p) + 2.0 * np.dot(kernel.tail_weight, np.abs(u) ** p)
    )


def nonlocal_grad(u, kernel: NonlocalKernel) -> np.ndarray:
    """Exact gradient of :func:`nonlocal_energy`."""
    u = np.asarray(u, dtype=float)
    p = kernel.p
    D = u[:, None] - u[None, :]
    pair = np.sum(kernel.pair_weight * signed_power(D, p - 1), axis=1)
    return 2.0 * p * (pair + kernel.tail_weight * signed_power(u, p - 1))


def _axis_differences(u, grid: Grid):
    """Forward differences along each axis with zero ghost values."""
    U = np.asarray(u, dtype=float).reshape(grid.shape)
    out = []
    for ax in range(grid.dim):
        pad = [(0, 0)] * grid.dim
        pad[ax] = (1, 1)
        out.append(np.diff(np.pad(U, pad), axis=ax) / grid.spacing)
    return out


def local_energy(u, grid: Grid, p: float) -> float:
    """``sum_cells h^N |D u|^p`` over every axis, ghost values zero.

    The 1/p factor of the Dirichlet energy is not included.
    """
    return float(grid.quad_weight * sum(np.sum(np.abs(D) ** p) for D in _axis_differences(u, grid)))


def local_grad(u, grid: Grid, p: float) -> np.ndarray:
    """Exact gradient of :func:`local_energy`."""
    h = grid.spacing
    coef = grid.quad_weight * p / h
    g = np.zeros(grid.shape)
    for ax, D in enumerate(_axis_differences(u, grid)):
        phi = signed_power(D, p - 1)
        n = phi.shape[ax]
        left = np.take(phi, np.arange(0, n - 1), axis=ax)
        right = np.take(phi, np.arange(1, n), axis=ax)
        g += coef * (left - right)
    return g.ravel()


def diffusion_energy(u, grid: Grid, kernel: NonlocalKernel) -> float:
    """Local plus nonlocal energy, without the 1/p factor."""
    return local_energy(u, grid, kernel.p) + nonlocal_energy(u, kernel)


def diffusion_grad(u, grid: Grid, kernel: NonlocalKernel) -> np.ndarray:
    return local_grad(u, grid, kernel.p) + nonlocal_grad(u, kernel)


def linear_operator(grid: Grid, kernel: NonlocalKernel) -> np.ndarray:
    """Matrix ``A`` with ``diffusion_energy(u) = u^T A u`` for a ``p = 2`` kernel.

    ``A u`` is half the gradient: the discrete ``-Laplace + (-Laplace)^s``
    weighted by ``h^N``.
    """
    if kernel.p != 2:
        raise ValueError("linear_operator needs a kernel assembled with p = 2")
    cols = [0.5 * diffusion_grad(e, grid, kernel) for e in np.eye(grid.n_nodes)]
    A = np.column_stack(cols)
    return 0.5 * (A + A.T)
