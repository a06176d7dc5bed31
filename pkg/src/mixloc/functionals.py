"""Variational energies of the stationary problems and the hidden-convexity
functional.

All integrals are nodal quadratures with weight ``h^N``; ``d`` is the nodal
boundary distance, so ``d^-gamma`` is always finite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import Grid, as_grid_function
from .operators import NonlocalKernel, diffusion_energy, diffusion_grad, signed_power
from .params import ModelParams


def singular_weight(grid: Grid, params: ModelParams) -> np.ndarray:
    return grid.bdist ** (-params.gamma)


def _pos(u):
    return np.maximum(u, 0.0)


@dataclass(frozen=True)
class StationaryProblem:
    """Data of ``u^{2m+1} + lam T(u) = g0 u^m + lam m d^-gamma u^delta``."""

    lam: float
    g0: np.ndarray = field(repr=False)
    params: ModelParams
    grid: Grid
    kernel: NonlocalKernel
    g_lower: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        g0 = as_grid_function(self.g0, self.grid)
        if np.any(g0 < 0):
            raise ValueError("g0 must be nonnegative")
        object.__setattr__(self, "g0", g0)
        if not np.any(g0 > 0):
            warnings.warn("g0 vanishes identically; the minimizer is u = 0", stacklevel=3)
        if self.g_lower is not None:
            gl = as_grid_function(self.g_lower, self.grid)
            object.__setattr__(self, "g_lower", gl)
            if np.any(g0 < self.lam * gl - 1e-14 * (1 + np.abs(g0))):
                warnings.warn("g0 >= lambda * g_lower is violated", stacklevel=3)


def energy_J(u, prob: StationaryProblem) -> float:
    u = np.asarray(u, dtype=float)
    pr, grid = prob.params, prob.grid
    m, p, lam, qw = pr.m, pr.p, prob.lam, grid.quad_weight
    up = _pos(u)
    val = qw * np.sum(np.abs(u) ** (2 * (m + 1))) / (2 * (m + 1))
    val += lam / p * diffusion_energy(u, grid, prob.kernel)
    val -= qw * np.dot(prob.g0, up ** (m + 1)) / (m + 1)
    if m > 0:
        val -= lam * m / (pr.delta + 1) * qw * np.dot(singular_weight(grid, pr), up ** (pr.delta + 1))
    return float(val)


def grad_J(u, prob: StationaryProblem) -> np.ndarray:
    """Exact gradient of :func:`energy_J`.

    For ``m > 0`` the positive-part powers have derivative zero at
    ``u <= 0``. For ``m = 0`` the source term ``g0 u^+`` uses its right
    derivative at ``u = 0``, so ``grad_J(0) = -h^N g0``.
    """
    u = np.asarray(u, dtype=float)
    pr, grid = prob.params, prob.grid
    m, p, lam, qw = pr.m, pr.p, prob.lam, grid.quad_weight
    up = _pos(u)
    g = qw * signed_power(u, 2 * m + 1)
    g += lam / p * diffusion_grad(u, grid, prob.kernel)
    if m > 0:
        g -= qw * prob.g0 * up**m
        g -= lam * m * qw * singular_weight(grid, pr) * up**pr.delta
    else:
        g -= qw * prob.g0 * (u >= 0)
    return g


def energy_L(u, b, params: ModelParams, grid: Grid, kernel: NonlocalKernel, source_scale: float = 1.0) -> float:
    """Energy of ``T(u) = c (b u^m + m d^-gamma u^delta)`` with ``c = source_scale``."""
    u = np.asarray(u, dtype=float)
    m, p, qw = params.m, params.p, grid.quad_weight
    up = _pos(u)
    val = diffusion_energy(u, grid, kernel) / p
    val -= source_scale * qw * np.dot(b, up ** (m + 1)) / (m + 1)
    if m > 0:
        val -= source_scale * m / (params.delta + 1) * qw * np.dot(
            singular_weight(grid, params), up ** (params.delta + 1)
        )
    return float(val)


def grad_L(u, b, params: ModelParams, grid: Grid, kernel: NonlocalKernel, source_scale: float = 1.0) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    m, p, qw = params.m, params.p, grid.quad_weight
    up = _pos(u)
    g = diffusion_grad(u, grid, kernel) / p
    if m > 0:
        g -= source_scale * qw * np.asarray(b) * up**m
        g -= source_scale * m * qw * singular_weight(grid, params) * up**params.delta
    else:
        g -= source_scale * qw * np.asarray(b) * (u >= 0)
    return g


def residual_L(u, b, params: ModelParams, grid: Grid, kernel: NonlocalKernel, source_scale: float = 1.0) -> np.ndarray:
    """Nodal residual ``T(u) - c (b u^m + m d^-gamma u^delta)``.

    This is ``grad_L / h^N``; a sub-solution has residual <= 0, a
    super-solution residual >= 0.
    """
    return grad_L(u, b, params, grid, kernel, source_scale) / grid.quad_weight


def lp_power(u, grid: Grid, p: float) -> float:
    return float(grid.quad_weight * np.sum(np.abs(u) ** p))


def rayleigh_quotient(u, grid: Grid, kernel: NonlocalKernel, p: float) -> float:
    u = np.asarray(u, dtype=float)
    den = lp_power(u, grid, p)
    if den == 0:
        raise ValueError("Rayleigh quotient of the zero function is undefined")
    return diffusion_energy(u, grid, kernel) / den


def rayleigh_grad(u, grid: Grid, kernel: NonlocalKernel, p: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    num = diffusion_energy(u, grid, kernel)
    den = lp_power(u, grid, p)
    dden = grid.quad_weight * p * signed_power(u, p - 1)
    return (diffusion_grad(u, grid, kernel) * den - num * dden) / den**2


def diaz_saa_W(w, r: float, grid: Grid, kernel: NonlocalKernel, p: float) -> float:
    """``E(w^{1/(r+1)})`` for a strictly positive nodal ``w``."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("diaz_saa_W needs a strictly positive argument")
    if not 0 < r <= p - 1:
        raise ValueError(f"r must lie in (0, p - 1], got {r}")
    if kernel.p != p:
        raise ValueError("kernel was assembled for a different p")
    return diffusion_energy(w ** (1.0 / (r + 1)), grid, kernel)


def convexity_profile(w1, w2, r: float, grid: Grid, kernel: NonlocalKernel, p: float, n_samples: int = 21):
    """Sample ``theta -> W((1 - theta) w1 + theta w2)`` on ``[0, 1]``."""
    if n_samples < 3:
        raise ValueError("n_samples must be at least 3")
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    thetas = np.linspace(0.0, 1.0, n_samples)
    return [(float(t), diaz_saa_W((1 - t) * w1 + t * w2, r, grid, kernel, p)) for t in thetas]
