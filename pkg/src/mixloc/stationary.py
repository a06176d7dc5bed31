"""Stationary solvers: the resolvent problem, the limit problem with source
``b``, the first eigenpair and the barrier functions used to confine the
time-discrete trajectory.

Every solver is a direct minimization of the associated energy. Solvers
return the nodal solution and raise :class:`~mixloc.minimize.MinimizeError`
on non-convergence; pass ``full_output=True`` to also get a report dict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .functionals import (
    StationaryProblem,
    energy_J,
    energy_L,
    grad_J,
    grad_L,
    rayleigh_grad,
    rayleigh_quotient,
    residual_L,
)
from .grid import Grid, as_grid_function, envelope_fit
from .minimize import MinimizeError, MinimizeOptions, minimize
from .operators import NonlocalKernel, diffusion_energy, diffusion_grad, signed_power
from .params import ModelParams

EIGEN_OPTIONS = MinimizeOptions(grad_tol=1e-13, max_iters=50000)
EPS_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def _profile(grid: Grid) -> np.ndarray:
    d = grid.bdist
    return d / d.max()


def _scan_scale(fun, shape: np.ndarray, lo=-8.0, hi=4.0, num=49) -> np.ndarray:
    """Best multiple of ``shape`` among log-spaced amplitudes."""
    ts = np.logspace(lo, hi, num)
    vals = [fun(t * shape) for t in ts]
    vals = [v if np.isfinite(v) else np.inf for v in vals]
    return ts[int(np.argmin(vals))] * shape


def _finish(u, report, what, extra=None):
    if not report.converged:
        raise MinimizeError(report, what)
    info = report.to_dict()
    info["min"] = float(np.min(u))
    info["max"] = float(np.max(u))
    info["positive"] = bool(np.all(u > 0))
    if extra:
        info.update(extra)
    return info


def solve_S_lambda(prob: StationaryProblem, opts: Optional[MinimizeOptions] = None, u_init=None, full_output=False):
    """Minimize :func:`energy_J`; the minimizer solves the resolvent problem."""
    opts = opts or MinimizeOptions()
    m = prob.params.m
    if u_init is None:
        u_init = np.maximum(prob.g0, 0.0) ** (1.0 / (m + 1))
        if m > 0:
            # u = 0 is a critical point when m > 0; start strictly inside the cone
            u_init = np.maximum(u_init, 1e-3 * max(float(u_init.max()), 1.0))
    else:
        u_init = as_grid_function(u_init, prob.grid)
    u, rep = minimize(lambda v: energy_J(v, prob), lambda v: grad_J(v, prob), u_init, opts)
    info = _finish(u, rep, "S_lambda solve")
    return (u, info) if full_output else u


def solve_P7(
    b,
    params: ModelParams,
    grid: Grid,
    kernel: NonlocalKernel,
    opts: Optional[MinimizeOptions] = None,
    u_init=None,
    source_scale: float = 1.0,
    full_output=False,
):
    """Minimize :func:`energy_L` for the source ``b`` (nonnegative, nontrivial)."""
    opts = opts or MinimizeOptions()
    b = as_grid_function(b, grid)
    if np.any(b < 0) or not np.any(b > 0):
        raise ValueError("b must be nonnegative and not identically zero")

    def E(v):
        return energy_L(v, b, params, grid, kernel, source_scale)

    def G(v):
        return grad_L(v, b, params, grid, kernel, source_scale)

    if u_init is None:
        u_init = _scan_scale(E, _profile(grid))
    else:
        u_init = as_grid_function(u_init, grid)
    u, rep = minimize(E, G, u_init, opts)
    info = _finish(u, rep, "P7 solve")
    if np.all(np.abs(u) <= 1e-300):
        raise MinimizeError(rep, "P7 solve (degenerate zero minimizer)")
    return (u, info) if full_output else u


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    phi1: np.ndarray = field(repr=False)
    residual: float = float("nan")


def eigen_residual(phi, lam, grid: Grid, kernel: NonlocalKernel, p: float) -> float:
    """Max-norm of ``T(phi) - lam |phi|^{p-2} phi`` (nodal, unweighted)."""
    r = diffusion_grad(phi, grid, kernel) / p - lam * grid.quad_weight * signed_power(phi, p - 1)
    return float(np.max(np.abs(r)) / grid.quad_weight)


def first_eigenpair(grid: Grid, kernel: NonlocalKernel, p: float, opts: Optional[MinimizeOptions] = None) -> EigenPair:
    """Minimize the Rayleigh quotient from a positive start.

    The quotient is 0-homogeneous, so descent steps are orthogonal to ``u``
    and the iterate norm stays close to 1; the result is renormalized to
    ``max phi = 1`` once at the end.
    """
    opts = opts or EIGEN_OPTIONS
    u0 = _profile(grid)
    u0 = u0 / (grid.quad_weight * np.sum(u0**p)) ** (1.0 / p)
    u, rep = minimize(
        lambda v: rayleigh_quotient(v, grid, kernel, p),
        lambda v: rayleigh_grad(v, grid, kernel, p),
        u0,
        opts,
    )
    if not rep.converged:
        raise MinimizeError(rep, "eigenpair")
    if u.sum() < 0:
        u = -u
    phi = u / np.max(u)
    lam = rayleigh_quotient(phi, grid, kernel, p)
    return EigenPair(lambda1=lam, phi1=phi, residual=eigen_residual(phi, lam, grid, kernel, p))


def build_subsolution(
    k: float,
    params: ModelParams,
    grid: Grid,
    kernel: NonlocalKernel,
    opts: Optional[MinimizeOptions] = None,
    g_lower=None,
    full_output=False,
):
    """Solve ``T(u) = k^{-1} (g_lower u^m + m d^-gamma u^delta)``.

    This is the limit problem with both sources scaled by ``1/k`` and is
    solved by the same minimization.
    """
    if not k > 0:
        raise ValueError("k must be positive")
    gl = np.ones(grid.n_nodes) if g_lower is None else as_grid_function(g_lower, grid)
    return solve_P7(gl, params, grid, kernel, opts, source_scale=1.0 / k, full_output=full_output)


def _singular_energy(u, grid, kernel, p, vartheta, eps):
    z = u + eps
    if np.any(z <= 0):
        return np.inf
    if vartheta == 1:
        prim = np.log(z)
    else:
        prim = z ** (1.0 - vartheta) / (1.0 - vartheta)
    return diffusion_energy(u, grid, kernel) / p - grid.quad_weight * np.sum(prim)


def _singular_grad(u, grid, kernel, p, vartheta, eps):
    return diffusion_grad(u, grid, kernel) / p - grid.quad_weight * (u + eps) ** (-vartheta)


def singular_solution(
    params: ModelParams,
    grid: Grid,
    kernel: NonlocalKernel,
    opts: Optional[MinimizeOptions] = None,
    eps_schedule: Sequence[float] = EPS_SCHEDULE,
    full_output=False,
):
    """Solve ``T(u) = (u + eps)^-vartheta`` along a decreasing ``eps`` schedule.

    Each stage minimizes the strictly convex regularized energy, warm-started
    from the previous stage.
    """
    opts = opts or MinimizeOptions()
    vt, p = params.vartheta, params.p
    if vt is None or not vt > 0:
        raise ValueError("vartheta must be set and positive")
    u = None
    stages = []
    for eps in eps_schedule:
        E = lambda v, e=eps: _singular_energy(v, grid, kernel, p, vt, e)  # noqa: E731
        G = lambda v, e=eps: _singular_grad(v, grid, kernel, p, vt, e)  # noqa: E731
        if u is None:
            u = _scan_scale(E, _profile(grid))
        u, rep = minimize(E, G, u, opts)
        if not rep.converged:
            raise MinimizeError(rep, f"singular problem at eps={eps:g}")
        stages.append({"eps": eps, "iterations": rep.iterations, "grad_norm": rep.final_grad_norm})
    if not full_output:
        return u
    ap = params.alpha_prime
    env = envelope_fit(u, grid, ap)
    ratio = u / grid.bdist**ap
    info = {
        "stages": stages,
        "envelope_c": float(max(ratio.max(), 1.0 / ratio.min())),
        "slope": env["slope"],
        "alpha_prime": ap,
    }
    return u, info


def build_supersolution(
    M: float,
    params: ModelParams,
    grid: Grid,
    kernel: NonlocalKernel,
    opts: Optional[MinimizeOptions] = None,
    base=None,
    eps_schedule: Sequence[float] = EPS_SCHEDULE,
):
    """``M^{1/(p-1)}`` times the solution of the singular problem.

    ``base`` may carry a precomputed :func:`singular_solution` to avoid
    re-solving while scanning ``M``.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    if base is None:
        base = singular_solution(params, grid, kernel, opts, eps_schedule)
    return M ** (1.0 / (params.p - 1.0)) * np.asarray(base)


def supersolution_margin(ubar, g_max, params: ModelParams, grid: Grid, kernel: NonlocalKernel) -> float:
    """Minimum nodal ``T(ubar) - (g_max ubar^m + m d^-gamma ubar^delta)``.

    A nonnegative value certifies ``ubar`` as a discrete super-solution of
    every implicit Euler step whose data lie below ``g_max`` and ``ubar``.
    """
    b = np.full(grid.n_nodes, float(g_max))
    return float(np.min(residual_L(ubar, b, params, grid, kernel)))


def subsolution_margin(ulow, g_lower, params: ModelParams, grid: Grid, kernel: NonlocalKernel) -> float:
    """Minimum nodal ``(g_lower u^m + m d^-gamma u^delta) - T(u)``."""
    gl = as_grid_function(g_lower, grid)
    return float(np.min(-residual_L(ulow, gl, params, grid, kernel)))


@dataclass
class Barriers:
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)
    k: float
    M: float
    info: dict = field(default_factory=dict)


def choose_barriers(
    u0,
    g_max: float,
    params: ModelParams,
    grid: Grid,
    kernel: NonlocalKernel,
    opts: Optional[MinimizeOptions] = None,
    g_lower=None,
    k_values: Sequence[float] = tuple(10.0**j for j in range(0, 13)),
    M_values: Sequence[float] = tuple(2.0**j for j in range(0, 61)),
) -> Barriers:
    """Scan ``k`` and ``M`` until ``lower <= u0 <= upper`` nodewise and
    ``upper`` is a discrete super-solution for sources up to ``g_max``."""
    u0 = as_grid_function(u0, grid)
    lower = k = None
    decreasing = True
    prev = None
    for kk in k_values:
        cand = build_subsolution(kk, params, grid, kernel, opts, g_lower)
        if prev is not None and np.any(cand > prev + 1e-8):
            decreasing = False
        prev = cand
        if np.all(cand <= u0):
            lower, k = cand, kk
            break
    if lower is None:
        raise RuntimeError("no admissible sub-solution found in the k scan")

    base, sinfo = singular_solution(params, grid, kernel, opts, full_output=True)
    upper = M = None
    for MM in M_values:
        cand = build_supersolution(MM, params, grid, kernel, base=base)
        if np.all(cand >= u0) and supersolution_margin(cand, g_max, params, grid, kernel) >= 0:
            upper, M = cand, MM
            break
    if upper is None:
        raise RuntimeError("no admissible super-solution found in the M scan")
    return Barriers(lower=lower, upper=upper, k=k, M=M, info={"sub_decreasing_in_k": decreasing, **sinfo})
