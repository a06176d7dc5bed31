"""Implicit Euler (Rothe) time stepping and the discrete energy ledger.

Each step is one resolvent solve: with ``lam = dt`` and
``g0 = u_{n-1}^{m+1} + dt g^n`` the minimizer of ``energy_J`` solves

    u_n^{2m+1} + dt T(u_n) = (u_{n-1}^{m+1} + dt g^n) u_n^m + dt m d^-gamma u_n^delta.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .functionals import StationaryProblem, energy_J, grad_J, singular_weight
from .grid import Grid, as_grid_function, envelope_fit
from .minimize import MinimizeOptions, minimize
from .operators import NonlocalKernel, diffusion_energy
from .params import ModelParams

logger = logging.getLogger(__name__)

GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(5)

Source = Union[Callable, np.ndarray, float]


@dataclass(frozen=True)
class EvolutionProblem:
    """Time horizon, source and initial state of the evolution problem.

    ``source`` is either a sampler ``g(t, x) -> array`` (``x`` is the
    ``(n, N)`` node array), a per-node array constant in time, a scalar, or a
    table of shape ``(n0, n)`` whose row ``n - 1`` is the value on the
    ``n``-th step.
    """

    T: float
    n0: int
    source: Source = field(repr=False)
    u0: np.ndarray = field(repr=False)
    params: ModelParams
    grid: Grid
    kernel: NonlocalKernel

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be positive, got {self.T}")
        if int(self.n0) != self.n0 or self.n0 < 1:
            raise ValueError(f"n0 must be an integer >= 1, got {self.n0}")
        object.__setattr__(self, "n0", int(self.n0))
        u0 = as_grid_function(self.u0, self.grid)
        if not np.all(np.isfinite(u0)) or np.any(u0 <= 0):
            raise ValueError("u0 must be positive at every node")
        object.__setattr__(self, "u0", u0)
        src = self.source
        if not callable(src):
            arr = np.asarray(src, dtype=float)
            n = self.grid.n_nodes
            if arr.ndim == 0:
                arr = np.full(n, float(arr))
            if arr.shape not in ((n,), (self.n0, n)):
                raise ValueError(f"source table must have shape ({n},) or ({self.n0}, {n}), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("source table contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, "source", arr)
        if self.params.m > 0 and abs(self.params.m + 1 - self.params.p) < 1e-12:
            warnings.warn(
                "m + 1 = p: the hidden-convexity functional is only ray-convex, step uniqueness is not strict",
                stacklevel=3,
            )

    @property
    def dt(self) -> float:
        return self.T / self.n0

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n0 + 1)

    def sample(self, t: float) -> np.ndarray:
        """Pointwise value of the source at time ``t``."""
        if callable(self.source):
            return as_grid_function(np.broadcast_to(self.source(t, self.grid.nodes), (self.grid.n_nodes,)), self.grid)
        if self.source.ndim == 1:
            return np.array(self.source)
        n = min(max(int(np.ceil(t / self.dt - 1e-12)), 1), self.n0)
        return np.array(self.source[n - 1])

    def initial_envelope(self) -> dict:
        """Envelope of ``u0`` against ``c d`` and ``c d^{alpha'}``; reported, not enforced."""
        ap = self.params.alpha_prime
        exponent = ap if np.isfinite(ap) else 1.0
        env = envelope_fit(self.u0, self.grid, exponent)
        return {"exponent": exponent, **env}


def _gauss_points(problem: EvolutionProblem, n: int):
    a, b = problem.times[n - 1], problem.times[n]
    ts = 0.5 * (a + b) + 0.5 * (b - a) * GAUSS_NODES
    return ts, 0.5 * GAUSS_WEIGHTS


def time_average_g(problem: EvolutionProblem, n: int) -> np.ndarray:
    """``g^n = (1/dt) int_{t_{n-1}}^{t_n} g(s, .) ds``."""
    if not 1 <= n <= problem.n0:
        raise ValueError(f"step index must lie in [1, {problem.n0}], got {n}")
    if not callable(problem.source):
        return problem.sample(problem.times[n])
    ts, ws = _gauss_points(problem, n)
    return sum(w * problem.sample(t) for t, w in zip(ts, ws))


def averaging_norms(problem: EvolutionProblem) -> tuple:
    """``(||g_dt||^2, ||g||^2)`` in the discrete ``L^2(Q_T)`` norm.

    Both use the same Gauss rule on every step, so the first never exceeds
    the second (Jensen).
    """
    qw, dt = problem.grid.quad_weight, problem.dt
    avg = full = 0.0
    for n in range(1, problem.n0 + 1):
        gn = time_average_g(problem, n)
        avg += dt * qw * float(np.dot(gn, gn))
        if callable(problem.source):
            ts, ws = _gauss_points(problem, n)
            for t, w in zip(ts, ws):
                g = problem.sample(t)
                full += dt * qw * w * float(np.dot(g, g))
        else:
            full += dt * qw * float(np.dot(gn, gn))
    return avg, full


def rothe_step(u_prev, g_n, dt: float, params: ModelParams, grid: Grid, kernel: NonlocalKernel, opts=None):
    """One implicit Euler step, warm-started at ``u_prev``.

    Returns ``(u_n, diag)``; ``diag["converged"]`` is False if the minimizer
    failed, in which case ``u_n`` is the last iterate.
    """
    opts = opts or MinimizeOptions()
    u_prev = as_grid_function(u_prev, grid)
    if np.any(u_prev < 0):
        raise ValueError("u_prev must be nonnegative")
    g_n = as_grid_function(g_n, grid)
    m = params.m
    g0 = u_prev ** (m + 1) + dt * g_n
    prob = StationaryProblem(lam=dt, g0=np.maximum(g0, 0.0), params=params, grid=grid, kernel=kernel)
    start = u_prev
    if m > 0:
        start = np.maximum(u_prev, 1e-3 * max(float(u_prev.max()), 1e-12))
    u, rep = minimize(lambda v: energy_J(v, prob), lambda v: grad_J(v, prob), start, opts)
    vdiff = np.abs(u) ** (m + 1) - u_prev ** (m + 1)
    diag = {
        "energy_J": rep.final_energy,
        "iterations": rep.iterations,
        "grad_norm": rep.final_grad_norm,
        "converged": rep.converged,
        "message": rep.message,
        "min": float(u.min()),
        "max": float(u.max()),
        "increment": float(np.sqrt(grid.quad_weight * np.dot(vdiff, vdiff))),
    }
    return u, diag


@dataclass
class Trajectory:
    times: np.ndarray
    states: list = field(repr=False)
    diagnostics: list = field(repr=False)
    status: str = "complete"
    g_steps: list = field(default_factory=list, repr=False)

    @property
    def complete(self) -> bool:
        return self.status == "complete"

    @property
    def all_positive(self) -> bool:
        return all(bool(np.all(u > 0)) for u in self.states)

    def terminal(self) -> np.ndarray:
        return self.states[-1]


def evolve(problem: EvolutionProblem, opts: Optional[MinimizeOptions] = None) -> Trajectory:
    """Run ``rothe_step`` for ``n = 1..n0``; a failed step truncates the run."""
    opts = opts or MinimizeOptions()
    states = [problem.u0.copy()]
    diags, gs = [], []
    status = "complete"
    for n in range(1, problem.n0 + 1):
        gn = time_average_g(problem, n)
        u, diag = rothe_step(states[-1], gn, problem.dt, problem.params, problem.grid, problem.kernel, opts)
        diag["step"] = n
        diags.append(diag)
        if not diag["converged"]:
            status = f"failed at step {n}: {diag['message']}"
            logger.warning("trajectory truncated: %s", status)
            break
        states.append(u)
        gs.append(gn)
    traj = Trajectory(
        times=problem.times[: len(states)].copy(), states=states, diagnostics=diags, status=status, g_steps=gs
    )
    if not traj.all_positive:
        logger.warning("trajectory has a non-positive state")
    return traj


LEDGER_COLUMNS = ("step", "dissipation", "energy_increment", "work_g", "work_singular", "defect")


def energy_ledger(traj: Trajectory, problem: EvolutionProblem):
    """Per-step terms of the discrete energy inequality.

    With ``v = u^{m+1}`` the step equation tested against
    ``(v_n - v_{n-1}) / u_n^m`` gives

        dissipation + energy_increment + defect = work_g + work_singular

    where ``defect >= 0`` is the convexity gap of ``w -> E(w^{1/(m+1)})``.
    Returns ``(rows, cumulative_defect)``.
    """
    pr, grid, kernel = problem.params, problem.grid, problem.kernel
    qw, dt, m, p = grid.quad_weight, problem.dt, pr.m, pr.p
    weight = singular_weight(grid, pr)
    rows = []
    energies = [diffusion_energy(u, grid, kernel) for u in traj.states]
    for n in range(1, len(traj.states)):
        u, up = traj.states[n], traj.states[n - 1]
        dv = np.abs(u) ** (m + 1) - np.abs(up) ** (m + 1)
        gn = traj.g_steps[n - 1] if n - 1 < len(traj.g_steps) else time_average_g(problem, n)
        dissipation = dt * qw * float(np.dot(dv / dt, dv / dt))
        increment = (m + 1) / p * (energies[n] - energies[n - 1])
        work_g = qw * float(np.dot(gn, dv))
        work_s = m * qw * float(np.dot(weight * np.abs(u) ** (pr.delta - m), dv)) if m > 0 else 0.0
        defect = work_g + work_s - dissipation - increment
        rows.append(
            {
                "step": n,
                "dissipation": dissipation,
                "energy_increment": increment,
                "work_g": work_g,
                "work_singular": work_s,
                "defect": defect,
            }
        )
    return rows, float(sum(r["defect"] for r in rows))
