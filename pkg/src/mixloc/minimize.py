"""Line-searched descent for smooth or mildly nonsmooth discrete energies.

Directions come from limited-memory BFGS (``history > 0``) or steepest
descent. Every accepted step satisfies a sufficient-decrease test. Once the
energy change falls below its floating-point resolution, the decrease is
certified by the trapezoidal estimate
``E(u + t d) - E(u) ~ t (g(u) + g(u + t d)) . d / 2`` instead, which needs
``g(u + t d) . d <= (2 c - 1) g(u) . d``.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MinimizeOptions:
    """``grad_tol`` is relative: convergence means
    ``max|grad| <= grad_tol * (1 + |energy|)``."""

    grad_tol: float = 1e-11
    max_iters: int = 20000
    ls_shrink: float = 0.5
    ls_slope: float = 1e-4
    min_step: float = 1e-20
    history: int = 10
    energy_noise: float = 1e-12

    def __post_init__(self):
        if not (self.grad_tol > 0 and self.min_step > 0 and self.energy_noise >= 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.ls_shrink < 1:
            raise ValueError("ls_shrink must lie in (0, 1)")
        if not 0 < self.ls_slope < 0.5:
            raise ValueError("ls_slope must lie in (0, 0.5)")
        if self.max_iters < 0 or self.history < 0:
            raise ValueError("max_iters and history must be nonnegative")

    def with_(self, **kw) -> "MinimizeOptions":
        return replace(self, **kw)


@dataclass
class MinimizeReport:
    iterations: int
    final_grad_norm: float
    final_energy: float
    converged: bool
    energy_trace: list = field(default_factory=list, repr=False)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_grad_norm": self.final_grad_norm,
            "final_energy": self.final_energy,
            "converged": self.converged,
            "message": self.message,
        }


class MinimizeError(RuntimeError):
    def __init__(self, report: MinimizeReport, what: str = "minimization"):
        super().__init__(f"{what} did not converge: {report.message}")
        self.report = report


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def _safe_energy(energy, u):
    try:
        with np.errstate(all="ignore"):
            val = float(energy(u))
    except (FloatingPointError, ValueError, ZeroDivisionError):
        return np.inf
    return val if np.isfinite(val) else np.inf


def minimize(
    energy: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    u_init,
    opts: MinimizeOptions | None = None,
):
    """Minimize ``energy`` from ``u_init``; returns ``(u, MinimizeReport)``.

    Never raises on non-convergence; inspect ``report.converged``.
    """
    opts = opts or MinimizeOptions()
    u = np.array(u_init, dtype=float, copy=True)
    E = _safe_energy(energy, u)
    if not np.isfinite(E):
        rep = MinimizeReport(0, np.nan, E, False, [E], "initial energy is not finite")
        return u, rep
    g = np.asarray(grad(u), dtype=float)
    trace = [E]
    history = opts.history
    pairs = deque(maxlen=max(history, 1))
    last_sy = None
    c = opts.ls_slope

    it = 0
    retried = False
    message = "maximum iterations reached"
    converged = False
    while True:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= opts.grad_tol * (1.0 + abs(E)):
            converged = True
            message = "gradient tolerance reached"
            break
        if it >= opts.max_iters:
            break

        if history > 0 and pairs:
            d = _two_loop(g, list(pairs))
            t = 1.0
        else:
            d = -g
            if last_sy is not None:
                t = last_sy
            else:
                t = max(float(np.max(np.abs(u))), 1e-3) / gnorm
        gd = float(np.dot(g, d))
        if not np.isfinite(gd) or gd >= 0:
            pairs.clear()
            d = -g
            gd = -float(np.dot(g, g))
            t = max(float(np.max(np.abs(u))), 1e-3) / gnorm

        noise = opts.energy_noise * (1.0 + abs(E))
        accepted = False
        g_new = None
        while t >= opts.min_step:
            u_new = u + t * d
            E_new = _safe_energy(energy, u_new)
            if E_new <= E + c * t * gd:
                accepted = True
                break
            if E_new <= E + noise:
                g_new = np.asarray(grad(u_new), dtype=float)
                if np.dot(g_new, d) <= (2 * c - 1) * gd:
                    accepted = True
                    break
                g_new = None
            t *= opts.ls_shrink

        if not accepted or np.array_equal(u_new, u):
            if not retried:
                retried = True
                history //= 2
                pairs = deque(maxlen=max(history, 1))
                last_sy = None
                logger.debug("line search stalled at iteration %d; history -> %d", it, history)
                continue
            message = f"line search failed (step below {opts.min_step:g})"
            break
        retried = False

        if g_new is None:
            g_new = np.asarray(grad(u_new), dtype=float)
        s = u_new - u
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-14 * float(np.dot(s, s)) ** 0.5 * float(np.dot(y, y)) ** 0.5 and sy > 0:
            last_sy = float(np.dot(s, s)) / sy
            if history > 0:
                pairs.append((s, y, 1.0 / sy))
        else:
            last_sy = None
        u, E, g = u_new, E_new, g_new
        trace.append(E)
        it += 1

    report = MinimizeReport(
        iterations=it,
        final_grad_norm=float(np.max(np.abs(g))) if g.size else 0.0,
        final_energy=E,
        converged=converged,
        energy_trace=trace,
        message=message,
    )
    return u, report
