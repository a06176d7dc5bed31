"""Executable discrete checks of the comparison, contraction, accretivity,
envelope, stabilization, hidden-convexity and gradient claims.

Every check builds fresh problems, returns a :class:`VerifyReport` and is
deterministic given its seed. Random numbers come from
``numpy.random.Generator(MT19937(seed))``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .evolution import EvolutionProblem, evolve, time_average_g
from .functionals import StationaryProblem, convexity_profile, energy_J, grad_J
from .grid import Grid, build_grid, envelope_fit, l2_norm
from .minimize import MinimizeError, MinimizeOptions
from .operators import NonlocalKernel, assemble_kernel
from .params import ModelParams, require_valid
from .stationary import choose_barriers, solve_P7, solve_S_lambda

SUITES = ("gradients", "contraction", "accretivity", "comparison", "envelope", "stabilization", "convexity")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.MT19937(int(seed)))


@dataclass
class VerifyReport:
    """``margin >= 0`` exactly when the check passed."""

    check_name: str
    passed: bool
    margin: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "check_name": self.check_name,
            "passed": bool(self.passed),
            "margin": float(self.margin),
            "details": self.details,
        }


def _report(name, margin, details) -> VerifyReport:
    margin = float(margin)
    if not math.isfinite(margin):
        margin = -math.inf
    return VerifyReport(name, margin >= 0, margin, details)


@dataclass(frozen=True)
class CheckConfig:
    """Problem setup shared by the checks."""

    params: ModelParams = field(default_factory=lambda: ModelParams(p=2.0, s=0.75, vartheta=2.5))
    n_nodes: int = 32
    dim: int = 1
    lam: float = 0.1
    g_lower: float = 1.0
    T: float = 1.0
    n0: int = 100
    opts: MinimizeOptions = field(default_factory=MinimizeOptions)
    threads: int = 1

    def with_(self, **kw) -> "CheckConfig":
        return replace(self, **kw)

    def with_params(self, **kw) -> "CheckConfig":
        return replace(self, params=replace(self.params, **kw))

    def setup(self, n_nodes: Optional[int] = None):
        require_valid(self.params, self.dim)
        grid = build_grid(self.dim, n_nodes or self.n_nodes)
        return grid, assemble_kernel(grid, self.params)


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    """Ordered map, optionally on a thread pool."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _vnorm(u, grid, m):
    return l2_norm(np.abs(u) ** (m + 1), grid)


# ---------------------------------------------------------------- gradients

DEFAULT_GRADIENT_CONFIGS = ((1.5, 0.0, 16), (2.0, 0.0, 16), (2.5, 0.4, 16), (3.0, 0.4, 16))


def fd_gradient(fun, u, step=1e-6):
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    for i in range(u.size):
        e = np.zeros_like(u)
        hi = step * max(1.0, abs(u[i]))
        e[i] = hi
        out[i] = (fun(u + e) - fun(u - e)) / (2 * hi)
    return out


def check_gradient_consistency(
    configs: Iterable = DEFAULT_GRADIENT_CONFIGS,
    n_states: int = 10,
    seed: int = 0,
    s: float = 0.75,
    lam: float = 0.1,
    tol: float = 1e-5,
) -> VerifyReport:
    """``grad_J`` against central differences on random positive states.

    The error of one state is ``max|fd - grad| / max|grad|``.
    """
    rng = make_rng(seed)
    rows = []
    worst = 0.0
    for p, m, n in configs:
        params = ModelParams(p=p, s=s, m=m, delta=0.5 * m, gamma=0.0)
        grid = build_grid(1, n)
        kernel = assemble_kernel(grid, params)
        errs = []
        for _ in range(n_states):
            u = rng.uniform(0.2, 1.0, n)
            g0 = rng.uniform(0.5, 2.0, n)
            prob = StationaryProblem(lam=lam, g0=g0, params=params, grid=grid, kernel=kernel)
            g = grad_J(u, prob)
            fd = fd_gradient(lambda v: energy_J(v, prob), u)
            errs.append(float(np.max(np.abs(fd - g)) / np.max(np.abs(g))))
        rows.append({"p": p, "m": m, "n_nodes": n, "max_rel_error": max(errs)})
        worst = max(worst, max(errs))
    return _report("gradient_consistency", tol - worst, {"tolerance": tol, "configs": rows})


# -------------------------------------------------------------- contraction


def _random_source(rng, n, floor):
    return floor + rng.uniform(0.0, 2.0, n)


def check_stationary_contraction(n_pairs: int = 20, seed: int = 0, config: Optional[CheckConfig] = None, slack: float = 1e-6):
    """``||(u1^{m+1} - u2^{m+1})^+|| <= ||(g1 - g2)^+||`` for random data above ``lam g_lower``."""
    config = config or CheckConfig()
    grid, kernel = config.setup()
    m, lam = config.params.m, config.lam
    rng = make_rng(seed)
    floor = lam * config.g_lower
    pairs = [(_random_source(rng, grid.n_nodes, floor), _random_source(rng, grid.n_nodes, floor)) for _ in range(n_pairs)]

    def run(pair):
        g1, g2 = pair
        try:
            u1, u2 = (
                solve_S_lambda(StationaryProblem(lam, g, config.params, grid, kernel), config.opts) for g in (g1, g2)
            )
        except MinimizeError as exc:
            return {"lhs": math.nan, "rhs": math.nan, "error": str(exc)}
        lhs = l2_norm(np.maximum(np.abs(u1) ** (m + 1) - np.abs(u2) ** (m + 1), 0.0), grid)
        rhs = l2_norm(np.maximum(g1 - g2, 0.0), grid)
        return {"lhs": lhs, "rhs": rhs}

    rows = _pmap(run, pairs, config.threads)
    margins = [r["rhs"] + slack - r["lhs"] for r in rows]
    margin = min(margins) if all(np.isfinite(margins)) else -math.inf
    return _report(
        "stationary_contraction",
        margin,
        {"m": m, "p": config.params.p, "lam": lam, "slack": slack, "pairs": rows},
    )


# ------------------------------------------------------------- accretivity


DEFAULT_SOURCE_MAX = 3.0


def _default_source(grid):
    """Smooth time-periodic source with values in ``[1.5, 3]``."""

    def g(t, X):
        return 1.5 + np.prod(np.sin(np.pi * X / grid.box_lengths), axis=1) * (1.0 + 0.5 * np.sin(3.0 * t))

    return g


def check_parabolic_accretivity(
    config: Optional[CheckConfig] = None,
    perturbation: float = 0.1,
    seed: int = 0,
    slack: float = 1e-6,
    perturb_u0: bool = True,
    perturb_g: bool = True,
) -> VerifyReport:
    """Two trajectories from perturbed ``(u0, g)``; at every step

    ``||u_n^{m+1} - v_n^{m+1}|| <= ||u0^{m+1} - v0^{m+1}|| + sum_k dt ||g^k - h^k||``.
    """
    config = config or CheckConfig()
    grid, kernel = config.setup()
    m = config.params.m
    rng = make_rng(seed)
    g = _default_source(grid)
    u0 = solve_P7(np.full(grid.n_nodes, 1.5), config.params, grid, kernel, config.opts)
    bump = rng.uniform(-1.0, 1.0, grid.n_nodes)
    shape = rng.uniform(0.0, 1.0, grid.n_nodes)
    v0 = u0 * (1.0 + perturbation * bump) if perturb_u0 else u0.copy()
    eps = perturbation if perturb_g else 0.0

    def g_tilde(t, X):
        return g(t, X) + eps * np.exp(-t) * shape

    probs = [
        EvolutionProblem(config.T, config.n0, g, u0, config.params, grid, kernel),
        EvolutionProblem(config.T, config.n0, g_tilde, v0, config.params, grid, kernel),
    ]
    trajs = _pmap(lambda pr: evolve(pr, config.opts), probs, config.threads)
    a, b = trajs
    if not (a.complete and b.complete):
        return _report("parabolic_accretivity", -math.inf, {"status": [a.status, b.status]})
    rhs = l2_norm(u0 ** (m + 1) - v0 ** (m + 1), grid)
    lhs_list, rhs_list = [], []
    for n in range(config.n0 + 1):
        if n > 0:
            dg = a.g_steps[n - 1] - b.g_steps[n - 1]
            rhs += probs[0].dt * l2_norm(dg, grid)
        lhs_list.append(l2_norm(np.abs(a.states[n]) ** (m + 1) - np.abs(b.states[n]) ** (m + 1), grid))
        rhs_list.append(rhs)
    gaps = np.array(rhs_list) + slack - np.array(lhs_list)
    worst = int(np.argmin(gaps))
    return _report(
        "parabolic_accretivity",
        float(gaps.min()),
        {
            "m": m,
            "p": config.params.p,
            "steps": config.n0,
            "dt": probs[0].dt,
            "slack": slack,
            "worst_step": worst,
            "lhs_at_worst": lhs_list[worst],
            "rhs_at_worst": rhs_list[worst],
            "lhs_final": lhs_list[-1],
            "rhs_final": rhs_list[-1],
            "u0_perturbation_norm": rhs_list[0],
            "g_perturbation_norm": eps * l2_norm(shape, grid),
        },
    )


# -------------------------------------------------------------- comparison


def check_comparison(config: Optional[CheckConfig] = None, n_pairs: int = 5, seed: int = 0, tol: float = 1e-8) -> VerifyReport:
    """Ordered data give nodewise ordered minimizers, and barriers confine a trajectory."""
    config = config or CheckConfig()
    if not config.params.gamma < 0.5:
        raise ValueError(f"the comparison check needs gamma < 1/2, got {config.params.gamma}")
    grid, kernel = config.setup()
    lam, pr = config.lam, config.params
    rng = make_rng(seed)
    floor = lam * config.g_lower
    cases = []
    base = np.full(grid.n_nodes, floor + 1.0)
    cases.append(("shifted", base, base + 0.5))
    cases.append(("equal", base, base))
    for j in range(n_pairs):
        lo = _random_source(rng, grid.n_nodes, floor)
        cases.append((f"random_{j}", lo, lo + rng.uniform(0.0, 1.0, grid.n_nodes)))

    def run(case):
        name, g_lo, g_hi = case
        u_lo, u_hi = (solve_S_lambda(StationaryProblem(lam, g, pr, grid, kernel), config.opts) for g in (g_lo, g_hi))
        return {"case": name, "min_gap": float(np.min(u_hi - u_lo))}

    rows = _pmap(run, cases, config.threads)
    margin = min(r["min_gap"] for r in rows) + tol

    # barrier confinement along a trajectory
    g = _default_source(grid)
    u0 = solve_P7(np.full(grid.n_nodes, 1.5), pr, grid, kernel, config.opts)
    bar = choose_barriers(u0, DEFAULT_SOURCE_MAX, pr, grid, kernel, config.opts, g_lower=config.g_lower)
    lower, upper, k, M = bar.lower, bar.upper, bar.k, bar.M
    traj = evolve(EvolutionProblem(config.T, config.n0, g, u0, pr, grid, kernel), config.opts)
    conf = min(min(float(np.min(u - lower)), float(np.min(upper - u))) for u in traj.states) + tol
    if not traj.complete:
        conf = -math.inf
    return _report(
        "comparison",
        min(margin, conf),
        {"gamma": pr.gamma, "tolerance": tol, "pairs": rows, "barrier": {"k": k, "M": M, "margin": conf}},
    )


# ---------------------------------------------------------------- envelope


def check_boundary_envelope(u, grid: Grid, exponent: float, slope_window: Optional[tuple] = None, p=None, s=None) -> VerifyReport:
    """``c1 = min u/d`` and ``c2 = max u/d^exponent`` must be finite and positive.

    With ``slope_window`` the fitted log-log boundary slope must also lie
    inside it.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise ValueError("check_boundary_envelope needs a positive u")
    env = envelope_fit(u, grid, exponent)
    c1, c2, slope = env["c1"], env["c2"], env["slope"]
    margin = min(c1, c2) if np.isfinite(c1) and np.isfinite(c2) else -math.inf
    details = {"exponent": exponent, "c1": c1, "c2": c2, "slope": slope, "n_fit": env["n_fit"]}
    if slope_window is not None:
        lo, hi = slope_window
        details["slope_window"] = [lo, hi]
        margin = min(margin, slope - lo, hi - slope)
    if p is not None and s is not None:
        # the barrier exponent is expected to deteriorate as it approaches ps/(p-1)
        details["ps_over_p_minus_1"] = p * s / (p - 1)
        details["exponent_gap_to_ps_over_p_minus_1"] = p * s / (p - 1) - exponent
    return _report("boundary_envelope", margin, details)


def envelope_of_limit_solution(config: Optional[CheckConfig] = None, n_nodes: int = 128, b: float = 1.0) -> VerifyReport:
    """Envelope of the limit-problem solution with constant source ``b``."""
    config = config or CheckConfig()
    grid, kernel = config.setup(n_nodes)
    pr = config.params
    u = solve_P7(np.full(grid.n_nodes, b), pr, grid, kernel, config.opts)
    ap = pr.alpha_prime if np.isfinite(pr.alpha_prime) else 1.0
    rep = check_boundary_envelope(u, grid, ap, slope_window=(ap - 0.15, 1.15), p=pr.p, s=pr.s)
    rep.details["n_nodes"] = n_nodes
    return rep


# ----------------------------------------------------------- stabilization


def check_stabilization(
    config: Optional[CheckConfig] = None,
    g_inf=None,
    h=None,
    T: float = 10.0,
    dt: float = 0.01,
    u0=None,
    rel_tol: float = 1e-3,
    transient: float = 0.2,
    noise: float = 0.0,
) -> VerifyReport:
    """Distance ``||u_n^{m+1} - u_inf^{m+1}||`` under ``g = g_inf + e^{-t} h``.

    The distance must be nonincreasing (up to ``noise`` times the
    reference norm) after the first ``transient`` fraction of steps and end
    below ``rel_tol`` times ``||u_inf^{m+1}||``. The margin is relative to
    that reference norm.
    """
    config = config or CheckConfig()
    grid, kernel = config.setup()
    pr, m = config.params, config.params.m
    opts = config.opts.with_(grad_tol=min(config.opts.grad_tol, 1e-13))
    n = grid.n_nodes
    g_inf = np.full(n, 1.0) if g_inf is None else np.asarray(g_inf, dtype=float)
    h = np.prod(np.sin(np.pi * grid.nodes / grid.box_lengths), axis=1) if h is None else np.asarray(h, dtype=float)
    if np.any(g_inf + np.minimum(h, 0.0) < 0):
        raise ValueError("g_inf + e^{-t} h must stay nonnegative")
    u_inf = solve_P7(g_inf, pr, grid, kernel, opts)
    if u0 is None:
        u0 = 0.5 * u_inf
    n0 = int(round(T / dt))

    def source(t, X):
        return g_inf + np.exp(-t) * h

    prob = EvolutionProblem(T, n0, source, u0, pr, grid, kernel)
    traj = evolve(prob, opts)
    ref = _vnorm(u_inf, grid, m)
    dist = np.array([l2_norm(np.abs(u) ** (m + 1) - u_inf ** (m + 1), grid) for u in traj.states])
    if not traj.complete:
        return _report("stabilization", -math.inf, {"status": traj.status})
    start = int(math.floor(transient * n0))
    rises = np.diff(dist[start:])
    mono_margin = noise * ref - float(rises.max()) if rises.size else 0.0
    term_margin = rel_tol * ref - float(dist[-1])
    # accretivity against the stationary trajectory bounds the distance as well
    bound = dist[0] + np.concatenate([[0.0], np.cumsum([prob.dt * l2_norm(time_average_g(prob, k) - g_inf, grid) for k in range(1, n0 + 1)])])
    return _report(
        "stabilization",
        min(mono_margin / max(ref, 1e-300), term_margin / max(ref, 1e-300)),
        {
            "m": m,
            "p": pr.p,
            "T": T,
            "dt": dt,
            "reference_norm": ref,
            "initial_distance": float(dist[0]),
            "terminal_distance": float(dist[-1]),
            "terminal_relative": float(dist[-1] / ref),
            "max_rise_after_transient": float(rises.max()) if rises.size else 0.0,
            "bound_margin": float(np.min(bound - dist)),
        },
    )


# -------------------------------------------------------------- convexity


def _second_differences(profile):
    vals = np.array([v for _, v in profile])
    return vals[:-2] - 2 * vals[1:-1] + vals[2:], vals


def check_ray_convexity(
    n_pairs: int,
    seed: int,
    r: float,
    p: float,
    grid: Grid,
    kernel: NonlocalKernel,
    tol: float = 1e-10,
    n_samples: int = 21,
) -> VerifyReport:
    """Convexity of ``theta -> W((1 - theta) w1 + theta w2)``, ``W(w) = E(w^{1/(r+1)})``.

    All profiles need second differences ``>= -tol * max|profile|``. If
    ``r + 1 = p`` the profile of a proportional pair must be affine (relative
    flatness ``<= tol``); otherwise non-proportional pairs must have strictly
    positive second differences.
    """
    if not 0 < r <= p - 1:
        raise ValueError(f"r must lie in (0, p - 1], got {r}")
    rng = make_rng(seed)
    n = grid.n_nodes
    homogeneous = abs(r + 1 - p) < 1e-12
    worst_convex = math.inf
    worst_flat = 0.0
    min_strict = math.inf
    for _ in range(n_pairs):
        w1 = rng.uniform(0.1, 1.0, n)
        w2 = rng.uniform(0.1, 1.0, n)
        c = rng.uniform(0.2, 5.0)
        d2, vals = _second_differences(convexity_profile(w1, w2, r, grid, kernel, p, n_samples))
        scale = float(np.max(np.abs(vals)))
        worst_convex = min(worst_convex, float(d2.min()) / scale)
        min_strict = min(min_strict, float(d2.min()) / scale)
        d2p, valsp = _second_differences(convexity_profile(w1, c * w1, r, grid, kernel, p, n_samples))
        scalep = float(np.max(np.abs(valsp)))
        worst_convex = min(worst_convex, float(d2p.min()) / scalep)
        worst_flat = max(worst_flat, float(np.max(np.abs(d2p))) / scalep)
    margin = worst_convex + tol
    details = {
        "r": r,
        "p": p,
        "pairs": n_pairs,
        "tolerance": tol,
        "min_relative_second_difference": worst_convex,
        "min_strict_second_difference": min_strict,
        "proportional_flatness": worst_flat,
        "r_plus_1_equals_p": homogeneous,
    }
    if homogeneous:
        margin = min(margin, tol - worst_flat)
    else:
        margin = min(margin, min_strict)
    return _report("ray_convexity", margin, details)


DEFAULT_CONVEXITY_CASES = ((2.0, 1.0), (2.5, 0.4), (3.0, 2.0), (3.0, 1.0))


# ------------------------------------------------------------------ suites


def run_suite(suite: str, config: Optional[CheckConfig] = None, seed: int = 0) -> list:
    """Reports of one suite (or ``"all"``) in a fixed order."""
    config = config or CheckConfig()
    names = SUITES if suite == "all" else (suite,)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite {unknown[0]!r}")
    pr = config.params
    jobs = []
    for name in names:
        if name == "gradients":
            cfgs = list(DEFAULT_GRADIENT_CONFIGS)
            if (pr.p, pr.m, 16) not in cfgs:
                cfgs.append((pr.p, pr.m, 16))
            jobs.append(lambda c=cfgs: check_gradient_consistency(c, seed=seed, s=pr.s))
        elif name == "contraction":
            jobs.append(lambda: check_stationary_contraction(20, seed, config))
        elif name == "accretivity":
            jobs.append(lambda: check_parabolic_accretivity(config, seed=seed))
        elif name == "comparison":
            jobs.append(lambda: check_comparison(config, seed=seed))
        elif name == "envelope":
            jobs.append(lambda: envelope_of_limit_solution(config))
        elif name == "stabilization":
            jobs.append(lambda: check_stabilization(config))
        elif name == "convexity":
            grid, _ = config.setup(16)

            def conv():
                out = []
                for p, r in DEFAULT_CONVEXITY_CASES:
                    kern = assemble_kernel(grid, replace(pr, p=p))
                    out.append(check_ray_convexity(50, seed, r, p, grid, kern))
                return out

            jobs.append(conv)
    results = _pmap(lambda job: job(), jobs, config.threads)
    flat = []
    for res in results:
        flat.extend(res if isinstance(res, list) else [res])
    return flat
