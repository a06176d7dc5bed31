"""Model parameters and their admissibility checks."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional


class ParamsError(ValueError):
    """Raised when a parameter tuple violates a hard arithmetic constraint."""


@dataclass(frozen=True)
class ModelParams:
    """Exponents and weights of the mixed local/nonlocal model.

    ``p`` is the integrability exponent of both diffusion terms, ``s`` the
    fractional order, ``m`` the degeneracy exponent of the time derivative,
    ``delta`` and ``gamma`` the exponents of the singular source
    ``m d(x)^-gamma u^delta``, ``vartheta`` the exponent of the barrier
    problem and ``d_bold`` the integrability exponent paired with ``gamma``
    (``None`` means ``N + 1``).
    """

    p: float = 2.0
    s: float = 0.5
    m: float = 0.0
    delta: float = 0.0
    gamma: float = 0.0
    vartheta: Optional[float] = None
    d_bold: Optional[float] = None

    @property
    def alpha_prime(self) -> float:
        """Barrier boundary exponent ``p / (p - 1 + vartheta)``."""
        if self.vartheta is None:
            return float("nan")
        return self.p / (self.p - 1.0 + self.vartheta)

    @property
    def sp(self) -> float:
        return self.s * self.p

    def resolved_d_bold(self, dim: int) -> float:
        return float(dim + 1) if self.d_bold is None else float(self.d_bold)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Finding:
    name: str
    status: str  # "pass" | "warn" | "fail"
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple

    @property
    def ok(self) -> bool:
        return all(f.status != "fail" for f in self.findings)

    @property
    def failures(self) -> list:
        return [f for f in self.findings if f.status == "fail"]

    @property
    def warnings(self) -> list:
        return [f for f in self.findings if f.status == "warn"]

    def to_list(self) -> list:
        return [asdict(f) for f in self.findings]


def _finite(x) -> bool:
    try:
        return x == x and abs(x) != float("inf")
    except TypeError:
        return False


def validate(params: ModelParams, grid_dim: int = 1, barrier: bool = True) -> ValidationReport:
    """Report every admissibility constraint individually.

    Violations of ``p > 1``, ``0 < s < 1``, ``m >= 0`` and ``m < p - 1`` are
    failures. Hypotheses that only matter for the analysis (``N > p``,
    ``d_bold > N``, ranges of ``delta``/``gamma`` and the barrier window)
    produce warnings.
    """
    out = []

    def add(name, ok, msg, hard):
        status = "pass" if ok else ("fail" if hard else "warn")
        out.append(Finding(name, status, msg))

    p, s, m = params.p, params.s, params.m
    fields_ok = all(_finite(v) for v in (p, s, m, params.delta, params.gamma))
    add("finite", fields_ok, "p, s, m, delta, gamma are finite", True)
    if not fields_ok:
        return ValidationReport(tuple(out))

    add("p>1", p > 1, f"p = {p!r} must exceed 1", True)
    add("s_in_(0,1)", 0 < s < 1, f"s = {s!r} must lie in (0, 1)", True)
    add("m>=0", m >= 0, f"m = {m!r} must be nonnegative", True)
    add("m<p-1", m < p - 1, f"m = {m!r} must be below p - 1 = {p - 1!r}", True)
    add("N>p", grid_dim > p, f"N = {grid_dim} > p = {p!r} is assumed by the analysis", False)

    d_bold = params.resolved_d_bold(grid_dim)
    add("d_bold>N", d_bold > grid_dim, f"d_bold = {d_bold!r} should exceed N = {grid_dim}", False)
    if m > 0:
        add(
            "delta_in_(0,m)",
            0 < params.delta < m,
            f"delta = {params.delta!r} should lie in (0, m = {m!r})",
            False,
        )
        lhs = 2 * params.delta - d_bold * params.gamma
        add(
            "2delta-d*gamma>2m-1",
            lhs > 2 * m - 1,
            f"2 delta - d_bold gamma = {lhs!r} should exceed 2m - 1 = {2 * m - 1!r}",
            False,
        )
    if barrier:
        add(
            "p(1-s)<1",
            p * (1 - s) < 1,
            f"p(1 - s) = {p * (1 - s)!r} should be below 1 for the barrier construction",
            False,
        )
        vt = params.vartheta
        if vt is None or not _finite(vt):
            add("vartheta_set", False, "vartheta is not set; barrier exponent undefined", False)
        else:
            lo = 1 + p * (1 - s) / s
            hi = 2 + 1 / (p - 1) if p > 1 else float("inf")
            add(
                "vartheta_window",
                lo < vt < hi,
                f"vartheta = {vt!r} should lie in ({lo!r}, {hi!r})",
                False,
            )
            ap = params.alpha_prime
            add(
                "alpha_prime_in_(0,s)",
                0 < ap < s,
                f"alpha' = {ap!r} should lie in (0, s = {s!r})",
                False,
            )
    return ValidationReport(tuple(out))


def require_valid(params: ModelParams, grid_dim: int = 1) -> ValidationReport:
    """Validate and raise :class:`ParamsError` naming any hard violation."""
    report = validate(params, grid_dim)
    if not report.ok:
        names = "; ".join(f"{f.name}: {f.message}" for f in report.failures)
        raise ParamsError(f"invalid model parameters ({names})")
    return report
