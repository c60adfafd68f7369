"""Closed-form constants, asymptotic laws, and the sqrt-n fit.

The two-highest-trees constant is tracked in both printed forms: the
headline closed form 2 pi/3 - 827/(288 pi), and the value recomputed
from the underlying series, whose bracket totals 1477/144 rather than
the printed 827/144.  The two disagree; both are exposed and the Monte
Carlo experiment arbitrates.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

BRACKET_PRINTED = "827/144"
BRACKET_RECOMPUTED = "1477/144"


class OutOfRangeError(ValueError):
    """An asymptotic formula was evaluated outside its validated range."""


class FitError(RuntimeError):
    """The weighted least-squares fit cannot be performed."""


def rho_paper_constant() -> float:
    """The closed form 2 pi/3 - 827/(288 pi) as printed."""
    return 2.0 * math.pi / 3.0 - 827.0 / (288.0 * math.pi)


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms_used: int
    tail_bound: float
    series_sum: float


def rho_series_constant(tol: float = 1e-9) -> SeriesResult:
    """The same constant recomputed from its defining series.

    S = sum_{k>=0} [1/(k+2)^2 + 3/(k+3)^2 + 3/(k+4)^2 + 1/(k+5)^2],
    summed ascending with compensated accumulation; the remainder is
    replaced by a midpoint-rule integral with a rigorous bound.  The two
    half-range contributions carry factors (1 -+ i)/(4 pi) whose sum is
    the real coefficient 1/(2 pi).
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    terms = max(64, math.ceil((4.0 / (3.0 * tol)) ** (1.0 / 3.0)))
    terms = min(terms, 5 * 10**6)
    offsets = (2, 3, 4, 5)
    weights = (1.0, 3.0, 3.0, 1.0)
    pieces = []
    for k in range(terms):
        pieces.append(sum(w / (k + m) ** 2 for w, m in zip(weights, offsets)))
    partial = math.fsum(pieces)
    tail = sum(w / (terms + m - 0.5) for w, m in zip(weights, offsets))
    tail_err = sum(w / (12.0 * (terms + m - 1.5) ** 3) for w, m in zip(weights, offsets))
    rounding = 8.0 * terms * 2.0**-50
    series_sum = partial + tail
    return SeriesResult(
        value=series_sum / (2.0 * math.pi),
        terms_used=terms,
        tail_bound=tail_err + rounding,
        series_sum=series_sum,
    )


def _bulk_z(n: int, N: int) -> float:
    z = N / math.sqrt(n)
    if not (n**-0.25 < z < 4.0 * math.sqrt(math.log(n))):
        raise OutOfRangeError(
            f"z = N/sqrt(n) = {z:.4g} outside (n^-0.25, 4 sqrt(ln n)) for n = {n}"
        )
    return z


def lambda_pmf_asym(n: int, N: int) -> float:
    """Bulk asymptotic of the cycle-count law: z e^{-z^2/2} / sqrt(n)."""
    z = _bulk_z(n, N)
    return z * math.exp(-z * z / 2.0) / math.sqrt(n)


def total_progeny_asym(n: int, N: int) -> float:
    """Bulk asymptotic of P(total progeny of N founders = n + N).

    Equals z e^{-z^2/2} / (n sqrt(2 pi)); differs from the cycle-count
    asymptotic by the exact factor sqrt(n) / (n sqrt(2 pi)).
    """
    z = _bulk_z(n, N)
    return z * math.exp(-z * z / 2.0) / (n * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class AlphaInputs:
    """Inputs of the Laplace-kernel bound checks.

    beta is the principal square root of -2 i theta / n (positive real
    part for every theta != 0); u = t sqrt(|theta| / n); alpha is
    beta (1 + e^{-t beta}) / (1 - e^{-t beta}).
    """

    theta: float
    t: int
    n: int

    def __post_init__(self):
        if self.theta == 0.0:
            raise OutOfRangeError("theta = 0 makes beta vanish")
        if self.t < 1 or self.n < 1:
            raise ValueError("t and n must be positive")

    @property
    def beta(self) -> complex:
        return cmath.sqrt(-2j * self.theta / self.n)

    @property
    def u(self) -> float:
        return self.t * math.sqrt(abs(self.theta) / self.n)

    @property
    def alpha(self) -> complex:
        tb = self.t * self.beta
        e = cmath.exp(-tb)
        return self.beta * (1.0 + e) / (1.0 - e)


@dataclass(frozen=True)
class AlphaBoundsReport:
    inputs: AlphaInputs
    re_alpha: float
    alpha_abs: float
    alpha_cap: float
    scalar_ratio: float
    re_alpha_positive: bool
    alpha_within_cap: bool
    scalar_within_bounds: bool

    @property
    def all_ok(self) -> bool:
        return self.re_alpha_positive and self.alpha_within_cap and self.scalar_within_bounds


def alpha_bounds_check(a: AlphaInputs) -> AlphaBoundsReport:
    """Check Re(alpha) > 0, |alpha| <= 3(u+1)/t, and the scalar inequality
    1 <= x/(1 - e^{-x}) <= 3(x+1) at x = u."""
    alpha = a.alpha
    u = a.u
    cap = 3.0 * (u + 1.0) / a.t
    if u == 0.0:
        ratio = 1.0
    else:
        ratio = u / -math.expm1(-u) if u < 700 else u
    return AlphaBoundsReport(
        inputs=a,
        re_alpha=alpha.real,
        alpha_abs=abs(alpha),
        alpha_cap=cap,
        scalar_ratio=ratio,
        re_alpha_positive=alpha.real > 0.0,
        alpha_within_cap=abs(alpha) <= cap,
        scalar_within_bounds=1.0 <= ratio <= 3.0 * (u + 1.0),
    )


@dataclass(frozen=True)
class FitResult:
    """Weighted least squares of p_hat sqrt(n) against c + b / sqrt(n)."""

    c: float
    b: float
    c_stderr: float
    b_stderr: float
    residuals: np.ndarray

    def c_interval(self, z: float = 1.96) -> tuple[float, float]:
        return self.c - z * self.c_stderr, self.c + z * self.c_stderr


def fit_sqrt_law(rows) -> FitResult:
    """Fit y(n) = p_hat sqrt(n) to c + b n^{-1/2} by weighted least squares.

    ``rows`` holds (n, p_hat, stderr) triples; weights are the inverse
    variances of y.  At least three distinct n are required so the
    correction term is genuinely constrained.
    """
    rows = list(rows)
    if len({n for n, _, _ in rows}) < 3:
        raise FitError("need at least three distinct n values")
    if any(se <= 0 for _, _, se in rows):
        raise FitError("standard errors must be positive")
    n = np.array([float(r[0]) for r in rows])
    p = np.array([float(r[1]) for r in rows])
    se = np.array([float(r[2]) for r in rows])
    y = p * np.sqrt(n)
    sigma = se * np.sqrt(n)
    x = 1.0 / np.sqrt(n)
    design = np.column_stack([np.ones_like(x), x]) / sigma[:, None]
    target = y / sigma
    gram = design.T @ design
    try:
        cov = np.linalg.inv(gram)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded above
        raise FitError("singular design") from exc
    coef = cov @ design.T @ target
    fitted = coef[0] + coef[1] * x
    residuals = (y - fitted) / sigma
    return FitResult(
        c=float(coef[0]),
        b=float(coef[1]),
        c_stderr=float(math.sqrt(cov[0, 0])),
        b_stderr=float(math.sqrt(cov[1, 1])),
        residuals=residuals,
    )


def constants_report(tol: float = 1e-9) -> dict:
    """Machine-readable record of both candidate constants."""
    series = rho_series_constant(tol)
    return {
        "rho_paper": rho_paper_constant(),
        "rho_series": series.value,
        "S": series.series_sum,
        "tail_bound": series.tail_bound,
        "terms_used": series.terms_used,
        "bracket_printed": BRACKET_PRINTED,
        "bracket_recomputed": BRACKET_RECOMPUTED,
    }
