import math
from fractions import Fraction

import numpy as np
import pytest

from randmap.asymptotics import (
    AlphaInputs,
    FitError,
    OutOfRangeError,
    alpha_bounds_check,
    constants_report,
    fit_sqrt_law,
    lambda_pmf_asym,
    rho_paper_constant,
    rho_series_constant,
    total_progeny_asym,
)
from randmap.branching import borel_tanner_pmf
from randmap.exact import lambda_pmf_exact


# ── the two candidate constants ───────────────────────────────────────


def test_rho_paper_value():
    v = rho_paper_constant()
    assert v == pytest.approx(1.1803594222751574, abs=1e-12)
    assert 0 < v < 2


def test_rho_paper_closed_form_identity():
    alt = (1.0 / (2.0 * math.pi)) * (4.0 * math.pi**2 / 3.0 - 827.0 / 144.0)
    assert abs(rho_paper_constant() - alt) < 1e-12


def test_series_sum_matches_zeta_decomposition():
    # each sub-series sum_{k>=0} 1/(k+m)^2 equals zeta(2) minus its head
    zeta2 = math.pi**2 / 6.0
    heads = {m: sum(Fraction(1, j * j) for j in range(1, m)) for m in (2, 3, 4, 5)}
    expected = (
        (zeta2 - float(heads[2]))
        + 3 * (zeta2 - float(heads[3]))
        + 3 * (zeta2 - float(heads[4]))
        + (zeta2 - float(heads[5]))
    )
    closed = 4.0 * math.pi**2 / 3.0 - 1477.0 / 144.0
    assert expected == pytest.approx(closed, abs=1e-12)
    res = rho_series_constant(1e-10)
    assert res.series_sum == pytest.approx(closed, abs=1e-10)
    assert res.tail_bound <= 1e-10


def test_series_value_and_discrepancy():
    res = rho_series_constant(1e-9)
    assert res.value == pytest.approx(0.4619516930409, abs=1e-9)
    # the printed closed form and the recomputed series disagree: surfaced,
    # never averaged away
    assert abs(rho_paper_constant() - res.value) > 0.7


def test_series_stable_under_doubling():
    a = rho_series_constant(1e-9)
    b = rho_series_constant(1e-9 / 8)  # roughly doubles the term count
    assert b.terms_used > a.terms_used
    assert abs(a.value - b.value) <= a.tail_bound + b.tail_bound


def test_series_rejects_bad_tol():
    with pytest.raises(ValueError):
        rho_series_constant(0.0)


def test_constants_report_fields():
    rep = constants_report()
    assert rep["bracket_printed"] == "827/144"
    assert rep["bracket_recomputed"] == "1477/144"
    assert rep["rho_paper"] == pytest.approx(1.18035942, abs=1e-7)
    assert rep["rho_series"] == pytest.approx(0.46195169, abs=1e-7)
    assert rep["tail_bound"] < 1e-9


# ── bulk asymptotics ──────────────────────────────────────────────────


def test_lambda_asym_point_value():
    assert lambda_pmf_asym(10**4, 100) == pytest.approx(math.exp(-0.5) / 100.0, rel=1e-12)


def test_lambda_asym_domain():
    with pytest.raises(OutOfRangeError):
        lambda_pmf_asym(10**4, 2)  # z = 0.02 < n^-0.25 = 0.1
    with pytest.raises(OutOfRangeError):
        lambda_pmf_asym(10**4, 10**4)


def test_lambda_asym_matches_exact_within_5pct():
    n = 10**4
    worst = 0.0
    for N in range(50, 301, 10):
        exact = float(lambda_pmf_exact(n, N))
        rel = abs(lambda_pmf_asym(n, N) / exact - 1.0)
        worst = max(worst, rel)
    assert worst <= 0.05
    # measured headroom: about 3% at z = 3
    assert worst == pytest.approx(0.03, abs=0.01)


def test_lambda_asym_peaks_near_z_one():
    n = 10**4
    values = {N: lambda_pmf_asym(n, N) for N in range(60, 200, 5)}
    best = max(values, key=values.get)
    assert abs(best / math.sqrt(n) - 1.0) <= 0.1


def test_progeny_asym_identity_with_lambda_asym():
    n = 10**4
    for N in (60, 100, 250):
        lhs = total_progeny_asym(n, N) * n * math.sqrt(2.0 * math.pi)
        rhs = lambda_pmf_asym(n, N) * math.sqrt(n)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_progeny_asym_scales_inverse_n():
    a = total_progeny_asym(10**4, 100)
    b = total_progeny_asym(4 * 10**4, 200)  # same z = 1
    assert a / b == pytest.approx(4.0, rel=1e-12)


def test_progeny_asym_vs_borel_tanner():
    # verified behaviour: within 5% for z up to ~2.8 at n = 10^4, but the
    # bulk formula at the conditioning point n + N drifts to ~6% at z = 3
    n = 10**4
    ratios = {}
    for N in range(50, 301, 10):
        bt = borel_tanner_pmf(N, n + N)
        ratios[N] = bt / total_progeny_asym(n, N)
    for N, r in ratios.items():
        if N <= 280:
            assert 0.95 <= r <= 1.05
    assert ratios[300] == pytest.approx(1.0602, abs=0.002)


# ── Laplace-kernel bounds ─────────────────────────────────────────────


def test_alpha_bounds_on_grid():
    thetas = [s * 10.0**e for e in np.linspace(-4, 2, 13) for s in (1.0, -1.0)]
    for t in (100, 1000):
        for theta in thetas:
            rep = alpha_bounds_check(AlphaInputs(theta=theta, t=t, n=10**6))
            assert rep.re_alpha_positive, (theta, t)
            assert rep.alpha_within_cap, (theta, t)
            assert rep.scalar_within_bounds, (theta, t)
            assert rep.inputs.beta.real > 0.0


def test_alpha_scalar_lower_bound_tight_at_zero():
    xs = [1e-9, 1e-6, 1e-3]
    for x in xs:
        ratio = x / -math.expm1(-x)
        assert 1.0 <= ratio <= 1.0 + x


def test_alpha_large_u_is_beta_magnitude():
    # for large u, alpha ~ beta so |alpha| t / u -> sqrt(2), well under 3(u+1)
    a = AlphaInputs(theta=50.0, t=5000, n=10**4)
    assert a.u > 30
    rep = alpha_bounds_check(a)
    assert rep.alpha_abs * a.t / a.u == pytest.approx(math.sqrt(2.0), rel=1e-6)
    assert rep.alpha_abs < 0.5 * rep.alpha_cap


def test_alpha_rejects_zero_theta():
    with pytest.raises(OutOfRangeError):
        AlphaInputs(theta=0.0, t=10, n=100)


# ── sqrt-n fit ────────────────────────────────────────────────────────


def synthetic_rows(c, b, ns, samples, seed):
    rng = np.random.default_rng(seed)
    rows = []
    for n in ns:
        p = (c + b / math.sqrt(n)) / math.sqrt(n)
        hits = rng.binomial(samples, p)
        p_hat = hits / samples
        se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / samples)
        rows.append((n, p_hat, se))
    return rows


def test_fit_recovers_synthetic_constant():
    rows = synthetic_rows(0.5, 3.0, [10**3, 4 * 10**3, 10**4, 4 * 10**4], 10**6, 2)
    fit = fit_sqrt_law(rows)
    assert abs(fit.c - 0.5) <= 2.0 * fit.c_stderr + 0.02
    assert abs(fit.b - 3.0) <= 4.0 * fit.b_stderr + 0.5
    assert np.max(np.abs(fit.residuals)) < 4.0


def test_fit_flat_model_is_weighted_mean():
    rows = [(100, 0.05, 0.001), (400, 0.025, 0.001), (1600, 0.0125, 0.001)]
    # p sqrt(n) = 0.5 exactly for each row: c must be 0.5, b must be ~0
    fit = fit_sqrt_law(rows)
    assert fit.c == pytest.approx(0.5, abs=1e-9)
    assert fit.b == pytest.approx(0.0, abs=1e-6)


def test_fit_rejects_degenerate_designs():
    with pytest.raises(FitError):
        fit_sqrt_law([(100, 0.1, 0.01), (100, 0.1, 0.01), (100, 0.1, 0.01)])
    with pytest.raises(FitError):
        fit_sqrt_law([(100, 0.1, 0.01), (200, 0.1, 0.01)])
    with pytest.raises(FitError):
        fit_sqrt_law([(100, 0.1, 0.0), (200, 0.1, 0.01), (400, 0.1, 0.01)])
