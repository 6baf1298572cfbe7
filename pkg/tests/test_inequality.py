import math
from fractions import Fraction

import numpy as np
import pytest

from pdlab import (ChainConfig, DomainError, ModelParams, RegimeError, RngStream, expect_mu,
                   sample_mu_mcmc)
from pdlab.dirichlet_form import (Polynomial, carre_du_champ, constant, coordinate, generator,
                                  perturbation_function)
from pdlab.inequality import (PerturbationFit, PowerLaw, RateFunction, analytic_limit,
                              beta_perturbation_explicit, boundary_flux, bump_function,
                              cheeger_scan, cheeger_test_function, check_super_poincare,
                              counterexample_scan, edge_profile, fit_rate_constant, h_estimate,
                              ibp_residual, loglog_slope, monomial_family, psi_estimate,
                              random_cubic_family, rate_exponent_localization,
                              rate_exponent_perturbation, rate_exponent_proof, rayleigh_outside,
                              search)
from pdlab.inequality.counterexample import integrand_limit, true_limit
from pdlab.simplex import log_density_mu_full


@pytest.fixture(scope="module")
def samples_d1():
    mp = ModelParams(1.0, [0.5, 0.5])
    return mp, sample_mu_mcmc(mp, ChainConfig(2200, 200, n_chains=50), RngStream(31)).samples


# ---------------------------------------------------------------- exponents

def test_exponent_examples():
    assert rate_exponent_localization(1, 2) == pytest.approx(9 + 3 / 7)
    assert rate_exponent_localization(0, 1) == pytest.approx(0.5 + 3 / 7)
    assert rate_exponent_perturbation(1, 2) == 4.5
    assert rate_exponent_perturbation(0, 1) == 0.25
    assert rate_exponent_perturbation(1, 2) < rate_exponent_localization(1, 2)
    assert rate_exponent_proof(1, 2) == 9.0


@pytest.mark.parametrize("theta, d", [(Fraction(-1, 4), 1), (Fraction(0), 1), (Fraction(1), 1),
                                      (Fraction(1, 2), 2), (Fraction(1), 2), (Fraction(2), 3)])
def test_exponents_exact_rationals(theta, d):
    loc = rate_exponent_localization(theta, d)
    per = rate_exponent_perturbation(theta, d)
    assert isinstance(loc, Fraction) and isinstance(per, Fraction)
    assert loc == (2 * theta + d) * d + (theta + Fraction(d, 2) - 1) + Fraction(3, 7)
    assert per == Fraction(1, 2) * ((theta + Fraction(d, 2)) * (2 * d + 1) - 1)
    assert float(loc) == pytest.approx(rate_exponent_localization(float(theta), d))


def test_exponents_monotone_and_validation():
    th = np.linspace(-0.4, 5, 30)
    for fn in (rate_exponent_localization, rate_exponent_perturbation):
        for d in (1, 2, 3):
            v = [fn(t, d) for t in th]
            assert np.all(np.diff(v) > 0)
            assert fn(1.0, d + 1) > fn(1.0, d)
    with pytest.raises(DomainError):
        rate_exponent_perturbation(-0.5, 1)
    with pytest.raises(DomainError):
        rate_exponent_localization(1.0, 1.5)


def test_rate_function():
    b = RateFunction(2.0, 1.5)
    r = np.logspace(-3, 3, 20)
    assert np.all(np.diff(b(r)) < 0)
    assert b(1.0) == 4.0
    with pytest.raises(DomainError):
        RateFunction(0.0, 1.0)
    with pytest.raises(DomainError):
        b(0.0)


# ---------------------------------------------------------------- harness

def test_constants_plug_in(samples_d1):
    mp, x = samples_d1
    r = np.logspace(-3, 1, 9)
    for c0 in (1.0, -2.5):
        rep = check_super_poincare(constant(c0), mp, RateFunction(1.0, 1.75), r, x)
        assert rep.lhs[0] == pytest.approx(c0**2) and rep.l1_sq[0] == pytest.approx(c0**2)
        assert rep.energy == (0.0, 0.0)
        np.testing.assert_allclose(rep.margins, (rep.beta - 1) * c0**2, rtol=1e-12, atol=1e-12)
        assert rep.violations == 0
        np.testing.assert_allclose(rep.margins_plus_one, rep.margins + 1)


def test_perturbed_constant(samples_d1):
    mp, x = samples_d1
    r = np.logspace(-3, 1, 9)
    beta = RateFunction(1.0, 1.75)
    margins = []
    for eps in (1e-1, 1e-2, 1e-3):
        f = Polynomial([[0], [1]], [1.0, eps])
        margins.append(check_super_poincare(f, mp, beta, r, x).margins)
    errs = [np.max(np.abs(m - (beta(r) - 1))) for m in margins]
    assert errs[2] < errs[1] < errs[0] and errs[2] < 1e-2 * (1 + beta(r).max())


def test_fit_constants_and_family_growth(samples_d1):
    mp, x = samples_d1
    r = np.logspace(-3, 1, 9)
    assert fit_rate_constant([constant(1.0), constant(3.0)], mp, 1.75, r, x) == pytest.approx(1.0)
    small = monomial_family(1)
    big = small + random_cubic_family(1, 10, RngStream(2))
    c_small = fit_rate_constant(small, mp, 1.75, r, x, 50)
    c_big = fit_rate_constant(big, mp, 1.75, r, x, 50)
    assert c_big >= c_small
    with pytest.raises(DomainError):
        fit_rate_constant([], mp, 1.75, r, x)
    with pytest.raises(DomainError):
        check_super_poincare(constant(1.0), mp, RateFunction(1, 1), [], x)


def test_fit_stability_under_sample_doubling():
    mp = ModelParams(1.0, [0.5, 0.5])
    r = np.logspace(-3, 1, 9)
    fam = monomial_family(1) + random_cubic_family(1, 10, RngStream(3))
    cs = []
    for n_steps in (2000, 4000):
        x = sample_mu_mcmc(mp, ChainConfig(n_steps + 200, 200, n_chains=50), RngStream(n_steps)).samples
        cs.append(fit_rate_constant(fam, mp, 1.75, r, x, 50, plus_one=True))
    assert np.isfinite(cs).all()
    assert abs(cs[1] - cs[0]) <= 0.2 * max(cs)


# ---------------------------------------------------------------- localisation

def test_h_at_barycenter_and_monotone():
    mp = ModelParams(1.0, [0.5, 0.5])
    assert h_estimate(8.0, mp, 16, RngStream(1)) == pytest.approx(0.0, abs=1e-20)
    mp2 = ModelParams.uniform(1.0, 2)
    h = [h_estimate(s, mp2, 64, RngStream(2), iters=100) for s in (100.0, 1e3, 1e4)]
    assert h[0] <= h[1] <= h[2]
    with pytest.raises(DomainError):
        h_estimate(20.0, mp2, 16, RngStream(1))


def test_search_direction_and_bounds():
    # max of x_1 over D_s is attained on the level set; the result is a lower bound
    s = 1000.0
    res = search(lambda x: x[:, 0], 2, s, "inside", True, 64, 100, RngStream(4))
    assert res.ok and 0.5 < res.value < 1.0 and res.x.sum() < 1
    from pdlab import phi
    assert phi(res.x) <= s * (1 + 1e-9)
    res2 = search(lambda x: x[:, 0], 2, s, "outside", False, 64, 100, RngStream(4))
    assert res2.value < 1e-3
    assert loglog_slope([1, 10], [1, -1]) != loglog_slope([1, 10], [1, -1])


def test_cheeger_scan_small_and_rayleigh_bound():
    mp = ModelParams.uniform(1.0, 2)
    s = np.array([300.0, 3000.0])
    scan = cheeger_scan(mp, s, 64, RngStream(5), iters=100)
    assert np.all(scan.a1 > 0) and np.all(scan.lambda_lb >= 0)
    assert set(scan.slopes) == {"a1", "a2", "lambda_lb"}
    x = sample_mu_mcmc(mp, ChainConfig(5000, 500, n_chains=50), RngStream(6)).samples
    for sk, lam in zip(s, scan.lambda_lb):
        q, n_sup = rayleigh_outside(sk, mp, x)
        assert n_sup > 0 and lam <= q


def test_edge_profile_local_laws():
    # along the ray to a face centre the laws are local and settle in for s >= 1e4
    mp = ModelParams.uniform(1.0, 2)
    s = np.logspace(4, 8, 9)
    pts, comp, grad, gen = edge_profile(mp, s)
    assert loglog_slope(s, comp) == pytest.approx(-1 / 8, abs=0.05)
    assert loglog_slope(s, gen) == pytest.approx(3 / 8, abs=0.05)
    from pdlab import phi
    np.testing.assert_allclose(phi(pts), s, rtol=1e-9)


def test_flux_constant_and_d1_closed_form():
    mp = ModelParams(1.0, [0.3, 0.7])
    assert boundary_flux(1e3, mp, constant(2.0)) == 0.0
    mp2 = ModelParams.uniform(1.0, 2)
    assert boundary_flux(1e3, mp2, constant(2.0)) == 0.0
    from scipy.optimize import brentq
    r = 1e4
    f = cheeger_test_function()
    lo = brentq(lambda t: t**-2 + (1 - t) ** -2 - r, 1e-9, 0.5, xtol=1e-16)
    hi = 1 - lo
    want = 0.0
    for t in (lo, hi):
        rho = math.exp(log_density_mu_full(np.array([t, 1 - t]), mp))
        want += t * (1 - t) * 0.25 * t**-0.75 * rho
    assert boundary_flux(r, mp, f) == pytest.approx(want, rel=1e-9)
    with pytest.raises(DomainError):
        boundary_flux(5.0, mp, f)


def test_flux_decreasing_d2():
    mp = ModelParams.uniform(1.0, 2)
    f = cheeger_test_function()
    flux = [boundary_flux(r, mp, f) for r in (1e3, 1e4, 1e5)]
    assert flux[0] > flux[1] > flux[2] > 0


# ---------------------------------------------------------------- perturbation

def test_ibp_equality_needs_factor_two():
    mp = ModelParams(1.0, [0.3, 0.7])
    W = perturbation_function(mp)
    f = bump_function(50.0, Polynomial([[0], [1]], [1.0, 2.0]))

    def residual(k):
        def g(X):
            x = X[..., :-1]
            return carre_du_champ(f, W, x, check=False) + k * f(x) * generator(W, x, mp, check=False)
        return expect_mu(g, mp, rel_tol=1e-9, abs_tol=1e-12)[0]
    assert abs(residual(2.0)) < 1e-7
    assert abs(residual(1.0)) > 1e-3


def test_ibp_monte_carlo_d2():
    mp = ModelParams(1.0, [0.2, 0.3, 0.5])
    x = sample_mu_mcmc(mp, ChainConfig(10000, 1000, n_chains=50), RngStream(7)).samples
    f = bump_function(200.0, Polynomial([[1, 0], [0, 1]], [1.0, -1.0]))
    v, se = ibp_residual(f, mp, x, n_batches=50)
    assert se > 0 and abs(v) < 4 * se


def test_psi_and_sup_exp_W():
    mp = ModelParams.uniform(1.0, 2)
    ests = [psi_estimate(s, mp, n_search=64, rng=RngStream(8), iters=100) for s in (300.0, 3e4)]
    w = [e.sup_exp_W for e in ests]
    assert all(np.isfinite(w)) and max(w) / min(w) <= 2
    assert all(not e.flags for e in ests)
    with pytest.raises(DomainError):
        psi_estimate(10.0, mp)


def synthetic_fit(p=4.5, c2=1e3):
    return PerturbationFit(PowerLaw(1.0, 2.5), PowerLaw(1.0, 7 / 8), PowerLaw(1.0, -1.0),
                           lambda s: 2.0, 1.0, c2, p)


def test_beta_explicit_monotone_and_asymptotics():
    fit = synthetic_fit()
    eps = np.logspace(-12, -2, 21)
    b = np.array([beta_perturbation_explicit(e, fit) for e in eps])
    assert np.all(np.diff(b) < 0)
    # log beta / log(1/eps) tends to p from above; the local slope is already close
    ratio = np.log(b) / np.log(1 / eps)
    assert np.all(ratio > fit.p) and np.all(np.diff(ratio[:10]) > 0)
    assert -loglog_slope(eps[:5], b[:5]) == pytest.approx(fit.p, abs=0.02)
    # dominates c (1 + eps**-p) after fitting the constant
    c = np.min(b / (1 + eps**-fit.p))
    assert c > 0 and np.all(b >= c * (1 + eps**-fit.p))
    proof = beta_perturbation_explicit(1e-6, fit, variant="proof")
    assert proof > beta_perturbation_explicit(1e-6, fit)


def test_beta_explicit_regime_and_validation():
    fit = synthetic_fit(c2=1.0)
    with pytest.raises(RegimeError):
        beta_perturbation_explicit(1.0, fit)
    with pytest.raises(DomainError):
        beta_perturbation_explicit(0.0, fit)
    with pytest.raises(DomainError):
        beta_perturbation_explicit(1e-3, fit, variant="other")
    pl = PowerLaw.fit([1, 10, 100], [2, 20, 200])
    assert pl.a == pytest.approx(1.0) and pl.A == pytest.approx(2.0)


# ---------------------------------------------------------------- counterexample

def test_analytic_limits():
    assert analytic_limit(1.0) == pytest.approx(3 / math.pi, rel=1e-12)
    assert integrand_limit(1.0) == pytest.approx(0.4 / math.pi, rel=1e-12)
    assert true_limit(1.0) == 0.25
    with pytest.raises(DomainError):
        analytic_limit(0.0)


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
def test_counterexample_limits_and_moments(theta):
    scan = counterexample_scan(theta, n_list=range(5, 31))
    assert abs(scan.I[-1] - scan.integrand_limit) < 1e-3
    assert abs(scan.tail_true[-1] - scan.true_limit) < 1e-3
    p = scan.pn
    # Pitman-Yor variance with alpha = 1/2: Var mu(n) = p (1 - p) / (2 (1 + theta))
    exact = (p * p + p * (1 - p) / (2 * (1 + theta))) / (p * (1 + theta * p))
    np.testing.assert_allclose(scan.second_moment, exact, rtol=1e-7)
    # the tail mass stays bounded away from zero: no uniform integrability
    assert np.min(scan.tail_true) > 0.5 * scan.true_limit


def test_counterexample_threshold_and_validation():
    a = counterexample_scan(1.0, 1.0, n_list=[10])
    b = counterexample_scan(1.0, 4.0, n_list=[10])
    assert b.I[0] < a.I[0] and b.tail_true[0] < a.tail_true[0]
    with pytest.raises(DomainError):
        counterexample_scan(0.0)
    with pytest.raises(DomainError):
        counterexample_scan(1.0, pn=lambda n: 0.5 + 0 * np.asarray(n, dtype=float))
    inv = counterexample_scan(1.0, pn=lambda n: 1 / (np.asarray(n, dtype=float) + 1) ** 2,
                              n_list=range(5, 12))
    assert np.all(np.isfinite(inv.I))
