"""Monte Carlo harness for ``mu(f^2) <= r E(f, f) + beta(r) mu(|f|)^2``.

All three functionals come from one sample set. The margin
``r E + beta mu(|f|)^2 - mu(f^2)`` gets its standard error from the
linearised per-sample contributions
``z_k = r Gamma_k / 2 + 2 beta m1 |f_k| - f_k^2`` (``m1 = mu(|f|)``), batched
when ``n_batches`` is given (use the number of MCMC chains).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..dirichlet_form import Polynomial, SmoothFunction, batch_stderr, carre_du_champ
from ..errors import DomainError
from ..numerics import RngStream
from ..simplex import ModelParams
from .rates import RateFunction


@dataclass
class InequalityReport:
    r_grid: np.ndarray
    lhs: tuple                      # mu(f^2), stderr
    energy: tuple                   # E(f, f), stderr
    l1_sq: tuple                    # mu(|f|)^2, stderr
    beta: np.ndarray
    margins: np.ndarray             # rhs - lhs
    margin_stderr: np.ndarray
    violations: int                 # margins below -2 sigma
    margins_plus_one: np.ndarray    # same with a leading 1 on the right-hand side
    violations_plus_one: int


@dataclass
class _Terms:
    f2: np.ndarray
    af: np.ndarray
    half_gamma: np.ndarray

    @property
    def m1(self):
        return float(self.af.mean())


def _terms(f: SmoothFunction, samples):
    x = np.asarray(samples, dtype=float)
    fv = np.asarray(f(x), dtype=float) * np.ones(len(x))
    return _Terms(fv * fv, np.abs(fv), 0.5 * carre_du_champ(f, f, x, check=False) * np.ones(len(x)))


def _check_inputs(mp, r_grid, samples):
    r = np.atleast_1d(np.asarray(r_grid, dtype=float))
    x = np.asarray(samples, dtype=float)
    if r.size == 0 or x.ndim != 2 or x.shape[0] == 0:
        raise DomainError("r_grid and samples must be non-empty")
    if np.any(r <= 0):
        raise DomainError("r_grid must be positive")
    if x.shape[1] != mp.d:
        raise DomainError("sample dimension does not match the model")
    return r, x


def check_super_poincare(f: SmoothFunction, mp: ModelParams, beta: RateFunction, r_grid, samples,
                         n_batches=None) -> InequalityReport:
    """Margins of the inequality on a grid of r, with propagated stderr."""
    r, x = _check_inputs(mp, r_grid, samples)
    t = _terms(f, x)
    m1 = t.m1
    lhs = (float(t.f2.mean()), batch_stderr(t.f2, n_batches))
    en = (float(t.half_gamma.mean()), batch_stderr(t.half_gamma, n_batches))
    l1 = (m1 * m1, 2 * m1 * batch_stderr(t.af, n_batches))
    b = np.asarray(beta(r), dtype=float).reshape(r.shape)
    margins = r * en[0] + b * l1[0] - lhs[0]
    se = np.array([batch_stderr(rk * t.half_gamma + 2 * bk * m1 * t.af - t.f2, n_batches)
                   for rk, bk in zip(r, b)])
    viol = int(np.sum(margins < -2 * se))
    m_plus = margins + 1.0
    viol_plus = int(np.sum(m_plus < -2 * se))
    return InequalityReport(r, lhs, en, l1, b, margins, se, viol, m_plus, viol_plus)


def _batch_means(v, n_batches):
    if n_batches is None or n_batches >= len(v):
        return v, len(v)
    m = len(v) // n_batches
    return v[: m * n_batches].reshape(n_batches, m).mean(axis=1), n_batches


def _min_c(t: _Terms, r, p, n_batches, plus_one):
    """Smallest c >= 0 with margin(c) + 2 sigma(c) >= 0 for one (f, r)."""
    m1 = t.m1
    w = 1.0 + r ** -p
    a = r * t.half_gamma.mean() - t.f2.mean() + (1.0 if plus_one else 0.0)
    b = w * m1 * m1
    A, k = _batch_means(r * t.half_gamma - t.f2, n_batches)
    B, _ = _batch_means(2 * w * m1 * t.af, n_batches)
    cov = np.cov(np.vstack([A, B])) / k if k > 1 else np.zeros((2, 2))

    def g(c):
        var = cov[0, 0] + 2 * c * cov[0, 1] + c * c * cov[1, 1]
        return a + b * c + 2 * np.sqrt(max(var, 0.0))

    if g(0.0) >= 0:
        return 0.0
    if b <= 0:
        return np.inf
    hi = max(1.0, -a / b)
    while g(hi) < 0:
        hi *= 2
    # g is convex with g(0) < 0, so the root is unique
    return float(brentq(g, 0.0, hi, xtol=1e-14, rtol=1e-12))


def fit_rate_constant(family, mp: ModelParams, p, r_grid, samples, n_batches=None,
                      plus_one=False) -> float:
    """Smallest ``c`` with margin >= -2 sigma for every member and every r.

    Members with exactly zero energy on the samples (constants) also get the
    ``r -> infinity`` constraint ``c >= mu(f^2) / mu(|f|)^2``, so constants
    give ``c = 1``. ``plus_one`` fits the variant with a leading 1 on the
    right-hand side.
    """
    family = list(family)
    if not family:
        raise DomainError("family must be non-empty")
    r, x = _check_inputs(mp, r_grid, samples)
    c = 0.0
    for f in family:
        t = _terms(f, x)
        for rk in r:
            c = max(c, _min_c(t, rk, p, n_batches, plus_one))
        if not plus_one and np.all(t.half_gamma == 0) and t.m1 > 0:
            c = max(c, float(t.f2.mean()) / t.m1**2)
    return c


def monomial_family(d, degree=3):
    """All monomials of total degree <= ``degree`` in ``x_1..x_d`` (constant included)."""
    out = []
    for k in itertools.product(range(degree + 1), repeat=d):
        if sum(k) <= degree:
            name = "*".join(f"x{i + 1}^{e}" for i, e in enumerate(k) if e) or "1"
            out.append(Polynomial([list(k)], [1.0], name=name))
    return out


def random_cubic_family(d, n=20, rng: RngStream | None = None):
    """``n`` cubic polynomials with uniform [-1, 1] coefficients on every monomial."""
    rng = rng or RngStream(0)
    exps = [list(k) for k in itertools.product(range(4), repeat=d) if sum(k) <= 3]
    return [Polynomial(exps, 2 * rng.uniform(len(exps)) - 1, name=f"cubic{j}") for j in range(n)]


def default_family(d, rng: RngStream | None = None, n_random=20):
    return monomial_family(d) + random_cubic_family(d, n_random, rng)
