"""Uniform-integrability scan for ``F_n = mu(n) / sqrt(p_n (1 + theta p_n))``.

For each ``n`` three numbers are reported:

* ``I_n``: the tail integral over ``t >= sqrt(c p_n (1 + theta p_n))`` of the
  closed-form integrand in the classical argument;
* ``tail_true``: the same tail of ``E[F_n^2]`` computed from the d = 1
  projection density with ``p = (p_n, 1 - p_n)``;
* ``second_moment``: the full ``E[F_n^2]`` under that density.

The closed-form integrand tends to ``C t^(1/2) (1-t)^theta`` with
``C = Gamma(theta+3/2) / (pi Gamma(theta+1/2))``, so ``I_n`` converges to
``C B(3/2, theta+1)``; ``analytic_limit`` keeps the closed-form value with
``B(1/2, theta)`` in its place. Under the true density the tail tends to
``1 / (2 (theta + 1))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import AccuracyError, DomainError
from ..numerics import QuadratureSpec, integrate_1d, log_beta, log_gamma
from ..simplex import ModelParams, log_density_mu_full


def geometric_pn(n):
    return 2.0 ** -np.asarray(n, dtype=float)


def analytic_limit(theta):
    """``Gamma(theta+3/2) Gamma(1/2) Gamma(theta) / (pi Gamma(theta+1/2)**2)``."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    lg = log_gamma(theta + 1.5) + log_gamma(0.5) + log_gamma(theta) - 2 * log_gamma(theta + 0.5)
    return math.exp(lg) / math.pi


def integrand_limit(theta):
    """``Gamma(theta+3/2) / (pi Gamma(theta+1/2)) * B(3/2, theta+1)``."""
    lg = log_gamma(theta + 1.5) - log_gamma(theta + 0.5) + log_beta(1.5, theta + 1.0)
    return math.exp(lg) / math.pi


def true_limit(theta):
    """Limit of ``E[F_n^2]`` under the projection law: ``1 / (2 (theta + 1))``."""
    return 0.5 / (theta + 1.0)


@dataclass
class CounterexampleScan:
    theta: float
    c_threshold: float
    n: np.ndarray
    pn: np.ndarray
    I: np.ndarray
    I_err: np.ndarray
    tail_true: np.ndarray
    second_moment: np.ndarray
    analytic_limit: float
    integrand_limit: float
    true_limit: float
    flags: list = field(default_factory=list)


def _closed_form_tail(theta, p, c, spec):
    z = p * (1 + theta * p)
    lo = math.sqrt(c * z)
    if lo >= 1.0:
        return 0.0, 0.0
    logC = log_gamma(theta + 1.5) - log_gamma(theta + 0.5) - math.log(math.pi)

    def f(t, one_minus_t):
        S = p * p / t + (1 - p) ** 2 / one_minus_t
        return np.exp(math.log(p * (1 - p)) + logC + 0.5 * np.log(t) - 1.5 * np.log(one_minus_t)
                      - (theta + 1.5) * np.log(S))

    def g(da, db):
        return f(lo + da, db)

    val, err = integrate_1d(g, lo, 1.0, spec, offsets=True)
    return val / z, err / z


def _true_tail(theta, p, lo, spec):
    mp = ModelParams(theta, [p, 1 - p])
    z = p * (1 + theta * p)

    def g(da, db):
        t = lo + da
        X = np.stack([t, db], axis=-1)
        return t * t * np.exp(log_density_mu_full(X, mp))

    pts = [q for q in (p * p, p) if lo < q < 1.0]
    val, err = integrate_1d(g, lo, 1.0, spec, points=pts or None, offsets=True)
    return val / z


def counterexample_scan(theta, c_threshold=1.0, pn=None, n_list=range(5, 26),
                        rel_tol=1e-10) -> CounterexampleScan:
    """Tail integrals of ``F_n^2`` for each ``n`` in ``n_list``.

    ``pn`` maps an array of n to probabilities (default ``2**-n``). A
    quadrature failure at some n raises :class:`AccuracyError` naming it.
    """
    if not theta > 0:
        raise DomainError("theta must be positive")
    if not c_threshold > 0:
        raise DomainError("c_threshold must be positive")
    n = np.asarray(list(n_list), dtype=int)
    p = np.asarray((pn or geometric_pn)(n), dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise DomainError("p_n must lie in (0, 1)")
    if np.any(np.diff(p) >= 0):
        raise DomainError("p_n must be strictly decreasing")
    spec = QuadratureSpec(abs_tol=1e-300, rel_tol=rel_tol, max_subdivisions=4000,
                          endpoint_exponents=(0.0, theta))
    spec_true = QuadratureSpec(abs_tol=1e-300, rel_tol=rel_tol, max_subdivisions=4000,
                               endpoint_exponents=(theta + 1.5, theta - 0.5))
    I, E, T, M = [], [], [], []
    for k, pk in zip(n, p):
        try:
            v, e = _closed_form_tail(theta, pk, c_threshold, spec)
            lo = math.sqrt(c_threshold * pk * (1 + theta * pk))
            tail = _true_tail(theta, pk, lo, spec_true) if lo < 1 else 0.0
            full = _true_tail(theta, pk, 0.0, spec_true)
        except AccuracyError as err:
            raise AccuracyError(f"quadrature failed at n={k}: {err}", err.estimate, err.error) from err
        I.append(v)
        E.append(e)
        T.append(tail)
        M.append(full)
    return CounterexampleScan(theta, c_threshold, n, p, np.array(I), np.array(E), np.array(T),
                              np.array(M), analytic_limit(theta), integrand_limit(theta),
                              true_limit(theta))
