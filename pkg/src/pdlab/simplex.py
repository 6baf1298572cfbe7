"""The simplex, the alpha = 1/2 projection density and related functions.

Points of the d-dimensional simplex are stored as arrays whose last axis
holds ``x_1..x_d``; the remainder coordinate ``x_{d+1} = 1 - sum(x)`` is
always derived. All densities are evaluated in log space because the
``x_i**(-3/2)`` factors overflow near the boundary.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import polygamma

from .errors import DomainError, SingularityError
from .numerics import QuadratureSpec, RngStream, integrate_1d, log_gamma

INTERIOR_CUTOFF = 1e-12


@dataclass(frozen=True)
class SimplexPoint:
    """A point ``x`` of the simplex with implicit remainder coordinate."""

    x: tuple

    def __post_init__(self):
        arr = np.asarray(self.x, dtype=float).ravel()
        if arr.size < 1:
            raise DomainError("a simplex point needs d >= 1 coordinates")
        if np.any(arr < 0) or arr.sum() > 1 + 1e-12:
            raise DomainError(f"{arr} is not in the simplex")
        object.__setattr__(self, "x", tuple(float(v) for v in arr))

    @property
    def d(self) -> int:
        return len(self.x)

    @property
    def remainder(self) -> float:
        return max(0.0, 1.0 - sum(self.x))

    def full(self) -> np.ndarray:
        return np.append(np.asarray(self.x), self.remainder)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.x, dtype=dtype)


@dataclass(frozen=True)
class ModelParams:
    """Parameters ``(theta, p_1..p_{d+1})`` of the projection measure (alpha = 1/2)."""

    theta: float
    p: tuple

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).ravel()
        if not self.theta > -0.5:
            raise DomainError("theta must exceed -1/2")
        if p.size < 2:
            raise DomainError("p needs d + 1 >= 2 entries")
        if np.any(p <= 0):
            raise DomainError("base probabilities must be positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise DomainError(f"base probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "p", tuple(float(v) for v in p))
        object.__setattr__(self, "theta", float(self.theta))

    @classmethod
    def uniform(cls, theta, d):
        return cls(theta, tuple(np.full(d + 1, 1.0 / (d + 1))))

    @property
    def d(self) -> int:
        return len(self.p) - 1

    @property
    def kappa(self) -> float:
        """Exponent ``theta + (d + 1)/2`` of the denominator sum."""
        return self.theta + 0.5 * (self.d + 1)

    @property
    def parr(self) -> np.ndarray:
        return np.asarray(self.p)

    @property
    def log_norm(self) -> float:
        d = self.d
        return (log_gamma(self.kappa) + float(np.sum(np.log(self.parr)))
                - 0.5 * d * np.log(np.pi) - log_gamma(self.theta + 0.5))


@dataclass(frozen=True)
class DirichletParams:
    alphas: tuple

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float).ravel()
        if a.size < 2 or np.any(a <= 0):
            raise DomainError("Dirichlet parameters must be positive, at least two")
        object.__setattr__(self, "alphas", tuple(float(v) for v in a))

    @classmethod
    def matched(cls, mp: ModelParams):
        """Comparison parameters ``alpha_i = theta + d/2`` for every coordinate."""
        return cls(tuple(np.full(mp.d + 1, mp.theta + 0.5 * mp.d)))

    @property
    def arr(self) -> np.ndarray:
        return np.asarray(self.alphas)


# ---------------------------------------------------------------------------
# coordinates
# ---------------------------------------------------------------------------

def full_coords(x):
    """Append the remainder coordinate: ``(..., d) -> (..., d + 1)``."""
    x = np.asarray(x, dtype=float)
    return np.concatenate([x, 1.0 - x.sum(axis=-1, keepdims=True)], axis=-1)


def barycenter(d):
    return np.full(d, 1.0 / (d + 1))


def _interior_full(x, d_expected=None, cutoff=INTERIOR_CUTOFF):
    X = full_coords(x)
    if d_expected is not None and X.shape[-1] != d_expected + 1:
        raise DomainError(f"point has {X.shape[-1] - 1} coordinates, expected {d_expected}")
    if np.any(X < cutoff):
        raise SingularityError("point on or within the interior cutoff of the simplex boundary")
    return X


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def log_density_mu_full(X, mp: ModelParams, logX=None):
    """Log projection density from full coordinates, no boundary check.

    ``logX`` may be supplied when the logs are known more accurately than
    ``log(X)`` (e.g. from a logit parametrisation).
    """
    X = np.asarray(X, dtype=float)
    if logX is None:
        logX = np.log(X)
    logp2 = 2.0 * np.log(mp.parr)
    logS = np.logaddexp.reduce(logp2 - logX, axis=-1)
    return mp.log_norm - 1.5 * logX.sum(axis=-1) - mp.kappa * logS


def log_density_mu(x, mp: ModelParams):
    """Log density of the projection measure at interior points ``x``."""
    X = _interior_full(x, mp.d)
    out = log_density_mu_full(X, mp)
    return float(out) if np.ndim(out) == 0 else out


def log_density_dirichlet(x, dp: DirichletParams):
    a = dp.arr
    X = full_coords(x)
    if X.shape[-1] != a.size:
        raise DomainError("dimension mismatch between point and Dirichlet parameters")
    if np.any(X < INTERIOR_CUTOFF) and np.any(a < 1):
        raise SingularityError("Dirichlet density singular on the boundary")
    with np.errstate(divide="ignore"):
        logX = np.log(X)
    const = log_gamma(a.sum()) - float(np.sum(log_gamma(a)))
    out = const + np.sum(np.where(a == 1.0, 0.0, (a - 1.0) * logX), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def log_perturbation_W(x, mp: ModelParams, dp: DirichletParams | None = None):
    """``W`` with ``exp(W) * mu = Dirichlet(alphas)``, i.e. the log density ratio."""
    dp = dp or DirichletParams.matched(mp)
    _interior_full(x, mp.d)
    return log_density_dirichlet(x, dp) - log_density_mu(x, mp)


def phi(x):
    """Localising function ``sum_k x_k**-2`` over all d + 1 coordinates.

    Returns ``+inf`` on the boundary rather than raising.
    """
    X = full_coords(x)
    with np.errstate(divide="ignore"):
        out = np.where(np.any(X <= 0, axis=-1), np.inf, np.sum(np.where(X > 0, X, 1.0) ** -2.0, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def in_sublevel(x, s):
    """Membership of the sublevel set ``D_s = {phi <= s}``."""
    return phi(x) <= s


def min_phi(d):
    """Minimum of ``phi`` over the simplex, attained at the barycenter."""
    return float((d + 1) ** 3)


def default_s0(d):
    """Start of the asymptotic regime used by the scans."""
    return 10.0 * min_phi(d)


# ---------------------------------------------------------------------------
# expectations by quadrature (d = 1, 2)
# ---------------------------------------------------------------------------

def expect_mu(func, mp: ModelParams, rel_tol=1e-10, abs_tol=1e-12, max_subdivisions=4000):
    """``mu(func)`` by (iterated) quadrature for d in {1, 2}.

    ``func`` receives full coordinates ``(..., d + 1)`` and must return an
    array of the leading shape. Pass ``func=None`` to integrate the density
    itself (normalisation check).
    """
    d = mp.d
    e_face = mp.theta - 0.5      # density ~ x_i**(theta - 1/2) near a face
    if func is None:
        def func(X):
            return np.ones(X.shape[:-1])

    if d == 1:
        spec = QuadratureSpec(abs_tol, rel_tol, max_subdivisions, (e_face, e_face))

        def integrand(t, s):
            X = np.stack([t, s], axis=-1)
            return func(X) * np.exp(log_density_mu_full(X, mp))

        return integrate_1d(integrand, 0.0, 1.0, spec, offsets=True)

    if d == 2:
        inner_spec = QuadratureSpec(abs_tol * 1e-2, rel_tol * 1e-1, max_subdivisions,
                                    (mp.theta, mp.theta))
        outer_spec = QuadratureSpec(abs_tol, rel_tol, max_subdivisions, (e_face, e_face))

        def inner(x1, rest):
            def g(u, v):
                X = np.stack([np.full_like(u, x1), u, v], axis=-1)
                return func(X) * np.exp(log_density_mu_full(X, mp))
            val, _ = integrate_1d(g, 0.0, rest, inner_spec, offsets=True)
            return val

        def outer(t, s):
            return np.array([inner(a, b) for a, b in zip(t, s)])

        return integrate_1d(outer, 0.0, 1.0, outer_spec, offsets=True)

    raise DomainError("quadrature expectations are implemented for d <= 2 only")


# ---------------------------------------------------------------------------
# MCMC
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainConfig:
    """Random-walk Metropolis settings; ``n_steps`` counts burn-in steps too.

    ``step_scale=None`` uses ``2.4 / sqrt(d)`` in logit coordinates, widened
    by ``sqrt(trigamma(theta + d/2) / trigamma(1 + d/2))`` to follow the
    logit spread as theta changes; acceptance stays in 0.35-0.55 for
    d <= 10 and theta in [-1/4, 5].
    """

    n_steps: int
    burn_in: int = 0
    step_scale: float | None = None
    n_chains: int = 1
    thin: int = 1


@dataclass
class McmcResult:
    samples: np.ndarray          # (n, d), chain-major order
    acceptance_rate: float
    n_chains: int


def _log_sigmoid(z):
    return -np.logaddexp(0.0, -z)


def stick_logit_to_logx(z):
    """Map ``z in R^d`` to log full coordinates via stick-breaking logits.

    Returns ``(logX, logjac)`` where ``logjac`` is ``log |dx/dz|``.
    """
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    lv = _log_sigmoid(z)
    l1mv = _log_sigmoid(-z)
    cum = np.cumsum(l1mv, axis=-1)
    before = np.concatenate([np.zeros(z.shape[:-1] + (1,)), cum[..., :-1]], axis=-1)
    logX = np.concatenate([lv + before, cum[..., -1:]], axis=-1)
    weights = np.arange(d - 1, -1, -1, dtype=float)
    logjac = np.sum(lv + l1mv + weights * l1mv, axis=-1)
    return logX, logjac


def x_to_stick_logit(x):
    X = full_coords(x)
    d = X.shape[-1] - 1
    rem = 1.0 - np.concatenate([np.zeros(X.shape[:-1] + (1,)), np.cumsum(X[..., :-1], axis=-1)[..., :-1]], axis=-1)
    v = X[..., :d] / rem
    return np.log(v) - np.log1p(-v)


def sample_mu_mcmc(mp: ModelParams, chain: ChainConfig, rng: RngStream) -> McmcResult:
    """Random-walk Metropolis for the projection measure.

    Chains move in unconstrained stick-breaking logit coordinates, with the
    Jacobian folded into the target, and run vectorised side by side. The
    returned samples are ordered chain by chain, which makes chains the
    natural batches for standard errors.
    """
    if chain.n_steps < chain.burn_in:
        raise DomainError("chain length must be at least the burn-in")
    if chain.n_chains < 1 or chain.thin < 1:
        raise DomainError("n_chains and thin must be >= 1")
    d = mp.d
    m = chain.n_chains
    z = x_to_stick_logit(barycenter(d))[None, :] + 0.1 * rng.normal((m, d))

    def log_target(z):
        logX, logjac = stick_logit_to_logx(z)
        return log_density_mu_full(np.exp(logX), mp, logX=logX) + logjac

    scale = chain.step_scale
    if scale is None:
        scale = 2.4 / np.sqrt(d) * np.sqrt(polygamma(1, mp.theta + d / 2) / polygamma(1, 1 + d / 2))
    lp = log_target(z)
    kept = []
    accepted = 0
    proposals = 0
    for step in range(chain.n_steps):
        prop = z + scale * rng.normal((m, d))
        lp_prop = log_target(prop)
        acc = np.log(rng.uniform(m)) < lp_prop - lp
        z = np.where(acc[:, None], prop, z)
        lp = np.where(acc, lp_prop, lp)
        if step >= chain.burn_in:
            accepted += int(acc.sum())
            proposals += m
            if (step - chain.burn_in) % chain.thin == 0:
                kept.append(np.exp(stick_logit_to_logx(z)[0][:, :d]))
    if kept:
        samples = np.stack(kept, axis=1).reshape(-1, d)
    else:
        samples = np.empty((0, d))
    rate = accepted / proposals if proposals else float("nan")
    if proposals and not 0.1 <= rate <= 0.7:
        warnings.warn(f"MCMC acceptance rate {rate:.3f} outside [0.1, 0.7]; retune step_scale",
                      RuntimeWarning, stacklevel=2)
    return McmcResult(samples, rate, m)
