"""Perturbation quantities for ``W = log(Dirichlet density / mu)``.

``psi(s) = 1/4 sup_{D_s} (Gamma(W, W) + 2 S(W))`` with ``S(W) = k L W``. Since
``E(f, g) = 1/2 mu(Gamma(f, g)) = -mu(f L g)``, the choice ``k = 2`` turns
``int Gamma(f, W) dmu >= -int f S(W) dmu`` into an equality; ``k`` is kept
as a parameter (``s_factor``) so the ``k = 1`` variant can be reported too.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..dirichlet_form import (SmoothFunction, batch_stderr, carre_du_champ, generator,
                              perturbation_function, phi_function)
from ..errors import DomainError, RegimeError
from ..numerics import RngStream
from ..simplex import DirichletParams, ModelParams, min_phi, phi
from .search import search

DEFAULT_S_FACTOR = 2.0


@dataclass
class PsiEstimate:
    s: float
    psi: float
    sup_exp_W: float
    argmax_psi: np.ndarray
    argmax_W: np.ndarray
    flags: list


def psi_integrand(mp: ModelParams, dp: DirichletParams | None = None, s_factor=DEFAULT_S_FACTOR):
    """``x -> 1/4 (Gamma(W, W) + 2 s_factor L W)``."""
    W = perturbation_function(mp, dp)

    def g(x):
        return 0.25 * (carre_du_champ(W, W, x, check=False)
                       + 2.0 * s_factor * generator(W, x, mp, check=False))
    return g


def psi_estimate(s, mp: ModelParams, dp: DirichletParams | None = None, n_search=256,
                 rng: RngStream | None = None, s_factor=DEFAULT_S_FACTOR, iters=200) -> PsiEstimate:
    """Search maxima of the psi integrand and of ``exp(W)`` over ``D_s``.

    Both are lower bounds on the suprema. Derivatives of ``W`` are exact.
    """
    d = mp.d
    if s < min_phi(d) * (1 - 1e-12):
        raise DomainError("s must be at least min phi")
    rng = rng or RngStream(0)
    W = perturbation_function(mp, dp)
    r_psi = search(psi_integrand(mp, dp, s_factor), d, s, "inside", True, n_search, iters,
                   rng.substream(0))
    r_w = search(W, d, s, "inside", True, n_search, iters, rng.substream(1))
    flags = []
    if not r_psi.ok:
        flags.append("psi search failed")
    if not r_w.ok:
        flags.append("sup W search failed")
    return PsiEstimate(float(s), r_psi.value, math.exp(r_w.value) if r_w.ok else math.nan,
                       r_psi.x, r_w.x, flags)


def bump_function(s, poly: SmoothFunction | None = None, power=3):
    """``g(x)**2 * (1 - phi(x)/s)_+**power``: non-negative and supported in ``D_s``."""
    ph = phi_function()

    def ev(x):
        u = np.clip(1.0 - phi(x) / s, 0.0, None)
        base = poly(x) ** 2 if poly is not None else 1.0
        return base * u**power

    def gr(x):
        u = np.clip(1.0 - phi(x) / s, 0.0, None)
        du = -ph.gradient(x) / s
        bump = u**power
        dbump = (power * u ** (power - 1))[..., None] * du
        if poly is None:
            return dbump
        q = poly(x)
        return (2 * q)[..., None] * poly.gradient(x) * bump[..., None] + (q**2)[..., None] * dbump

    return SmoothFunction(ev, gr, None, name="bump")


def ibp_residual(f: SmoothFunction, mp: ModelParams, samples, dp: DirichletParams | None = None,
                 s_factor=DEFAULT_S_FACTOR, n_batches=None):
    """Monte Carlo ``mu(Gamma(f, W)) + s_factor mu(f L W)`` with its stderr.

    Zero in expectation exactly when ``S(W) = s_factor L W`` makes the
    defining inequality an equality, i.e. for ``s_factor = 2``.
    """
    x = np.asarray(samples, dtype=float)
    W = perturbation_function(mp, dp)
    fv = f(x)
    mask = fv != 0
    vals = np.zeros(len(x))
    if mask.any():
        xs = x[mask]
        vals[mask] = carre_du_champ(f, W, xs, check=False) + s_factor * fv[mask] * generator(
            W, xs, mp, check=False)
    return float(vals.mean()), batch_stderr(vals, n_batches)


# ---------------------------------------------------------------------------
# the explicit rate function
# ---------------------------------------------------------------------------

@dataclass
class PowerLaw:
    """``A * s**a`` fitted in log-log; used to extrapolate scanned quantities."""

    A: float
    a: float

    @classmethod
    def fit(cls, s, values):
        s = np.asarray(s, dtype=float)
        v = np.asarray(values, dtype=float)
        if np.any(v <= 0) or len(s) < 2:
            raise DomainError("power-law fit needs >= 2 positive values")
        a, logA = np.polyfit(np.log(s), np.log(v), 1)
        return cls(float(math.exp(logA)), float(a))

    def __call__(self, s):
        return self.A * np.asarray(s, dtype=float) ** self.a


@dataclass
class PerturbationFit:
    """Inputs of the explicit rate: callables of ``s`` plus fitted constants.

    ``h``: sup of Gamma(phi, phi) on D_s; ``lam``: lower bound on the
    Dirichlet eigenvalue outside D_s; ``psi`` and ``sup_exp_W`` as in
    :func:`psi_estimate`. ``c1, p`` come from the reference inequality and
    ``c2`` fixes ``s = c2 eps**(-8/7)``.
    """

    h: Callable
    lam: Callable
    psi: Callable
    sup_exp_W: Callable
    c1: float
    c2: float
    p: float

    @classmethod
    def from_scans(cls, s_grid, h_vals, lam_vals, psi_vals, exp_w_vals, c1, c2, p):
        """Power-law fits of scanned values (``sup_exp_W`` by its maximum)."""
        top = float(np.max(exp_w_vals))
        return cls(PowerLaw.fit(s_grid, h_vals), PowerLaw.fit(s_grid, lam_vals),
                   PowerLaw.fit(s_grid, psi_vals), lambda s: top, c1, c2, p)


def beta_perturbation_explicit(eps, fit: PerturbationFit, slack: Optional[float] = None,
                               variant="statement") -> float:
    """The explicit rate ``beta(eps)`` built from ``h, lambda, psi, sup exp W``.

    With ``s = c2 eps**(-8/7)``, ``q = 2 (1+v)**2 h(2s) / (lambda(2s) s**2)`` and
    ``u = (1+v)**2 h(3s) / s**2 + psi(3s)``::

        beta = c1 / (1 - {q + eps (1-q) u / (K + eps u)})
               * (1 + ((K + eps u) / (eps (1-q)))**p) * sup_exp_W(3s)

    ``variant="statement"`` uses ``K = 2``; ``"proof"`` uses ``K = 4``. The
    cut-off slack ``v`` defaults to ``eps`` (the statement reuses the symbol).
    Raises :class:`RegimeError` when the bracketed term is not below one.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    if variant not in ("statement", "proof"):
        raise DomainError("variant must be 'statement' or 'proof'")
    K = 2.0 if variant == "statement" else 4.0
    v = eps if slack is None else slack
    s = fit.c2 * eps ** (-8.0 / 7.0)
    q = 2.0 * (1 + v) ** 2 * float(fit.h(2 * s)) / (float(fit.lam(2 * s)) * s * s)
    u = (1 + v) ** 2 * float(fit.h(3 * s)) / (s * s) + float(fit.psi(3 * s))
    if not q < 1.0 or not K + eps * u > 0:
        raise RegimeError(f"eps={eps:g} outside the valid range (q={q:.3g})")
    bracket = q + eps * (1 - q) * u / (K + eps * u)
    if not bracket < 1.0:
        raise RegimeError(f"eps={eps:g} outside the valid range (bracket={bracket:.3g})")
    ratio = (K + eps * u) / (eps * (1 - q))
    return float(fit.c1 / (1 - bracket) * (1 + ratio**fit.p) * float(fit.sup_exp_W(3 * s)))
