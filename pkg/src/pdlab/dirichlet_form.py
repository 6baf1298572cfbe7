"""Carre du champ, generator and energy of the simplex diffusion.

The diffusion matrix is ``a(x)_ij = x_i (delta_ij - x_j)`` in the coordinates
``x_1..x_d``. Test functions are wrapped in :class:`SmoothFunction`, which
supplies gradients and Hessians, falling back to finite differences.
All evaluations broadcast over leading axes of ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .simplex import INTERIOR_CUTOFF, ModelParams, DirichletParams, _interior_full, full_coords

_FD_H = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass
class SmoothFunction:
    """A C^2 test function on the simplex interior.

    ``eval`` maps ``(..., d)`` to ``(...)``; ``grad`` to ``(..., d)``;
    ``hess`` to ``(..., d, d)``. Missing derivatives are replaced by central
    differences with step ``eps**(1/3) * max(1, |x_i|)``.
    """

    eval: Callable
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    name: str = "f"

    def __call__(self, x):
        return self.eval(np.asarray(x, dtype=float))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return self.grad(x)
        d = x.shape[-1]
        out = np.empty(x.shape)
        for i in range(d):
            h = _FD_H * np.maximum(1.0, np.abs(x[..., i]))
            e = np.zeros(d)
            e[i] = 1.0
            out[..., i] = (self.eval(x + h[..., None] * e) - self.eval(x - h[..., None] * e)) / (2 * h)
        return out

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        if self.hess is not None:
            return self.hess(x)
        d = x.shape[-1]
        H = np.empty(x.shape + (d,))
        if self.grad is not None:
            for i in range(d):
                h = _FD_H * np.maximum(1.0, np.abs(x[..., i]))
                e = np.zeros(d)
                e[i] = 1.0
                H[..., i, :] = (self.grad(x + h[..., None] * e) - self.grad(x - h[..., None] * e)) / (2 * h[..., None])
            return 0.5 * (H + np.swapaxes(H, -1, -2))
        for i in range(d):
            hi = _FD_H * np.maximum(1.0, np.abs(x[..., i]))
            ei = np.zeros(d)
            ei[i] = 1.0
            for j in range(i, d):
                hj = _FD_H * np.maximum(1.0, np.abs(x[..., j]))
                ej = np.zeros(d)
                ej[j] = 1.0
                di = hi[..., None] * ei
                dj = hj[..., None] * ej
                val = (self.eval(x + di + dj) - self.eval(x + di - dj)
                       - self.eval(x - di + dj) + self.eval(x - di - dj)) / (4 * hi * hj)
                H[..., i, j] = val
                H[..., j, i] = val
        return H

    def scaled(self, c):
        """``c * f`` with exact derivative scaling."""
        return SmoothFunction(
            lambda x: c * self.eval(x),
            lambda x: c * self.gradient(x),
            lambda x: c * self.hessian(x),
            name=f"{c}*{self.name}",
        )


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def constant(c=1.0):
    return SmoothFunction(
        lambda x: np.full(np.shape(x)[:-1], float(c)),
        lambda x: np.zeros(np.shape(x)),
        lambda x: np.zeros(np.shape(x) + (np.shape(x)[-1],)),
        name=f"const({c})",
    )


class Polynomial(SmoothFunction):
    """``sum_m c_m prod_i x_i**k_mi`` with exact derivatives."""

    def __init__(self, exponents, coeffs, name="poly"):
        self.exponents = np.atleast_2d(np.asarray(exponents, dtype=int))
        self.coeffs = np.asarray(coeffs, dtype=float).ravel()
        if self.exponents.shape[0] != self.coeffs.size:
            raise DomainError("one coefficient per monomial required")
        super().__init__(self._eval, self._grad, self._hess, name)

    def _monos(self, x, k):
        # x (..., d), k (m, d) -> (..., m)
        k = np.maximum(k, 0)
        kmax = int(k.max(initial=0))
        # table of x_i**e for e <= kmax, then one gather per coordinate
        P = x[..., :, None] ** np.arange(kmax + 1)
        out = np.ones(x.shape[:-1] + (k.shape[0],))
        for i in range(x.shape[-1]):
            if np.any(k[:, i]):
                out = out * P[..., i, k[:, i]]
        return out

    def _eval(self, x):
        return self._monos(x, self.exponents) @ self.coeffs

    def _grad(self, x):
        d = x.shape[-1]
        out = np.empty(x.shape)
        for i in range(d):
            k = self.exponents.copy()
            fac = k[:, i].astype(float)
            k[:, i] -= 1
            out[..., i] = self._monos(x, k) @ (self.coeffs * fac)
        return out

    def _hess(self, x):
        d = x.shape[-1]
        H = np.empty(x.shape + (d,))
        for i in range(d):
            for j in range(i, d):
                k = self.exponents.copy()
                fac = k[:, i].astype(float)
                k[:, i] -= 1
                fac = fac * k[:, j]
                k[:, j] -= 1
                val = self._monos(x, k) @ (self.coeffs * fac)
                H[..., i, j] = val
                H[..., j, i] = val
        return H


def coordinate(i, d):
    """The linear function ``x_i`` (0-based index)."""
    k = np.zeros((1, d), dtype=int)
    k[0, i] = 1
    return Polynomial(k, [1.0], name=f"x{i + 1}")


def from_full(F, G, K, name="f"):
    """Build a SmoothFunction from a function of all d + 1 coordinates.

    ``F(X)``, ``G(X) = dF/dX`` and ``K(X) = d2F/dX2`` take full coordinates;
    the chain rule for ``X_{d+1} = 1 - sum(x)`` is applied here.
    """
    def ev(x):
        return F(full_coords(x))

    def gr(x):
        g = G(full_coords(x))
        return g[..., :-1] - g[..., -1:]

    def he(x):
        k = K(full_coords(x))
        return (k[..., :-1, :-1] - k[..., :-1, -1:] - k[..., -1:, :-1] + k[..., -1:, -1:])

    return SmoothFunction(ev, gr, he, name)


def power_sum(q, include_remainder=False):
    """``sum_i x_i**q`` over ``i <= d`` (or over all d + 1 coordinates)."""
    if include_remainder:
        return from_full(
            lambda X: np.sum(X**q, axis=-1),
            lambda X: q * X ** (q - 1),
            lambda X: np.einsum("...i,ij->...ij", q * (q - 1) * X ** (q - 2), np.eye(X.shape[-1])),
            name=f"sum X^{q}",
        )

    def ev(x):
        return np.sum(x**q, axis=-1)

    def gr(x):
        return q * x ** (q - 1)

    def he(x):
        return np.einsum("...i,ij->...ij", q * (q - 1) * x ** (q - 2), np.eye(x.shape[-1]))

    return SmoothFunction(ev, gr, he, name=f"sum x^{q}")


def phi_function():
    """The localising function ``sum_k X_k**-2`` with exact derivatives."""
    return from_full(
        lambda X: np.sum(X**-2.0, axis=-1),
        lambda X: -2.0 * X**-3.0,
        lambda X: np.einsum("...i,ij->...ij", 6.0 * X**-4.0, np.eye(X.shape[-1])),
        name="phi",
    )


def perturbation_function(mp: ModelParams, dp: DirichletParams | None = None):
    """``W = log(Dirichlet density / projection density)`` with exact derivatives."""
    from .simplex import log_density_dirichlet, log_density_mu_full

    dp = dp or DirichletParams.matched(mp)
    a = dp.arr
    p2 = mp.parr**2
    kap = mp.kappa
    # W = const + sum (a_k + 1/2) log X_k + kappa log S,  S = sum p_k^2 / X_k

    def F(X):
        with np.errstate(divide="ignore"):
            logX = np.log(X)
        ld = (log_density_dirichlet(X[..., :-1], dp) if np.all(X > 0)
              else np.full(X.shape[:-1], -np.inf))
        return ld - log_density_mu_full(X, mp, logX)

    def G(X):
        S = np.sum(p2 / X, axis=-1, keepdims=True)
        return (a + 0.5) / X + kap * (-p2 / X**2) / S

    def K(X):
        S = np.sum(p2 / X, axis=-1, keepdims=True)
        dS = -p2 / X**2
        diag = -(a + 0.5) / X**2 + kap * (2 * p2 / X**3) / S
        eye = np.eye(X.shape[-1])
        return (np.einsum("...i,ij->...ij", diag, eye)
                - kap * dS[..., :, None] * dS[..., None, :] / (S[..., None] ** 2))

    return from_full(F, G, K, name="W")


# ---------------------------------------------------------------------------
# form, generator, energy
# ---------------------------------------------------------------------------

def diffusion_matrix(x):
    """``a(x)_ij = x_i (delta_ij - x_j)``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    return np.einsum("...i,ij->...ij", x, np.eye(d)) - x[..., :, None] * x[..., None, :]


def _quad_form(x, u, v):
    # sum_ij x_i (delta_ij - x_j) u_i v_j
    return np.sum(x * u * v, axis=-1) - np.sum(x * u, axis=-1) * np.sum(x * v, axis=-1)


def carre_du_champ(f: SmoothFunction, g: SmoothFunction, x, check=True):
    """``Gamma(f, g)(x) = sum_ij x_i (delta_ij - x_j) d_i f d_j g`` at interior points.

    ``check=False`` skips the interior-cutoff test (quadrature near faces).
    """
    x = np.asarray(x, dtype=float)
    if check:
        _interior_full(x)
    gf = f.gradient(x)
    out = _quad_form(x, gf, gf if g is f else g.gradient(x))
    return float(out) if np.ndim(out) == 0 else out


def drift(x, mp: ModelParams):
    """First-order coefficients of the generator, ``(..., d)``."""
    X = full_coords(x)
    p2 = mp.parr**2
    S = np.sum(p2 / X, axis=-1, keepdims=True)
    x = X[..., :-1]
    return 0.5 * (-0.5 - mp.theta * x + mp.kappa * (p2[:-1] / x) / S)


def generator(f: SmoothFunction, x, mp: ModelParams, check=True):
    """``L f(x) = 1/2 sum a_ij d_ij f + sum b_i d_i f`` at interior points."""
    x = np.asarray(x, dtype=float)
    if check:
        _interior_full(x, mp.d)
    H = f.hessian(x)
    second = 0.5 * (np.sum(x * np.diagonal(H, axis1=-2, axis2=-1), axis=-1)
                    - np.einsum("...i,...ij,...j->...", x, H, x))
    out = second + np.sum(drift(x, mp) * f.gradient(x), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def sigma_grad_norm(f: SmoothFunction, x):
    """``|sigma grad f| := sqrt(sum_i (sum_j x_i (delta_ij - x_j) d_j f)**2)``."""
    x = np.asarray(x, dtype=float)
    g = f.gradient(x)
    v = x * g - x * np.sum(x * g, axis=-1, keepdims=True)
    return np.sqrt(np.sum(v * v, axis=-1))


def batch_stderr(values, n_batches=None):
    """Standard error of the mean; batch means when ``n_batches`` is given."""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n < 2:
        return 0.0
    if n_batches is None or n_batches >= n:
        return float(np.std(v, ddof=1) / np.sqrt(n))
    k = int(n_batches)
    m = n // k
    means = v[: m * k].reshape(k, m).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(k))


def energy(f: SmoothFunction, mp: ModelParams, samples, n_batches=None):
    """Monte Carlo ``E(f, f) = 1/2 mu(Gamma(f, f))`` with its standard error."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise DomainError("energy needs a non-empty (n, d) sample array")
    if samples.shape[1] != mp.d:
        raise DomainError("sample dimension does not match the model")
    vals = 0.5 * carre_du_champ(f, f, samples)
    return float(np.mean(vals)), batch_stderr(vals, n_batches)


def sigma_factor(x):
    """Closed-form ``sigma`` with ``sigma @ sigma.T = a(x)``.

    ``sigma = diag(sqrt x) (I - c u u^T)`` with ``u = sqrt x`` and
    ``c = 1 / (1 + sqrt(1 - s))``, ``s = sum x``. When the remainder
    coordinate vanishes the symmetric PSD square root is used instead.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    s = x.sum(axis=-1)
    rem = 1.0 - s
    sq = np.sqrt(np.clip(x, 0.0, None))
    c = 1.0 / (1.0 + np.sqrt(np.clip(rem, 0.0, None)))
    sig = np.einsum("...i,ij->...ij", sq, np.eye(d)) - c[..., None, None] * x[..., :, None] * sq[..., None, :]
    degenerate = rem <= INTERIOR_CUTOFF
    if np.any(degenerate):
        a = diffusion_matrix(x[degenerate])
        w, V = np.linalg.eigh(a)
        sig[degenerate] = np.einsum("...ij,...j,...kj->...ik", V, np.sqrt(np.clip(w, 0, None)), V)
    return sig
