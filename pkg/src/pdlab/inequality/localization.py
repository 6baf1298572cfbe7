"""Localisation quantities: ``h(s)``, Cheeger-type bounds and the boundary flux."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dirichlet_form import (SmoothFunction, carre_du_champ, generator, phi_function,
                              power_sum, sigma_grad_norm)
from ..errors import DomainError
from ..numerics import QuadratureSpec, RngStream, integrate_1d
from ..simplex import ModelParams, barycenter, log_density_mu_full, min_phi, phi
from .search import level_radius, loglog_slope, search

_PHI = phi_function()


def _gamma_phi(x):
    return carre_du_champ(_PHI, _PHI, x, check=False)


def h_estimate(s, mp: ModelParams, n_search=256, rng: RngStream | None = None, iters=200) -> float:
    """Largest ``Gamma(phi, phi)`` found on ``D_s`` (a lower bound on the supremum)."""
    d = mp.d
    if s < min_phi(d) * (1 - 1e-12):
        raise DomainError("s must be at least min phi")
    res = search(_gamma_phi, d, s, "inside", True, n_search, iters, rng)
    if not res.ok:
        raise DomainError("no feasible start found in D_s")
    return res.value


def cheeger_test_function(d=None):
    """``sum_{i<=d} x_i**(1/4)``."""
    return power_sum(0.25)


@dataclass
class CheegerScan:
    s_grid: np.ndarray
    a1: np.ndarray                 # found sup |sigma grad f| on the complement (lower bound)
    a2: np.ndarray                 # found inf |L f| on the complement (upper bound)
    lambda_lb: np.ndarray
    slopes: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    argmax_a1: np.ndarray | None = None
    argmin_a2: np.ndarray | None = None


def cheeger_scan(mp: ModelParams, s_grid, n_search=256, rng: RngStream | None = None,
                 f: SmoothFunction | None = None, iters=200, threads=1) -> CheegerScan:
    """Scan ``a1(s) = sup |sigma grad f|`` and ``a2(s) = inf |L f|`` over ``{phi > s}``.

    ``lambda_lb = a2**2 / (4 a1)``; slopes are least-squares fits in log-log.
    Each grid point uses its own substream of ``rng``.
    """
    rng = rng or RngStream(0)
    f = f or cheeger_test_function()
    d = mp.d
    s_grid = np.asarray(s_grid, dtype=float)

    def a1_obj(x):
        return sigma_grad_norm(f, x)

    def a2_obj(x):
        return np.abs(generator(f, x, mp, check=False))

    def one(k):
        s = s_grid[k]
        r1 = search(a1_obj, d, s, "outside", True, n_search, iters, rng.substream(2 * k))
        r2 = search(a2_obj, d, s, "outside", False, n_search, iters, rng.substream(2 * k + 1))
        return r1, r2

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(len(s_grid))))
    else:
        results = [one(k) for k in range(len(s_grid))]
    a1 = np.array([r[0].value for r in results])
    a2 = np.array([r[1].value for r in results])
    flags = []
    for k, (r1, r2) in enumerate(results):
        if not r1.ok or not r2.ok:
            flags.append(f"search failed at s={s_grid[k]:g}")
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = a2**2 / (4.0 * a1)
    if np.any(~(a1 > 0)) or np.any(~(a2 > 0)):
        flags.append("a1 or a2 not positive on the grid")
    slopes = {"a1": loglog_slope(s_grid, a1), "a2": loglog_slope(s_grid, a2),
              "lambda_lb": loglog_slope(s_grid, lam)}
    return CheegerScan(s_grid, a1, a2, lam, slopes, flags,
                       np.array([r[0].x for r in results]), np.array([r[1].x for r in results]))


def edge_profile(mp: ModelParams, s_grid, f: SmoothFunction | None = None, face=0):
    """Local boundary behaviour of ``f`` along the ray from the barycenter
    toward the centre of face ``{x_face = 0}`` (``face < d``).

    At the crossing with ``phi = s`` the coordinate ``x_face`` shrinks like
    ``s**-1/2`` while the others stay balanced. Returns ``(points,
    component, grad_norm, generator_abs)`` where ``component`` is
    ``|(sigma grad f)_face|``, the part of the gradient carried by the
    vanishing coordinate.
    """
    f = f or cheeger_test_function()
    d = mp.d
    if not 0 <= face < d:
        raise DomainError("face must index one of x_1..x_d")
    target = np.full(d + 1, 1.0 / d)
    target[face] = 0.0
    omega = target[:-1] - barycenter(d)
    omega /= np.linalg.norm(omega)
    pts = []
    for s in np.asarray(s_grid, dtype=float):
        R = level_radius(omega[None, :], s)[0]
        pts.append(barycenter(d) + R * omega)
    pts = np.array(pts)
    g = f.gradient(pts)
    v = pts * g - pts * np.sum(pts * g, axis=1, keepdims=True)
    return (pts, np.abs(v[:, face]), sigma_grad_norm(f, pts),
            np.abs(generator(f, pts, mp, check=False)))


def rayleigh_outside(s, mp: ModelParams, samples, power=2):
    """Rayleigh quotient ``E(g, g) / mu(g**2)`` of ``g = (1 - s/phi)_+**power``.

    ``g`` vanishes on ``D_s``, so any Cheeger-type lower bound ``lambda(s)``
    must sit below this value. Returns ``(quotient, n_support)``.
    """
    x = np.asarray(samples, dtype=float)
    ph = phi(x)
    out = ph > s
    u = np.where(out, 1.0 - s / np.where(out, ph, 1.0), 0.0)
    g = u**power
    dg = np.where(out, power * u ** (power - 1) * s / np.where(out, ph, 1.0) ** 2, 0.0)
    gam = np.zeros(len(x))
    if out.any():
        gam[out] = _gamma_phi(x[out])
    num = 0.5 * np.mean(dg**2 * gam)
    den = np.mean(g**2)
    return (num / den if den > 0 else math.inf), int(out.sum())


# ---------------------------------------------------------------------------
# flux through the level set {phi = r}
# ---------------------------------------------------------------------------

def _d1_roots(r):
    # phi(x) = x^-2 + (1-x)^-2 is decreasing on (0, 1/2) and symmetric
    lo, hi = 0.0, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid ** -2.0 + (1.0 - mid) ** -2.0 > r:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-18:
            break
    x = 0.5 * (lo + hi)
    return np.array([[x], [1.0 - x]])


def boundary_flux(r, mp: ModelParams, f: SmoothFunction, rel_tol=1e-8, abs_tol=1e-300):
    """``int_{phi = r} |sigma grad f| rho dA`` for d in {1, 2}.

    d = 1: sum over the two roots. d = 2: the level curve is written in polar
    form ``b + R(a)(cos a, sin a)`` and integrated in the angle with
    ``dA = sqrt(R**2 + R'**2) da``; the vertex directions are breakpoints.
    """
    d = mp.d
    if r <= min_phi(d):
        raise DomainError("r must exceed min phi")
    if d == 1:
        x = _d1_roots(r)
        X = np.concatenate([x, 1.0 - x], axis=1)
        return float(np.sum(sigma_grad_norm(f, x) * np.exp(log_density_mu_full(X, mp))))
    if d != 2:
        raise DomainError("boundary_flux supports d <= 2")
    b = barycenter(2)

    def integrand(a):
        a = np.asarray(a, dtype=float)
        om = np.stack([np.cos(a), np.sin(a)], axis=-1)
        perp = np.stack([-np.sin(a), np.cos(a)], axis=-1)
        R = level_radius(om, r)
        x = b + R[:, None] * om
        g = _PHI.gradient(x)
        dR = -R * np.sum(g * perp, axis=1) / np.sum(g * om, axis=1)
        X = np.concatenate([x, 1.0 - x.sum(axis=1, keepdims=True)], axis=1)
        rho = np.exp(log_density_mu_full(X, mp))
        return sigma_grad_norm(f, x) * rho * np.hypot(R, dR)

    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]) - b
    angles = np.sort(np.mod(np.arctan2(verts[:, 1], verts[:, 0]), 2 * np.pi))
    spec = QuadratureSpec(abs_tol=abs_tol, rel_tol=rel_tol, max_subdivisions=4000)
    total = 0.0
    edges = np.concatenate([angles, [angles[0] + 2 * np.pi]])
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate_1d(integrand, lo, hi, spec)
        total += val
    return float(total)
