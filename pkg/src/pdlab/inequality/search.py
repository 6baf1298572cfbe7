"""Multi-start search over sublevel sets of ``phi`` and their complements.

Points are written as ``b + t * omega`` with ``b`` the barycenter and
``omega`` a unit direction. ``phi`` is convex along every ray and minimal at
``b``, so ``{phi <= s}`` is ``t <= R_s(omega)`` with ``R_s`` found by
bisection. Inside ``D_s`` the radius is ``tau * R_s``; in the complement it is
``t_edge - (t_edge - R_s) * exp(-v)``, so large ``v`` walks toward the simplex
boundary on a log scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..numerics import RngStream
from ..simplex import barycenter, min_phi, phi

V_MAX = 40.0


def edge_radius(omega):
    """Largest ``t`` keeping ``b + t omega`` in the closed simplex."""
    omega = np.atleast_2d(omega)
    d = omega.shape[1]
    b = 1.0 / (d + 1)
    with np.errstate(divide="ignore"):
        lim = np.where(omega < 0, b / -np.minimum(omega, -1e-300), np.inf)
        tot = omega.sum(axis=1)
        rem = np.where(tot > 0, b / np.maximum(tot, 1e-300), np.inf)
    return np.minimum(lim.min(axis=1), rem)


def level_radius(omega, s, iters=80):
    """``R_s(omega)``: the radius where ``phi`` reaches ``s`` along each ray."""
    omega = np.atleast_2d(omega)
    d = omega.shape[1]
    b = barycenter(d)
    hi = edge_radius(omega)
    lo = np.zeros(len(omega))
    if s <= min_phi(d):
        return lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = phi(b + mid[:, None] * omega) <= s
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return lo


def _normalise(w):
    n = np.linalg.norm(w, axis=1, keepdims=True)
    return w / np.where(n > 0, n, 1.0)


def _points(omega, u, s, region):
    b = barycenter(omega.shape[1])
    R = level_radius(omega, s)
    if region == "inside":
        t = u * R
    else:
        edge = edge_radius(omega)
        t = edge - (edge - R) * np.exp(-u)
    return b + t[:, None] * omega


@dataclass
class SearchResult:
    value: float
    x: np.ndarray
    n_starts: int
    n_finite: int

    @property
    def ok(self):
        return self.n_finite > 0 and np.isfinite(self.value)


def search(objective, d, s, region="inside", maximize=True, n_starts=256, iters=200,
           rng: RngStream | None = None) -> SearchResult:
    """Best value of ``objective`` over ``D_s`` (``region="inside"``) or its complement.

    ``objective`` maps ``(n, d)`` points to ``(n,)`` values. A (1+1) evolution
    strategy runs from every start; the best value found is returned, which
    is a lower bound on a supremum (or an upper bound on an infimum).
    """
    if region not in ("inside", "outside"):
        raise DomainError("region must be 'inside' or 'outside'")
    if s < min_phi(d) * (1 - 1e-12):
        raise DomainError("s is below the minimum of phi; the sublevel set is empty")
    rng = rng or RngStream(0)
    sign = 1.0 if maximize else -1.0
    n = int(n_starts)
    omega = _normalise(rng.normal((n, d)))
    hi_u = 1.0 if region == "inside" else V_MAX
    if region == "inside":
        u = rng.uniform(n) ** (1.0 / d)
        u[: max(1, n // 8)] = 1.0             # some starts on the level set itself
    else:
        u = np.concatenate([[0.0], rng.uniform(n - 1)]) * V_MAX

    def score(om, uu):
        with np.errstate(all="ignore"):
            v = sign * np.asarray(objective(_points(om, uu, s, region)), dtype=float)
        return np.where(np.isfinite(v), v, -np.inf)

    best = score(omega, u)
    step_w = np.full(n, 0.3)
    step_u = np.full(n, 0.2 * hi_u)
    for _ in range(iters):
        om2 = _normalise(omega + step_w[:, None] * rng.normal((n, d)))
        u2 = np.clip(u + step_u * rng.normal(n), 0.0, hi_u)
        val = score(om2, u2)
        acc = val > best
        omega = np.where(acc[:, None], om2, omega)
        u = np.where(acc, u2, u)
        best = np.where(acc, val, best)
        grow = np.where(acc, 1.5, 0.9)
        step_w = np.clip(step_w * grow, 1e-8, 1.0)
        step_u = np.clip(step_u * grow, 1e-10 * hi_u, hi_u)
    finite = np.isfinite(best)
    if not finite.any():
        return SearchResult(np.nan, np.full(d, np.nan), n, 0)
    k = int(np.argmax(np.where(finite, best, -np.inf)))
    x = _points(omega[k:k + 1], u[k:k + 1], s, region)[0]
    return SearchResult(float(sign * best[k]), x, n, int(finite.sum()))


def loglog_slope(s, values):
    """Least-squares slope of ``log values`` against ``log s``; nan if any value <= 0."""
    s = np.asarray(s, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(s) < 2 or np.any(~np.isfinite(v)) or np.any(v <= 0):
        return float("nan")
    return float(np.polyfit(np.log(s), np.log(v), 1)[0])
