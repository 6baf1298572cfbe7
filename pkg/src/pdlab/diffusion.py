"""Euler-Maruyama simulation of the simplex diffusion.

One step is ``x' = clamp(x + b~(x) h + sigma(x) sqrt(h) xi)`` with the tamed
drift ``b~ = b / (1 + h |b|)`` and ``sigma = diag(sqrt x)(I - c sqrt x sqrt x^T)``.
The clamp lifts every full coordinate below ``boundary_eps`` to
``boundary_eps`` and takes the excess from the largest coordinate.

The compiled kernel consumes the same Gaussian stream as repeated calls to
:func:`em_step`, so both paths give identical trajectories for one seed.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .dirichlet_form import SmoothFunction, batch_stderr
from .errors import DomainError
from .numerics import RngStream
from .simplex import (ChainConfig, ModelParams, SimplexPoint, _interior_full, expect_mu,
                      sample_mu_mcmc)

_NOISE_CHUNK = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    step_h: float = 1e-4
    n_steps: int = 0
    boundary_eps: float = 1e-8
    thinning: int = 100

    def __post_init__(self):
        if not self.step_h >= 0.0:
            raise DomainError("step_h must be non-negative")
        if self.n_steps < 0:
            raise DomainError("n_steps must be >= 0")
        if not self.boundary_eps > 0.0:
            raise DomainError("boundary_eps must be positive")
        if self.thinning < 1:
            raise DomainError("thinning must be >= 1")

    def check_dim(self, d):
        if not self.boundary_eps < 1.0 / (2 * (d + 1)):
            raise DomainError("boundary_eps must be below 1 / (2 (d + 1))")


@dataclass
class Trajectory:
    """Thinned states ``(n_rec, d)``; row k is the state at time ``k * dt``."""

    states: np.ndarray
    clamp_count: int
    dt: float
    n_steps: int
    thinning: int = 1

    @property
    def times(self):
        return self.dt * np.arange(len(self.states))

    @property
    def clamp_fraction(self):
        return self.clamp_count / self.n_steps if self.n_steps else 0.0

    def points(self):
        return [SimplexPoint(s) for s in self.states]


# ---------------------------------------------------------------------------
# compiled kernel
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _step_inplace(X, theta, kappa, p2, h, eps, noise, b):
    """Advance full coordinates ``X`` (length d + 1) by one step; returns 1 if clamped."""
    d = X.shape[0] - 1
    S = 0.0
    for k in range(d + 1):
        S += p2[k] / X[k]
    bn = 0.0
    dot = 0.0
    s = 0.0
    for i in range(d):
        b[i] = 0.5 * (-0.5 - theta * X[i] + kappa * (p2[i] / X[i]) / S)
        bn += b[i] * b[i]
        dot += math.sqrt(X[i]) * noise[i]
        s += X[i]
    tame = 1.0 / (1.0 + h * math.sqrt(bn))
    c = 1.0 / (1.0 + math.sqrt(max(1.0 - s, 0.0)))
    sh = math.sqrt(h)
    total = 0.0
    for i in range(d):
        u = math.sqrt(X[i])
        X[i] = X[i] + b[i] * tame * h + sh * u * (noise[i] - c * u * dot)
        total += X[i]
    X[d] = 1.0 - total
    excess = 0.0
    for k in range(d + 1):
        if X[k] < eps:
            excess += eps - X[k]
            X[k] = eps
    if excess > 0.0:
        big = 0
        for k in range(1, d + 1):
            if X[k] > X[big]:
                big = k
        X[big] -= excess
        return 1
    return 0


@numba.njit(cache=True, nogil=True)
def _run_chunk(X, theta, kappa, p2, h, eps, noise, thin, phase, out, out_pos):
    """Run ``len(noise)`` steps; record every ``thin``-th state into ``out``."""
    d = X.shape[0] - 1
    b = np.empty(d)
    clamps = 0
    for n in range(noise.shape[0]):
        clamps += _step_inplace(X, theta, kappa, p2, h, eps, noise[n], b)
        phase += 1
        if phase == thin:
            phase = 0
            for i in range(d):
                out[out_pos, i] = X[i]
            out_pos += 1
    return clamps, phase, out_pos


@numba.njit(cache=True, nogil=True)
def _run_paths(X0, theta, kappa, p2, h, eps, dW, m):
    """Terminal states of many paths driven by fine increments ``dW (paths, steps, d)``.

    Each coarse step sums ``m`` consecutive fine increments (coupled noise).
    """
    n_paths, n_fine, d = dW.shape
    out = np.empty((n_paths, d))
    X = np.empty(d + 1)
    b = np.empty(d)
    xi = np.empty(d)
    H = h * m
    scale = 1.0 / math.sqrt(H)
    for j in range(n_paths):
        for k in range(d + 1):
            X[k] = X0[k]
        for n in range(n_fine // m):
            for i in range(d):
                acc = 0.0
                for r in range(m):
                    acc += dW[j, n * m + r, i]
                xi[i] = acc * scale
            _step_inplace(X, theta, kappa, p2, H, eps, xi, b)
        for i in range(d):
            out[j, i] = X[i]
    return out


def _start(x, mp: ModelParams, cfg: SimConfig):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != mp.d:
        raise DomainError("state dimension does not match the model")
    cfg.check_dim(mp.d)
    X = np.append(x, 1.0 - x.sum())
    if np.any(X < cfg.boundary_eps * (1 - 1e-12)):
        raise DomainError("state must have all coordinates >= boundary_eps")
    return X


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def em_step(x, mp: ModelParams, cfg: SimConfig, rng: RngStream) -> SimplexPoint:
    """One tamed Euler-Maruyama step with clamping."""
    X = _start(x, mp, cfg)
    xi = rng.normal(mp.d)
    _step_inplace(X, mp.theta, mp.kappa, mp.parr**2, cfg.step_h, cfg.boundary_eps, xi,
                  np.empty(mp.d))
    return SimplexPoint(X[:-1].copy())


def simulate(x0, mp: ModelParams, cfg: SimConfig, rng: RngStream) -> Trajectory:
    """``cfg.n_steps`` steps from ``x0``; keeps ``x0`` and every ``thinning``-th state."""
    X = _start(x0, mp, cfg)
    d = mp.d
    n_rec = 1 + cfg.n_steps // cfg.thinning
    out = np.empty((n_rec, d))
    out[0] = X[:-1]
    pos, phase, clamps = 1, 0, 0
    p2 = mp.parr**2
    done = 0
    while done < cfg.n_steps:
        m = min(_NOISE_CHUNK, cfg.n_steps - done)
        noise = rng.normal((m, d))
        c, phase, pos = _run_chunk(X, mp.theta, mp.kappa, p2, cfg.step_h, cfg.boundary_eps,
                                   noise, cfg.thinning, phase, out, pos)
        clamps += c
        done += m
    return Trajectory(out, int(clamps), cfg.step_h * cfg.thinning, cfg.n_steps, cfg.thinning)


def simulate_many(x0, mp: ModelParams, cfg: SimConfig, rng: RngStream, n_traj, threads=1):
    """Independent trajectories on substreams ``rng.substream(i)``."""
    def one(i):
        return simulate(x0, mp, cfg, rng.substream(i))
    if threads <= 1:
        return [one(i) for i in range(n_traj)]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(one, range(n_traj)))


@dataclass
class ObservableCheck:
    name: str
    time_average: float
    stderr: float
    reference: float
    reference_stderr: float
    z: float
    flagged: bool


@dataclass
class InvariantReport:
    rows: list = field(default_factory=list)
    clamp_fraction: float = 0.0
    n_used: int = 0

    @property
    def ok(self):
        return not any(r.flagged for r in self.rows)


def _zscore(diff, se):
    if se > 0:
        return diff / se
    return 0.0 if abs(diff) <= 1e-9 else math.copysign(math.inf, diff)


def invariant_check(traj: Trajectory, mp: ModelParams, observables, burn_in=0, n_batches=50,
                    tol_sigma=4.0, reference_rng: RngStream | None = None,
                    reference_steps=20000) -> InvariantReport:
    """Compare time averages with mu-averages for each observable.

    ``burn_in`` counts steps. The reference is quadrature for d <= 2 and
    Metropolis otherwise; stderrs are batch means (50 batches by default).
    """
    skip = -(-burn_in // traj.thinning)     # recorded states to drop
    if skip >= len(traj.states):
        raise DomainError("trajectory is shorter than the burn-in")
    xs = traj.states[skip:]
    ref_samples = None
    if mp.d > 2:
        rng = reference_rng or RngStream(0)
        res = sample_mu_mcmc(mp, ChainConfig(reference_steps + 2000, 2000, n_chains=50), rng)
        ref_samples = res.samples
    report = InvariantReport(clamp_fraction=traj.clamp_fraction, n_used=len(xs))
    for f in observables:
        vals = np.asarray(f(xs), dtype=float)
        avg = float(np.mean(vals))
        se = batch_stderr(vals, n_batches) if len(vals) >= 2 * n_batches else batch_stderr(vals)
        if ref_samples is None:
            ref, _ = expect_mu(lambda X, f=f: f(X[..., :-1]), mp, rel_tol=1e-8, abs_tol=1e-10)
            ref_se = 0.0
        else:
            rv = np.asarray(f(ref_samples), dtype=float)
            ref = float(rv.mean())
            ref_se = batch_stderr(rv, 50)
        z = _zscore(avg - ref, math.hypot(se, ref_se))
        report.rows.append(ObservableCheck(f.name, avg, se, float(ref), ref_se, z,
                                           bool(abs(z) > tol_sigma)))
    return report


@dataclass
class WeakOrderReport:
    h_values: np.ndarray
    means: np.ndarray
    mean_stderrs: np.ndarray
    differences: np.ndarray       # |E_h - E_{h/2}| for consecutive levels
    difference_stderrs: np.ndarray
    slope: float


def weak_order_diagnostic(x0, mp: ModelParams, T=1.0, h_coarse=0.05, levels=5, n_paths=200_000,
                          f: SmoothFunction | None = None, rng: RngStream | None = None,
                          boundary_eps=1e-8, path_chunk=4096) -> WeakOrderReport:
    """Richardson check of weak order one.

    All levels ``h = h_coarse / 2**k`` share the same Brownian paths, so the
    differences ``|E_h f(x_T) - E_{h/2} f(x_T)|`` carry little sampling noise.
    The fitted slope of log difference against log h should be close to 1.
    """
    rng = rng or RngStream(0)
    cfg = SimConfig(h_coarse, 0, boundary_eps, 1)
    X0 = _start(x0, mp, cfg)
    d = mp.d
    n_coarse = round(T / h_coarse)
    if n_coarse < 1 or levels < 3:
        raise DomainError("need T >= h_coarse and at least 3 levels")
    m_max = 2 ** (levels - 1)
    h_fine = h_coarse / m_max
    n_fine = n_coarse * m_max
    p2 = mp.parr**2
    sums = np.zeros(levels)
    sq = np.zeros(levels)
    dsum = np.zeros(levels - 1)
    dsq = np.zeros(levels - 1)
    done = 0
    while done < n_paths:
        k = min(path_chunk, n_paths - done)
        dW = math.sqrt(h_fine) * rng.normal((k, n_fine, d))
        vals = []
        for lev in range(levels):
            m = m_max >> lev
            xT = _run_paths(X0, mp.theta, mp.kappa, p2, h_fine, boundary_eps, dW, m)
            v = f(xT) if f is not None else xT[:, 0]
            vals.append(v)
            sums[lev] += v.sum()
            sq[lev] += (v * v).sum()
        for lev in range(levels - 1):
            dv = vals[lev] - vals[lev + 1]
            dsum[lev] += dv.sum()
            dsq[lev] += (dv * dv).sum()
        done += k
    means = sums / n_paths
    se = np.sqrt(np.maximum(sq / n_paths - means**2, 0) / n_paths)
    dmean = dsum / n_paths
    diffs = np.abs(dmean)
    dse = np.sqrt(np.maximum(dsq / n_paths - dmean**2, 0) / n_paths)
    hs = h_coarse / 2.0 ** np.arange(levels)
    slope = float(np.polyfit(np.log(hs[:-1]), np.log(diffs), 1)[0])
    return WeakOrderReport(hs, means, se, diffs, dse, slope)


def drift_exact(x, mp: ModelParams):
    """Untamed drift at an interior point (used by consistency checks)."""
    from .dirichlet_form import drift
    _interior_full(x, mp.d)
    return drift(np.asarray(x, dtype=float), mp)
