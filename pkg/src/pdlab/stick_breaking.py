"""GEM / Poisson-Dirichlet stick breaking and the two-parameter Dirichlet process.

Truncation never renormalises: the unbroken stick is kept as ``tail_mass``
(``defect`` for measures), so mass is conserved exactly and the
truncation bias stays visible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, DomainError
from .numerics import RngStream, sample_beta_logs

DEFAULT_TRUNC_EPS = 1e-10


@dataclass(frozen=True)
class GemParams:
    alpha: float
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError("alpha must lie in [0, 1)")
        if not self.theta + self.alpha > 0.0:
            raise DomainError("theta must exceed -alpha")


@dataclass(frozen=True)
class WeightSequence:
    weights: np.ndarray
    tail_mass: float
    trunc_eps: float = DEFAULT_TRUNC_EPS

    def total(self) -> float:
        return math.fsum(self.weights) + self.tail_mass


class BasePmf:
    """Label distribution on {1, 2, ...}.

    Build with :meth:`finite`, :meth:`geometric` (``p_n = (1 - r) r**(n-1)``,
    so ``r = 1/2`` gives ``2**-n``) or :meth:`inverse_square`
    (``p_n = 6 / (pi n)**2``).
    """

    def __init__(self, kind, probs=None, ratio=None):
        self.kind = kind
        self.ratio = ratio
        if kind == "finite":
            p = np.asarray(probs, dtype=float).ravel()
            if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise DomainError("finite base pmf must be non-negative and sum to 1")
            self.probs = p
            self._cdf = np.cumsum(p)
            self._cdf[-1] = 1.0
        elif kind == "geometric":
            if not 0.0 < ratio < 1.0:
                raise DomainError("geometric ratio must lie in (0, 1)")
        elif kind != "inverse_square":
            raise DomainError(f"unknown base pmf kind {kind!r}")

    @classmethod
    def finite(cls, probs):
        return cls("finite", probs=probs)

    @classmethod
    def geometric(cls, ratio=0.5):
        return cls("geometric", ratio=ratio)

    @classmethod
    def inverse_square(cls):
        return cls("inverse_square")

    @property
    def support_size(self):
        if self.kind == "finite":
            return int(np.count_nonzero(self.probs))
        return math.inf

    def prob(self, n):
        n = np.asarray(n)
        if self.kind == "finite":
            out = np.zeros(n.shape)
            ok = (n >= 1) & (n <= self.probs.size)
            out[ok] = self.probs[n[ok] - 1]
            return out
        if self.kind == "geometric":
            return np.where(n >= 1, (1 - self.ratio) * self.ratio ** (n - 1.0), 0.0)
        return np.where(n >= 1, 6.0 / (np.pi * np.maximum(n, 1)) ** 2, 0.0)

    def sample(self, rng: RngStream, size):
        if self.kind == "finite":
            return np.searchsorted(self._cdf, rng.uniform(size), side="right") + 1
        if self.kind == "geometric":
            return rng.gen.geometric(1.0 - self.ratio, size)
        return rng.gen.zipf(2.0, size)


@dataclass(frozen=True)
class AtomicMeasure:
    labels: np.ndarray
    weights: np.ndarray
    defect: float

    def total(self) -> float:
        return math.fsum(self.weights) + self.defect


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _check_eps(trunc_eps):
    if not 0.0 < trunc_eps < 1.0:
        raise DomainError("trunc_eps must lie in (0, 1)")


def sample_gem(params: GemParams, trunc_eps=DEFAULT_TRUNC_EPS, rng: RngStream = None,
               max_sticks=10**8, chunk=4096) -> WeightSequence:
    """Stick breaking with ``U_k ~ Beta(1 - alpha, theta + k alpha)``.

    Stops at the first k whose remaining stick is below ``trunc_eps``.
    For alpha > 0 the remaining stick decays only polynomially, so the
    number of sticks grows like a power of ``1 / trunc_eps``.
    """
    _check_eps(trunc_eps)
    rng = rng or RngStream(0)
    log_eps = math.log(trunc_eps)
    log_rem = 0.0
    pieces = []
    k0 = 1
    while True:
        k = np.arange(k0, k0 + chunk, dtype=float)
        lu, l1mu = sample_beta_logs(1.0 - params.alpha, params.theta + k * params.alpha, rng)
        cum = log_rem + np.cumsum(l1mu)
        before = np.concatenate([[log_rem], cum[:-1]])
        hit = np.nonzero(cum < log_eps)[0]
        stop = hit[0] + 1 if hit.size else chunk
        pieces.append(np.exp(lu[:stop] + before[:stop]))
        log_rem = cum[stop - 1]
        k0 += stop
        if hit.size:
            break
        if k0 > max_sticks:
            raise AccuracyError(f"remaining stick above {trunc_eps} after {max_sticks} sticks",
                                estimate=math.exp(log_rem))
    w = np.concatenate(pieces)
    return WeightSequence(w, math.exp(log_rem), trunc_eps)


def to_descending(ws: WeightSequence) -> WeightSequence:
    """Poisson-Dirichlet ordering of the weights; the tail is untouched."""
    return WeightSequence(np.sort(ws.weights)[::-1].copy(), ws.tail_mass, ws.trunc_eps)


def sample_dirichlet_process(params: GemParams, base: BasePmf, trunc_eps=DEFAULT_TRUNC_EPS,
                             rng: RngStream = None) -> AtomicMeasure:
    """Weights from GEM, i.i.d. labels from ``base``; equal labels are merged."""
    rng = rng or RngStream(0)
    ws = sample_gem(params, trunc_eps, rng)
    labels = base.sample(rng, ws.weights.size)
    uniq, inv = np.unique(labels, return_inverse=True)
    merged = np.zeros(uniq.size)
    np.add.at(merged, inv, ws.weights)
    order = np.argsort(-merged, kind="stable")
    return AtomicMeasure(uniq[order], merged[order], ws.tail_mass)


def project(m: AtomicMeasure, d: int) -> np.ndarray:
    """``(mu(1), ..., mu(d))``; all other mass, defect included, is the remainder."""
    if d < 1:
        raise DomainError("d must be >= 1")
    x = np.zeros(d)
    sel = (m.labels >= 1) & (m.labels <= d)
    np.add.at(x, m.labels[sel] - 1, m.weights[sel])
    return x


def sample_projection(params: GemParams, base: BasePmf, d: int, n: int, trunc_eps=1e-4,
                      rng: RngStream = None, chunk=64, defect="remainder") -> np.ndarray:
    """``n`` independent draws of ``project(sample_dirichlet_process(...), d)``.

    Vectorised across samples; the stick index is the loop variable.
    ``defect="remainder"`` leaves the unbroken stick in the remainder
    coordinate, as :func:`project` does. ``defect="base"`` splits it in
    proportion to the base probabilities instead: the tail's label split has
    mean ``p``, so first moments become unbiased and second moments carry
    an ``O(trunc_eps**2)`` bias only.
    """
    if defect not in ("remainder", "base"):
        raise DomainError("defect must be 'remainder' or 'base'")
    _check_eps(trunc_eps)
    rng = rng or RngStream(0)
    out = np.zeros((n, d))
    log_rem = np.zeros(n)
    active = np.arange(n)
    log_eps = math.log(trunc_eps)
    k0 = 1
    while active.size:
        m = active.size
        k = np.arange(k0, k0 + chunk, dtype=float)[None, :]
        lu, l1mu = sample_beta_logs(1.0 - params.alpha, params.theta + k * params.alpha, rng,
                                    size=(m, chunk))
        cum = log_rem[active, None] + np.cumsum(l1mu, axis=1)
        before = np.concatenate([log_rem[active, None], cum[:, :-1]], axis=1)
        # sticks taken: up to and including the first one that drops below eps
        below = cum < log_eps
        first = np.where(below.any(axis=1), below.argmax(axis=1), chunk - 1)
        take = np.arange(chunk)[None, :] <= first[:, None]
        w = np.where(take, np.exp(lu + before), 0.0)
        labels = base.sample(rng, (m, chunk))
        for j in range(d):
            out[active, j] += np.sum(np.where(labels == j + 1, w, 0.0), axis=1)
        log_rem[active] = cum[np.arange(m), first]
        active = active[~below.any(axis=1)]
        k0 += chunk
    if defect == "base":
        out += np.exp(log_rem)[:, None] * base.prob(np.arange(1, d + 1))[None, :]
    return out
