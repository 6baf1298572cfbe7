"""Finite-element spectrum of the d = 1 generator.

Piecewise-linear elements on ``[delta, 1 - delta]`` with a mesh graded
toward both ends. Stiffness comes from ``1/2 int x(1-x) f' g' rho`` and mass
from ``int f g rho``, with natural boundary conditions at the cutoff.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import AssemblyError, AccuracyError, DomainError, NumericError
from .numerics import QuadratureSpec, _NODES, _WG15, _WK, integrate_1d
from .simplex import ModelParams, log_density_mu_full


@dataclass(frozen=True)
class MeshSpec:
    n_cells: int = 512
    cutoff_delta: float = 1e-6
    grading_exponent: float = 2.0

    def __post_init__(self):
        if self.n_cells < 2:
            raise DomainError("need at least 2 cells")
        if not 0.0 < self.cutoff_delta < 0.1:
            raise DomainError("cutoff_delta must lie in (0, 0.1)")
        if not self.grading_exponent >= 1.0:
            raise DomainError("grading_exponent must be >= 1")

    def nodes(self):
        """Symmetric graded nodes; cell widths shrink like ``u**(g-1)`` at both ends."""
        u = np.linspace(0.0, 1.0, self.n_cells + 1)
        g = self.grading_exponent
        left = 0.5 * (2 * u) ** g
        right = 1.0 - 0.5 * (2 * (1 - u)) ** g
        t = np.where(u <= 0.5, left, right)
        d = self.cutoff_delta
        x = d + (1.0 - 2 * d) * t
        x[0], x[-1] = d, 1.0 - d
        return x

    def doubled(self):
        return MeshSpec(2 * self.n_cells, self.cutoff_delta, self.grading_exponent)


@dataclass
class Pencil:
    A: np.ndarray
    M: np.ndarray
    mp: ModelParams
    mesh: MeshSpec
    nodes: np.ndarray


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    mesh: MeshSpec
    refinement_deltas: np.ndarray | None
    eigenvectors: np.ndarray | None = None

    def count_below(self, lam):
        return int(np.sum(self.eigenvalues <= lam))


def _density(x, mp):
    X = np.stack([x, 1.0 - x], axis=-1)
    return np.exp(log_density_mu_full(X, mp))


def _cell_moments(lo, hi, mp):
    """GK15 estimates of ``int rho * w`` on each cell for the weights
    ``(x(1-x), l0^2, l0 l1, l1^2)``, with ``l0, l1`` the hat functions."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    t = (x - lo[:, None]) / (hi - lo)[:, None]
    rho = _density(x, mp)
    l0, l1 = 1.0 - t, t
    ws = [x * (1.0 - x), l0 * l0, l0 * l1, l1 * l1]
    kron, err = [], []
    for w in ws:
        f = rho * w
        k = half * (f @ _WK)
        g = half * (f @ _WG15)
        kron.append(k)
        err.append(np.abs(k - g))
    return np.array(kron), np.array(err)


def assemble(mp: ModelParams, mesh: MeshSpec, rel_tol=1e-11) -> Pencil:
    """Stiffness and mass matrices ``(A, M)`` of the weighted P1 discretisation.

    Cells where the embedded Gauss rule disagrees with Kronrod beyond
    ``rel_tol`` are redone adaptively; a cell that still fails raises
    :class:`AssemblyError` naming it.
    """
    if mp.d != 1:
        raise DomainError("spectral assembly is for d = 1")
    x = mesh.nodes()
    lo, hi = x[:-1], x[1:]
    vals, errs = _cell_moments(lo, hi, mp)
    if not np.all(np.isfinite(vals)):
        bad = int(np.nonzero(~np.all(np.isfinite(vals), axis=0))[0][0])
        raise AssemblyError(f"non-finite integrand on cell {bad}", cell=bad)
    bad = np.nonzero(np.any(errs > rel_tol * np.abs(vals) + 1e-300, axis=0))[0]
    spec = QuadratureSpec(abs_tol=1e-300, rel_tol=rel_tol, max_subdivisions=200)
    for c in bad:
        a, b = lo[c], hi[c]
        weights = [lambda s: s * (1 - s),
                   lambda s: ((b - s) / (b - a)) ** 2,
                   lambda s: (b - s) * (s - a) / (b - a) ** 2,
                   lambda s: ((s - a) / (b - a)) ** 2]
        for j, w in enumerate(weights):
            try:
                vals[j, c], _ = integrate_1d(lambda s, w=w: _density(s, mp) * w(s), a, b, spec)
            except AccuracyError as e:
                raise AssemblyError(f"quadrature failed on cell {c}", cell=int(c),
                                    estimate=e.estimate, error=e.error) from e
    h = hi - lo
    n = x.size
    A = np.zeros((n, n))
    M = np.zeros((n, n))
    idx = np.arange(n - 1)
    k = 0.5 * vals[0] / h**2
    A[idx, idx] += k
    A[idx + 1, idx + 1] += k
    A[idx, idx + 1] -= k
    A[idx + 1, idx] -= k
    M[idx, idx] += vals[1]
    M[idx + 1, idx + 1] += vals[3]
    M[idx, idx + 1] += vals[2]
    M[idx + 1, idx] += vals[2]
    return Pencil(A, M, mp, mesh, x)


def _solve(pencil: Pencil, k):
    n = pencil.A.shape[0]
    if not 1 <= k <= n:
        raise DomainError("k must lie in [1, matrix dimension]")
    try:
        w, v = scipy.linalg.eigh(pencil.A, pencil.M, subset_by_index=[0, k - 1])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise NumericError(f"generalized eigensolve failed: {e}") from e
    return w, v


def eigen_spectrum(pencil: Pencil, k: int = 6, refine=True) -> SpectralResult:
    """The ``k`` smallest eigenvalues of ``A v = lambda M v``, ascending.

    With ``refine`` the problem is re-assembled on the doubled mesh and
    ``refinement_deltas`` holds ``|lambda_fine - lambda| / |lambda_fine|``
    (absolute change where ``lambda_fine`` is below 1e-8).
    """
    w, v = _solve(pencil, k)
    deltas = None
    if refine:
        fine = assemble(pencil.mp, pencil.mesh.doubled())
        wf, _ = _solve(fine, k)
        scale = np.where(np.abs(wf) > 1e-8, np.abs(wf), 1.0)
        deltas = np.abs(wf - w) / scale
    return SpectralResult(w, pencil.mesh, deltas, v)


def jacobi_eigenvalues(theta, k):
    """Exact ``-L`` eigenvalues ``n(n + 2 theta)/2`` for d = 1, p = (1/2, 1/2)."""
    n = np.arange(k, dtype=float)
    return 0.5 * n * (n + 2.0 * theta)
