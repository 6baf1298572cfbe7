import math

import numpy as np
import pytest

from pdlab import (BasePmf, DomainError, GemParams, ModelParams, RngStream, expect_mu, project,
                   sample_dirichlet_process, sample_gem, sample_projection, to_descending)
from pdlab import QuadratureSpec, integrate_1d
from pdlab.simplex import log_density_mu_full
from pdlab.stick_breaking import AtomicMeasure, WeightSequence


def first_sticks(params, n, rng, k=1):
    return np.array([sample_gem(params, 1e-3, rng.substream(i), chunk=256).weights[:k]
                     for i in range(n)])


@pytest.mark.parametrize("alpha, theta", [(0.0, 1.0), (0.5, 0.5), (0.3, 2.0)])
def test_gem_mass_conservation(alpha, theta, rng):
    for i in range(20):
        ws = sample_gem(GemParams(alpha, theta), 1e-4, rng.substream(i))
        assert abs(ws.total() - 1.0) < 1e-12
        assert np.all(ws.weights > 0)
        assert 0 <= ws.tail_mass < 1e-4


def test_gem_first_stick_means():
    # V_1 ~ Beta(1 - alpha, theta + alpha), sampled directly through the sticks
    for alpha, theta, want in [(0.0, 1.0, 0.5), (0.5, 0.5, 1 / 3)]:
        n = 10000
        v = first_sticks(GemParams(alpha, theta), n, RngStream(5, int(10 * alpha)))[:, 0]
        assert abs(v.mean() - want) < 3.5 * v.std() / math.sqrt(n)


def test_gem_product_formula_first_moments():
    alpha, theta = 0.5, 1.0
    n = 10000
    rng = RngStream(9)
    # with eps = 1e-3 fewer than five sticks would need an astronomically unlikely draw
    v = np.array([sample_gem(GemParams(alpha, theta), 1e-3, rng.substream(i), chunk=256).weights[:5]
                  for i in range(n)])
    eu = [(1 - alpha) / (1 - alpha + theta + k * alpha) for k in range(1, 6)]
    want = [eu[k] * np.prod([1 - eu[j] for j in range(k)]) for k in range(5)]
    se = v.std(axis=0) / math.sqrt(n)
    assert np.all(np.abs(v.mean(axis=0) - want) < 4 * se)


def test_gem_params_validation():
    with pytest.raises(DomainError):
        GemParams(1.0, 1.0)
    with pytest.raises(DomainError):
        GemParams(0.5, -0.5)
    with pytest.raises(DomainError):
        sample_gem(GemParams(0.5, 1.0), 0.0)


def test_to_descending():
    ws = WeightSequence(np.array([0.2, 0.5, 0.3]), 0.0)
    out = to_descending(ws)
    assert list(out.weights) == [0.5, 0.3, 0.2] and out.tail_mass == 0.0
    assert np.array_equal(to_descending(out).weights, out.weights)
    single = to_descending(WeightSequence(np.array([1.0]), 0.0))
    assert list(single.weights) == [1.0]


def test_dirichlet_process_point_mass_and_merging(rng):
    m = sample_dirichlet_process(GemParams(0.5, 1.0), BasePmf.finite([1.0]), 1e-4, rng)
    assert list(m.labels) == [1]
    assert m.weights[0] == pytest.approx(1 - m.defect, abs=1e-12)
    m = sample_dirichlet_process(GemParams(0.5, 1.0), BasePmf.geometric(0.5), 1e-4, rng)
    assert len(np.unique(m.labels)) == len(m.labels)
    assert abs(m.total() - 1.0) < 1e-12


def test_project_examples():
    m = AtomicMeasure(np.array([1, 2]), np.array([0.6, 0.4]), 0.0)
    assert project(m, 1) == pytest.approx([0.6])
    m = AtomicMeasure(np.array([3]), np.array([1.0]), 0.0)
    assert list(project(m, 2)) == [0.0, 0.0]
    with pytest.raises(DomainError):
        project(m, 0)


def test_base_pmfs():
    assert BasePmf.geometric(0.5).prob(np.arange(1, 4)) == pytest.approx([0.5, 0.25, 0.125])
    assert BasePmf.inverse_square().prob(np.arange(1, 20000)).sum() == pytest.approx(1.0, abs=1e-4)
    assert BasePmf.finite([0.3, 0.7]).support_size == 2
    with pytest.raises(DomainError):
        BasePmf.finite([0.3, 0.6])


def test_projection_mean_matches_quadrature():
    # alpha = 1/2, theta = 0, uniform base on {1, 2}
    mp = ModelParams(0.0, [0.5, 0.5])
    want, _ = expect_mu(lambda X: X[..., 0], mp)
    x = sample_projection(GemParams(0.5, 0.0), BasePmf.finite([0.5, 0.5]), 1, 10**5, 1e-2,
                          RngStream(3), defect="base")[:, 0]
    assert abs(x.mean() - want) < 3 * x.std() / math.sqrt(x.size)


def bin_probabilities(mp, edges):
    spec = QuadratureSpec(1e-14, 1e-10, 4000, (mp.theta - 0.5, mp.theta - 0.5))

    def dens(a, b):
        return np.exp(log_density_mu_full(np.stack([a, b], axis=-1), mp))

    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        def g(da, db, lo=lo, hi=hi):
            return dens(lo + da, 1 - hi + db)
        out.append(integrate_1d(g, lo, hi, spec, offsets=True)[0])
    return np.array(out)


def test_projection_chi_square_against_density():
    from scipy.stats import chi2
    for theta, p in [(1.0, 0.5), (0.5, 0.3)]:
        mp = ModelParams(theta, [p, 1 - p])
        n = 40000
        x = sample_projection(GemParams(0.5, theta), BasePmf.finite([p, 1 - p]), 1, n, 1e-2,
                              RngStream(4, int(10 * theta)), defect="base")[:, 0]
        edges = np.linspace(0, 1, 21)
        probs = bin_probabilities(mp, edges)
        assert probs.sum() == pytest.approx(1.0, abs=1e-8)
        counts, _ = np.histogram(x, edges)
        stat = np.sum((counts - n * probs) ** 2 / (n * probs))
        assert stat < chi2.ppf(0.99, len(probs) - 1)


def test_projection_remainder_keeps_defect(rng):
    x = sample_projection(GemParams(0.5, 1.0), BasePmf.finite([0.5, 0.5]), 1, 1000, 1e-2, rng)
    y = sample_projection(GemParams(0.5, 1.0), BasePmf.finite([0.5, 0.5]), 1, 1000, 1e-2, rng,
                          defect="base")
    assert np.all((x >= 0) & (x <= 1)) and np.all((y >= 0) & (y <= 1))
    with pytest.raises(DomainError):
        sample_projection(GemParams(0.5, 1.0), BasePmf.finite([1.0]), 1, 10, 1e-2, rng,
                          defect="bogus")
