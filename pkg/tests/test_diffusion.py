import math

import numpy as np
import pytest

from pdlab import DomainError, ModelParams, RngStream, SimplexPoint
from pdlab.diffusion import (SimConfig, _run_paths, drift_exact, em_step, invariant_check,
                             simulate, simulate_many)
from pdlab.dirichlet_form import Polynomial, constant, coordinate, diffusion_matrix


def one_step_increments(x, mp, h, n, rng):
    X0 = np.append(x, 1 - np.sum(x))
    dW = math.sqrt(h) * rng.normal((n, 1, mp.d))
    return _run_paths(X0, mp.theta, mp.kappa, mp.parr**2, h, 1e-8, dW, 1) - x


def test_zero_step_is_identity(rng):
    mp = ModelParams(1.0, [0.2, 0.3, 0.5])
    x = np.array([0.25, 0.35])
    out = em_step(x, mp, SimConfig(step_h=0.0), rng)
    assert isinstance(out, SimplexPoint)
    assert np.array_equal(out.x, x)


def test_symmetric_point_zero_drift():
    mp = ModelParams(0.0, [0.5, 0.5])
    assert drift_exact(np.array([0.5]), mp) == pytest.approx([0.0], abs=1e-15)


def test_single_step_moments():
    mp = ModelParams(1.0, [0.2, 0.3, 0.5])
    x = np.array([0.3, 0.4])
    h = 1e-2
    dx = one_step_increments(x, mp, h, 10**6, RngStream(6))
    b = drift_exact(x, mp)
    tamed = b / (1 + h * np.linalg.norm(b))
    se = dx.std(axis=0) / math.sqrt(len(dx))
    assert np.all(np.abs(dx.mean(axis=0) - h * tamed) < 4 * se)
    # the drift estimate itself is within 0.05 of the untamed drift
    assert np.all(np.abs(dx.mean(axis=0) / h - b) < 0.05)
    cov = np.cov(dx.T) / h
    assert np.allclose(cov, diffusion_matrix(x), atol=3e-3)


def test_simulate_matches_repeated_steps():
    mp = ModelParams(1.0, [0.5, 0.5])
    cfg = SimConfig(step_h=1e-3, n_steps=50, thinning=1)
    traj = simulate(np.array([0.4]), mp, cfg, RngStream(2))
    rng = RngStream(2)
    noise = rng.normal((50, 1))
    x = np.array([0.4])
    from pdlab.diffusion import _step_inplace
    X = np.append(x, 0.6)
    for n in range(50):
        _step_inplace(X, mp.theta, mp.kappa, mp.parr**2, 1e-3, 1e-8, noise[n], np.empty(1))
        assert X[0] == traj.states[n + 1, 0]


def test_simulate_reproducible_and_zero_steps():
    mp = ModelParams(1.0, [0.2, 0.3, 0.5])
    cfg = SimConfig(step_h=1e-4, n_steps=10_000, thinning=10)
    a = simulate(np.array([0.3, 0.3]), mp, cfg, RngStream(5))
    b = simulate(np.array([0.3, 0.3]), mp, cfg, RngStream(5))
    assert np.array_equal(a.states, b.states)
    assert a.states.shape == (1001, 2)
    z = simulate(np.array([0.3, 0.3]), mp, SimConfig(n_steps=0), RngStream(5))
    assert z.states.shape == (1, 2) and z.clamp_fraction == 0.0
    many = simulate_many(np.array([0.3, 0.3]), mp, SimConfig(1e-4, 100, thinning=10),
                         RngStream(5), 3, threads=2)
    assert len(many) == 3 and not np.array_equal(many[0].states, many[1].states)


def test_states_stay_in_simplex():
    mp = ModelParams(-0.25, [0.1, 0.9])
    traj = simulate(np.array([0.5]), mp, SimConfig(1e-3, 200_000, thinning=1), RngStream(7))
    assert np.all(traj.states >= 1e-8 * (1 - 1e-9)) and np.all(traj.states <= 1 - 1e-8 * (1 - 1e-9))


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig(step_h=-1.0)
    with pytest.raises(DomainError):
        SimConfig(boundary_eps=0.0)
    mp = ModelParams(1.0, [0.5, 0.5])
    with pytest.raises(DomainError):
        em_step(np.array([0.0]), mp, SimConfig(), RngStream(1))
    with pytest.raises(DomainError):
        simulate(np.array([0.5]), mp, SimConfig(boundary_eps=0.3), RngStream(1))


def test_invariant_check_constant_and_burn_in():
    mp = ModelParams(1.0, [0.5, 0.5])
    traj = simulate(np.array([0.5]), mp, SimConfig(1e-3, 1000, thinning=10), RngStream(1))
    rep = invariant_check(traj, mp, [constant(1.0)], burn_in=100)
    assert rep.rows[0].time_average == 1.0 and rep.rows[0].z == 0.0 and rep.ok
    with pytest.raises(DomainError):
        invariant_check(traj, mp, [constant(1.0)], burn_in=2000)


def test_invariance_d1_arcsine():
    mp = ModelParams(0.0, [0.5, 0.5])
    traj = simulate(np.array([0.5]), mp, SimConfig(1e-4, 2 * 10**6, thinning=20), RngStream(8))
    obs = [coordinate(0, 1), Polynomial([[2]], [1.0], name="x^2")]
    rep = invariant_check(traj, mp, obs, burn_in=10_000)
    assert rep.ok, rep.rows
    assert rep.rows[0].reference == pytest.approx(0.5, abs=1e-9)
    assert rep.rows[1].reference == pytest.approx(0.375, abs=1e-9)


def test_invariance_d2():
    mp = ModelParams(1.0, [0.2, 0.3, 0.5])
    traj = simulate(np.array([0.3, 0.3]), mp, SimConfig(1e-4, 2 * 10**6, thinning=20),
                    RngStream(9))
    obs = [coordinate(0, 2), Polynomial([[1, 1]], [1.0], name="x1*x2")]
    rep = invariant_check(traj, mp, obs, burn_in=10_000)
    assert rep.ok, rep.rows
    assert rep.clamp_fraction < 0.05


def test_invariance_d3_uses_mcmc_reference():
    mp = ModelParams.uniform(1.0, 3)
    traj = simulate(np.full(3, 0.25), mp, SimConfig(1e-4, 10**6, thinning=20), RngStream(10))
    rep = invariant_check(traj, mp, [coordinate(0, 3)], burn_in=10_000,
                          reference_rng=RngStream(11))
    assert rep.rows[0].reference_stderr > 0
    assert rep.rows[0].reference == pytest.approx(0.25, abs=4 * rep.rows[0].reference_stderr)
    assert rep.ok, rep.rows
