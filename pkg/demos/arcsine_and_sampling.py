"""Projection measure for d = 1: density, stick-breaking samples and MCMC.

With theta = 0 and p = (1/2, 1/2) the projected weight is arcsine distributed.
We compare a histogram of stick-breaking samples, an MCMC run and the exact
density on a common grid.
"""
import numpy as np

from pdlab import (BasePmf, ChainConfig, GemParams, ModelParams, RngStream, expect_mu,
                   log_density_mu, sample_mu_mcmc, sample_projection)

mp = ModelParams(0.0, [0.5, 0.5])
rng = RngStream(7)

total, _ = expect_mu(None, mp)
print(f"total mass by quadrature: {total:.12f}")

x_sb = sample_projection(GemParams(0.5, 0.0), BasePmf.finite([0.5, 0.5]), 1, 20_000, 1e-3,
                         rng.substream(1), defect="base")[:, 0]
x_mc = sample_mu_mcmc(mp, ChainConfig(5000, 1000, n_chains=20), rng.substream(2)).samples[:, 0]

edges = np.linspace(0, 1, 11)
mid = 0.5 * (edges[1:] + edges[:-1])
exact = np.exp(log_density_mu(mid[:, None], mp))
h_sb, _ = np.histogram(x_sb, edges, density=True)
h_mc, _ = np.histogram(x_mc, edges, density=True)

print(f"{'x':>6} {'density':>9} {'sticks':>9} {'mcmc':>9}")
for row in zip(mid, exact, h_sb, h_mc):
    print("{:6.2f} {:9.4f} {:9.4f} {:9.4f}".format(*row))
print("(histograms average the density over each bin, so the end bins sit above the midpoint value)")
