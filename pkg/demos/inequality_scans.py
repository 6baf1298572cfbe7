"""Scans of the localisation and perturbation quantities on the 2-simplex,
and the infinite-support counterexample.

Each scan prints the raw values and a log-log slope in s.
"""
import numpy as np

from pdlab import DirichletParams, ModelParams, RngStream
from pdlab.inequality import (boundary_flux, cheeger_scan, cheeger_test_function,
                              counterexample_scan, h_estimate, loglog_slope, psi_estimate)

mp = ModelParams.uniform(1.0, 2)
s_grid = np.logspace(2, 6, 5)
rng = RngStream(3)

scan = cheeger_scan(mp, s_grid, 128, rng.substream(0))
print("Cheeger scan")
for s, a1, a2, lam in zip(s_grid, scan.a1, scan.a2, scan.lambda_lb):
    print(f"  s={s:8.0f}  a1={a1:.4f}  a2={a2:.3e}  lambda_lb={lam:.4g}")
print("  slopes:", {k: round(v, 3) for k, v in scan.slopes.items()})

h = [h_estimate(s, mp, 128, rng.substream(10 + k)) for k, s in enumerate(s_grid)]
print(f"h(s) slope {loglog_slope(s_grid, h):.3f}")

dp = DirichletParams.matched(mp)
psi = [psi_estimate(3 * s, mp, dp, 128, rng.substream(20 + k)).psi for k, s in enumerate(s_grid)]
print(f"psi(3s) values {np.round(psi, 4)}, slope {loglog_slope(s_grid, psi):.3f}")

f = cheeger_test_function()
for r in (1e3, 1e5, 1e7):
    print(f"boundary flux at r={r:.0e}: {boundary_flux(r, mp, f):.4f}")

cx = counterexample_scan(1.0, 1.0, None, range(5, 26, 5))
print("counterexample I_n:", np.round(cx.I, 5))
print(f"  integrand limit {cx.integrand_limit:.5f}, tabulated limit {cx.analytic_limit:.5f}")
