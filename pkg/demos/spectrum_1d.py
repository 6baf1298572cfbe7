"""Finite-element spectrum of the generator for d = 1 against the exact values.

For p = (1/2, 1/2) the eigenvalues of -L are n(n + 2 theta)/2. P1 elements
converge at second order, so the error drops about fourfold per mesh doubling.
"""
from pdlab import ModelParams
from pdlab.spectral import MeshSpec, assemble, eigen_spectrum, jacobi_eigenvalues

theta = 1.0
mp = ModelParams(theta, [0.5, 0.5])
exact = jacobi_eigenvalues(theta, 5)
for cells in (64, 128, 256, 512):
    res = eigen_spectrum(assemble(mp, MeshSpec(cells, 1e-6)), k=5, refine=False)
    err = abs(res.eigenvalues - exact)[1:]
    print(f"{cells:4d} cells  lambda = {res.eigenvalues.round(5)}  max error {err.max():.2e}")
print("exact:", exact)

skew = eigen_spectrum(assemble(ModelParams(theta, [0.3, 0.7]), MeshSpec(256, 1e-6)), k=4)
print("p = (0.3, 0.7):", skew.eigenvalues.round(5))
