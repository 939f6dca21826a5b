"""How the spectrum of a high-contrast interval splits as the contrast grows.

A single soft inclusion (-1/2, 1/2) sits in the interval (-1, 1) with
Dirichlet walls.  As epsilon -> 0 the eigenvalues sort themselves into
two families: roots of a nonlocal flux equation (eigenfunctions constant
on the inclusion) and exterior eigenvalues whose modes carry no net flux
through the interface.  Both are available in closed form here, so the
grid solvers can be checked end to end.

Run:  python3 demos/limit_spectrum_study.py
"""

import numpy as np

from highcontrast import exact1d, fdm, limitspec
from highcontrast.geometry import BoundaryKind, ContrastMedium, Geometry1D

geom = Geometry1D(-1.0, 1.0, ((-0.5, 0.5),))
bc = BoundaryKind.dirichlet()
LAM_MAX = 45.0

print("closed-form limit (transfer matrices)")
spec = exact1d.limit_spectrum_1d(geom, bc, LAM_MAX)
for lam, _f in spec.S2:
    print(f"  constant-trace  lambda = {lam:.12f}")
for lam, _f in spec.S1:
    print(f"  zero-flux       lambda = {lam:.12f}   (= 4 pi^2: "
          f"{np.isclose(lam, 4 * np.pi**2)})")
print(f"  side-length ratio rational: {spec.certificate.rational} "
      f"({spec.certificate.n0}/{spec.certificate.m0})")

print("\ngrid limit solver (n = 2000)")
grid_spec = limitspec.limit_spectrum(ContrastMedium(geom, 0.0, bc), LAM_MAX, 2000)
for p in grid_spec.pairs:
    print(f"  {p.branch:<15} lambda = {p.lam:.9f}   flux residual {p.flux_residual:.1e}")

print("\nfinite contrast approaching the limit (first eigenvalue)")
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    opr = fdm.assemble(ContrastMedium(geom, eps, bc), 2000)
    lam = fdm.smallest_eigenpairs(opr, 1).eigenvalues[0]
    print(f"  eps = {eps:7.0e}   lambda_1 = {lam:.9f}   "
          f"gap to limit {abs(lam - spec.S2[0][0]):.2e}")
