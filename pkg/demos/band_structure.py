"""Band structure of a periodic high-contrast cell and its gap map.

Sweeps the Bloch number over the first band folding region for a cell
(-1, 1) containing the inclusion (-1/2, 1/2), at several contrasts plus
the exact zero-contrast limit curve, and prints the spectral gaps.

Run:  python3 demos/band_structure.py
"""

import numpy as np

from highcontrast import bloch
from highcontrast.geometry import BoundaryKind, ContrastMedium, Geometry1D

geom = Geometry1D(-1.0, 1.0, ((-0.5, 0.5),))
medium = ContrastMedium(geom, 1e-2, BoundaryKind.bloch(0.5))

k_grid = [0.1 + 0.1 * j for j in range(14) if abs((0.1 + 0.1 * j) % 1) > 2e-3]
eps_list = [1e-1, 1e-2, 0.0]
bands = bloch.dispersion_sweep(medium, k_grid, 3, eps_list)

for eps in eps_list:
    label = f"eps = {eps:g}" if eps else "limit"
    print(f"\n{label}")
    arr = bands.branches[eps]
    for i, k in enumerate(bands.k_grid):
        lams = "  ".join(f"{l:9.4f}" for l in arr[i])
        print(f"  k = {k:4.2f}   lambda: {lams}")
    gaps = bloch.gap_report(bands, eps)
    if gaps:
        for lo, hi in gaps:
            print(f"  gap: ({lo:.4f}, {hi:.4f})  width {hi - lo:.4f}")
    else:
        print("  no gaps among the computed branches")

if bands.crossings:
    print(f"\nnear-degenerate points flagged: {len(bands.crossings)}")
print("\nomega(k) = sqrt(lambda); first branch at the last contrast:")
arr = bands.branches[0.0]
print("  " + "  ".join(f"{np.sqrt(l):.4f}" for l in arr[:, 0]))
