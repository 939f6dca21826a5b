"""Band-structure sweeps over Bloch numbers and contrast values.

Assembles dispersion data lambda_n(k, eps) on a grid of Bloch numbers:
at eps > 0 from the quasi-periodic spectrum of the cell problem (exact
transfer matrices in 1D, phase-twisted finite volumes in 2D), and at
eps = 0 from the limit spectrum with the Bloch closure.  Also extracts
spectral gaps between consecutive branches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import exact1d, fdm, limitspec
from .exact1d import DispersionPoint
from .geometry import BoundaryKind, ContrastMedium, Geometry1D, Geometry2D, GeometryError

__all__ = [
    "DispersionPoint",
    "BandStructure",
    "dispersion_sweep",
    "gap_report",
    "write_bands_csv",
    "write_gaps_csv",
]

DELTA_K = limitspec.DELTA_K
CROSSING_TOL = 1e-4


@dataclass(frozen=True)
class BandStructure:
    """Dispersion branches over a (k, eps) product grid.

    ``branches[eps]`` is an (len(k_grid), branch_count) array of ascending
    eigenvalues; the eps = 0 row holds the limit curve.  ``crossings``
    flags near-degenerate consecutive branches as (eps, k, branch) --
    ordering across such points is by value only, not by continuation.
    """

    k_grid: np.ndarray
    eps_list: tuple
    branches: dict = field(repr=False)
    crossings: tuple = ()

    @property
    def branch_count(self) -> int:
        return next(iter(self.branches.values())).shape[1]

    def points(self):
        for eps in self.eps_list:
            arr = self.branches[eps]
            for i, k in enumerate(self.k_grid):
                for n in range(arr.shape[1]):
                    yield DispersionPoint(float(k), n + 1, float(arr[i, n]), float(eps))


def _validate_k_grid(k_grid) -> np.ndarray:
    ks = np.asarray(k_grid, dtype=float)
    bad = [float(k) for k in ks if abs(k - round(k)) < DELTA_K]
    if bad:
        raise GeometryError(f"Bloch numbers {bad} within {DELTA_K} of an integer; "
                            "the sweep requires non-integer k")
    return ks


def _first_n_positive(eigs: np.ndarray, count: int) -> np.ndarray:
    vals = np.sort(eigs[eigs > limitspec.LAM_FLOOR])
    if vals.size < count:
        raise RuntimeError(f"found {vals.size} of {count} requested branches")
    return vals[:count]


def _spectrum_1d(geom: Geometry1D, eps: float, k: float, count: int) -> np.ndarray:
    """First ``count`` quasi-periodic eigenvalues of the 1D cell, exact."""
    bc = BoundaryKind.bloch(k)
    lam_max = max(4.0, (count * np.pi / (geom.x_hi - geom.x_lo) * 2) ** 2)
    for _ in range(8):
        if eps > 0 or not geom.inclusions:
            s = exact1d.transfer_spectrum_1d(geom, eps if eps > 0 else 1.0, bc, lam_max)
            eigs = s.eigenvalues
        else:
            a = geom.inclusions[0][1]
            pts = exact1d.bloch_limit_curve(a, [k], lam_max)
            eigs = np.array([p.lam for p in pts])
        if np.count_nonzero(eigs > limitspec.LAM_FLOOR) >= count:
            return _first_n_positive(eigs, count)
        lam_max *= 2.0
    raise RuntimeError(f"could not collect {count} branches at k={k}, eps={eps}")


def _is_symmetric_cell(geom: Geometry1D) -> bool:
    if len(geom.inclusions) != 1:
        return False
    (a0, b0), = geom.inclusions
    return (abs(geom.x_lo + geom.x_hi) < 1e-12 and abs(a0 + b0) < 1e-12)


def _spectrum_2d(medium: ContrastMedium, eps: float, k: float, count: int,
                 n: int = None) -> np.ndarray:
    bc = BoundaryKind.bloch(k)
    med = ContrastMedium(medium.geometry, eps if eps > 0 else 0.0, bc)
    if eps > 0:
        opr = fdm.assemble(med, n)
        res = fdm.smallest_eigenpairs(opr, count + 2)
        return _first_n_positive(res.eigenvalues, count)
    spec = limitspec.limit_spectrum(med, 16.0 * (count + 1) ** 2, n)
    return _first_n_positive(spec.eigenvalues, count)


def dispersion_sweep(medium: ContrastMedium, k_grid, branch_count: int,
                     eps_list, n: int = None) -> BandStructure:
    """Band structure over k_grid x eps_list (eps = 0 rows use the limit solver).

    1D cells use exact transfer matrices at every contrast; 2D cells use
    the grid assembly (``n`` forwarded where a grid is needed).  Bloch
    numbers within DELTA_K of an integer are rejected.
    """
    if branch_count < 1:
        raise ValueError("branch_count must be >= 1")
    ks = _validate_k_grid(k_grid)
    geom = medium.geometry
    branches, crossings = {}, []
    for eps in eps_list:
        if eps < 0:
            raise ValueError("contrast values must be >= 0")
        rows = []
        for k in ks:
            if isinstance(geom, Geometry1D):
                if eps == 0 and geom.inclusions and not _is_symmetric_cell(geom):
                    med = ContrastMedium(geom, 0.0, BoundaryKind.bloch(float(k)))
                    spec = limitspec.limit_spectrum(med, 16.0 * (branch_count + 1) ** 2, n)
                    row = _first_n_positive(spec.eigenvalues, branch_count)
                else:
                    row = _spectrum_1d(geom, float(eps), float(k), branch_count)
            elif isinstance(geom, Geometry2D):
                row = _spectrum_2d(medium, float(eps), float(k), branch_count, n)
            else:
                raise GeometryError("dispersion sweeps support 1D and 2D cells")
            rows.append(row)
        arr = np.vstack(rows)
        for i, k in enumerate(ks):
            for j in range(branch_count - 1):
                if arr[i, j + 1] - arr[i, j] < CROSSING_TOL:
                    crossings.append((float(eps), float(k), j + 1))
        branches[float(eps)] = arr
    return BandStructure(ks, tuple(float(e) for e in eps_list), branches,
                         tuple(crossings))


def gap_report(bands: BandStructure, eps: float) -> list[tuple[float, float]]:
    """Spectral gaps at one contrast: intervals between the max of branch n
    over k and the min of branch n+1, when that interval is nonempty."""
    arr = bands.branches[float(eps)]
    gaps = []
    for j in range(arr.shape[1] - 1):
        lo = float(np.max(arr[:, j]))
        hi = float(np.min(arr[:, j + 1]))
        if hi > lo:
            gaps.append((lo, hi))
    return gaps


def write_bands_csv(path: str, bands: BandStructure) -> None:
    """CSV dump: k,epsilon,branch,lambda,omega."""
    with open(path, "w") as fh:
        fh.write("k,epsilon,branch,lambda,omega\n")
        for p in bands.points():
            fh.write(f"{p.k:.16g},{p.eps:.16g},{p.branch},{p.lam:.16g},"
                     f"{np.sqrt(p.lam):.16g}\n")


def write_gaps_csv(path: str, bands: BandStructure) -> None:
    """CSV dump of per-contrast gap intervals: epsilon,gap_lo,gap_hi."""
    with open(path, "w") as fh:
        fh.write("epsilon,gap_lo,gap_hi\n")
        for eps in bands.eps_list:
            for lo, hi in gap_report(bands, eps):
                fh.write(f"{eps:.16g},{lo:.16g},{hi:.16g}\n")
