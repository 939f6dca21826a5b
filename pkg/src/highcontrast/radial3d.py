"""Concentric spheres: the radially symmetric sector of the 3D problem.

The substitution v = r u reduces the spherically symmetric operator to a
1D problem, which gives a closed transcendental equation for the limit
eigenvalues with a high-contrast ball of radius a inside the unit ball:

    a sqrt(lam) cot(sqrt(lam) (1 - a)) = lam a^2 / 3 - 1.

The zero-flux family is empty in this sector: an exterior radial
eigenfunction with zero flux through the sphere r = a would vanish
identically.  For finite contrast a finite-volume operator on [0, 1]
with r^2-weighted conductances provides the cross-check spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._roots import scan_roots
from .fdm import ALIGN_TOL, EigensolverError, MAX_EIG_ITER, TOL_EIG
from .geometry import GeometryError

__all__ = [
    "RadialField",
    "RadialOperator",
    "sphere_limit_spectrum",
    "sphere_char",
    "radial_operator",
    "radial_eigenpairs",
    "sphere_det_scan",
    "flux_at_interface",
]


@dataclass(frozen=True)
class RadialField:
    """Radial profile u(r) on [0, 1] in the spherically symmetric sector."""

    r: np.ndarray
    u: np.ndarray

    def __call__(self, rq):
        return np.interp(rq, self.r, self.u)


def sphere_char(a: float, lam: float) -> float:
    """Characteristic function whose roots are the limit eigenvalues."""
    s = np.sqrt(lam)
    return a * s / np.tan(s * (1.0 - a)) - (lam * a * a / 3.0 - 1.0)


def _sphere_poles(a: float, lam_max: float) -> list[float]:
    poles = []
    n = 1
    while (n * np.pi / (1.0 - a)) ** 2 <= lam_max * 1.0000001:
        poles.append((n * np.pi / (1.0 - a)) ** 2)
        n += 1
    return poles


def _sphere_eigenfunction(a: float, lam: float, n_samples: int = 2001) -> RadialField:
    """Closed-form limit eigenfunction: 1 inside, sine ratio over r outside."""
    s = np.sqrt(lam)
    r = np.linspace(0.0, 1.0, n_samples)
    u = np.ones_like(r)
    out = r >= a
    denom = np.sin(s * (1.0 - a))
    with np.errstate(divide="ignore", invalid="ignore"):
        u[out] = a * np.sin(s * (1.0 - r[out])) / (r[out] * denom)
    u[np.isclose(r, 0.0)] = 1.0
    if np.isclose(r[-1], 1.0):
        u[-1] = 0.0
    return RadialField(r, u)


def sphere_limit_spectrum(a: float, lam_max: float):
    """All limit eigenvalues in (0, lam_max] with closed-form eigenfunctions.

    Returns (pairs, S1) where pairs is a list of (lam, RadialField) and S1
    is the zero-flux family -- always the empty tuple in this sector.
    """
    if not 0.0 < a < 1.0:
        raise GeometryError("sphere radius must satisfy 0 < a < 1")
    report = scan_roots(lambda lam: sphere_char(a, lam), 1e-9, lam_max,
                        poles=_sphere_poles(a, lam_max), xtol=1e-13)
    pairs = [(r, _sphere_eigenfunction(a, r)) for r in report.roots]
    return pairs, ()


@dataclass(frozen=True)
class RadialOperator:
    """r^2-weighted finite-volume operator on [0, 1].

    Generalized eigenproblem K u = lam M u with M the diagonal of cell
    masses (integral of r^2 over each cell); symmetric positive
    semi-definite by construction, positive definite under the Dirichlet
    closure at r = 1.
    """

    a: float
    epsilon: float
    h: float
    bc_kind: str
    labels: np.ndarray          # 1 inside r < a, 0 outside
    centers: np.ndarray
    K: sp.csr_matrix = field(repr=False)
    M: np.ndarray = field(repr=False)   # diagonal cell masses

    @property
    def n(self) -> int:
        return self.labels.size


def radial_operator(a: float, eps: float, n_grid: int,
                    bc: str = "dirichlet") -> RadialOperator:
    """Radial discretization with the interface aligned to a cell face."""
    if eps <= 0:
        raise GeometryError("radial assembly needs epsilon > 0")
    if bc not in ("dirichlet", "neumann"):
        raise GeometryError(f"unsupported radial closure {bc!r}")
    h = 1.0 / n_grid
    j_if = round(a / h)
    if not 0 < j_if < n_grid or abs(j_if * h - a) > ALIGN_TOL:
        raise GeometryError(f"interface r={a} does not align with the grid (n={n_grid})")
    faces = h * np.arange(n_grid + 1)
    centers = (faces[:-1] + faces[1:]) / 2.0
    labels = (centers < a).astype(int)
    sig = np.where(labels == 1, 1.0 / eps, 1.0)
    masses = (faces[1:] ** 3 - faces[:-1] ** 3) / 3.0
    rows, cols, vals = [], [], []
    for j in range(1, n_grid):           # interior faces; r = 0 face carries r^2 = 0
        sa, sb = sig[j - 1], sig[j]
        g = (2.0 * sa * sb / (sa + sb)) * faces[j] ** 2 / h
        rows += [j - 1, j, j - 1, j]
        cols += [j - 1, j, j, j - 1]
        vals += [g, g, -g, -g]
    if bc == "dirichlet":
        g = 2.0 * sig[-1] * faces[-1] ** 2 / h
        rows.append(n_grid - 1); cols.append(n_grid - 1); vals.append(g)
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n_grid, n_grid))
    K.sum_duplicates()
    return RadialOperator(a, eps, h, bc, labels, centers, K, masses)


def radial_eigenpairs(opr: RadialOperator, count: int):
    """Smallest ``count`` eigenpairs of the weighted generalized problem."""
    if count < 1 or count >= opr.n - 1:
        raise ValueError("count out of range")
    neumann = opr.bc_kind == "neumann"
    k_ask = count + 1 if neumann else count
    Md = sp.diags(opr.M)
    scale = abs(opr.K).sum() / opr.n
    sigma = -1e-8 * scale if neumann else 0.0
    try:
        w, v = spla.eigsh(opr.K, k=k_ask, M=Md, sigma=sigma, which="LM",
                          maxiter=MAX_EIG_ITER)
    except spla.ArpackNoConvergence as exc:
        raise EigensolverError(f"radial eigensolver did not converge: {exc}") from exc
    except RuntimeError as exc:
        raise EigensolverError(f"radial shift-invert failed: {exc}") from exc
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    if neumann:
        w, v = w[1:], v[:, 1:]
    res = np.array([np.linalg.norm(opr.K @ v[:, j] - w[j] * (opr.M * v[:, j]))
                    / max(abs(w[j]), 1e-3 * scale) for j in range(v.shape[1])])
    if (res > 1e2 * TOL_EIG).any():
        raise EigensolverError(f"radial eigenpair residuals too large: {res.max():.2e}")
    return w, v, res


def flux_at_interface(opr: RadialOperator, u: np.ndarray) -> float:
    """Total outward flux 4 pi a^2 sigma du/dr through the face r = a.

    Uses the conserved face flux of the scheme (harmonic-mean conductance
    across the interface), matching the discrete divergence identity."""
    j = round(opr.a / opr.h)
    s_in, s_out = 1.0 / opr.epsilon, 1.0
    g = 2.0 * s_in * s_out / (s_in + s_out) / opr.h
    return 4.0 * np.pi * opr.a ** 2 * g * (u[j] - u[j - 1])


def _exterior_radial(a: float, n_grid: int):
    """Exterior block (cells in (a, 1)) with a trace dof at r = a, sigma = 1."""
    h = 1.0 / n_grid
    j_if = round(a / h)
    faces = h * np.arange(j_if, n_grid + 1)
    nE = n_grid - j_if
    masses = (faces[1:] ** 3 - faces[:-1] ** 3) / 3.0
    rows, cols, vals = [], [], []
    for j in range(1, nE):
        g = faces[j] ** 2 / h
        rows += [j - 1, j, j - 1, j]
        cols += [j - 1, j, j, j - 1]
        vals += [g, g, -g, -g]
    g_if = 2.0 * a ** 2 / h                 # half-cell tie to the trace dof
    rows.append(0); cols.append(0); vals.append(g_if)
    g_out = 2.0 * 1.0 / h                   # Dirichlet closure at r = 1
    rows.append(nE - 1); cols.append(nE - 1); vals.append(g_out)
    K = sp.csr_matrix((vals, (rows, cols)), shape=(nE, nE))
    return K.tocsc(), sp.diags(masses).tocsc(), g_if


def sphere_det_scan(a: float, lam_max: float, n_grid: int):
    """Limit eigenvalues from the discrete radial flux equation
    T(lam) = 4 pi [flux of the unit-trace exterior solve] + lam |ball|;
    cross-checks the closed-form roots on the finite-volume grid."""
    K, M, g_if = _exterior_radial(a, n_grid)
    ball = 4.0 / 3.0 * np.pi * a ** 3
    e0 = np.zeros(K.shape[0]); e0[0] = g_if

    def T(lam):
        u = spla.splu((K - lam * M).tocsc()).solve(e0)
        return 4.0 * np.pi * g_if * (u[0] - 1.0) + lam * ball

    w = spla.eigsh(sp.csr_matrix(K), k=min(K.shape[0] - 2, 40), M=M,
                   sigma=0.0, which="LM", return_eigenvectors=False)
    poles = sorted(float(x) for x in w if x <= lam_max * 1.05)
    report = scan_roots(T, 1e-9, lam_max, poles=poles, xtol=1e-13)
    return list(report.roots)
