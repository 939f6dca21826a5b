"""Limit spectrum of the high-contrast operator on grid geometries.

As the contrast grows, eigenvalues accumulate on two families.  The
``constant_trace`` family consists of roots of det T(lambda) = 0, where T
is the m x m matrix of interface fluxes of exterior Helmholtz solves with
unit constant data on one interface at a time, shifted by lambda times
the inclusion volumes; the eigenfunctions are constant (c_i) on the
inclusions.  The ``zero_flux`` family consists of eigenvalues of the
exterior problem with zero data on all interfaces whose eigenspaces
contain functions with vanishing total flux through every interface;
those eigenfunctions vanish identically on the inclusions.

Everything here works on the cell grids of :mod:`highcontrast.fdm`; the
exterior block and interface couplings are shared with the
Dirichlet-to-Neumann reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._roots import POLE_MARGIN, scan_roots
from .dtn import _unit_stiffness_blocks
from .fdm import build_grid
from .geometry import ContrastMedium, GeometryError

__all__ = [
    "LimitEigenpair",
    "LimitSpectrum",
    "ExteriorSystem",
    "CharacteristicDeterminant",
    "ResonanceError",
    "build_exterior",
    "exterior_helmholtz_solve",
    "det_scan",
    "zero_flux_branch",
    "limit_spectrum",
    "solve_limit_neumann",
    "limit_spectrum_neumann",
    "effective_resolvent",
    "write_limit_csv",
]

TOL_ROOT = 1e-10        # eigenvalue bracketing tolerance
TOL_FLUX = 1e-6         # base zero-flux filter tolerance (scaled)
CLUSTER_TOL = 1e-6      # eigenvalue cluster / collision reporting width
DELTA_K = 1e-3          # exclusion margin around integer Bloch numbers
LAM_FLOOR = 1e-8        # strictly positive spectrum only


class ResonanceError(ValueError):
    """Requested lambda too close to an exterior resonance."""


@dataclass(frozen=True)
class LimitEigenpair:
    """One limit eigenvalue with its inclusion constants and exterior field.

    ``u_plus`` is a full cell-grid vector: exterior cells carry the
    Helmholtz solution, inclusion cells carry c_i (zero for the
    ``zero_flux`` branch, where the eigenfunction vanishes inside).
    """

    lam: float
    c: np.ndarray
    u_plus: np.ndarray = field(repr=False)
    branch: str                     # "constant_trace" | "zero_flux"
    flux_residual: float
    pde_residual: float

    @property
    def omega(self) -> float:
        return float(np.sqrt(self.lam))


@dataclass(frozen=True)
class LimitSpectrum:
    """Collected limit eigenpairs plus scan diagnostics.

    ``excluded`` lists (lambda, flux magnitude) of exterior eigendirections
    that failed the zero-flux filter; ``unresolved`` lists determinant
    roots too close to an exterior resonance to classify.
    """

    pairs: tuple
    excluded: tuple = ()
    clusters: tuple = ()
    unresolved: tuple = ()

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class ExteriorSystem:
    """Exterior block of the interface-augmented grid system.

    Cells outside the inclusions plus the interface trace couplings, at
    unit coefficient, with the medium's outer closure.  Caches the
    exterior eigendecomposition (zero interface data), whose eigenvalues
    are the poles of the characteristic determinant.
    """

    medium: ContrastMedium
    grid: object
    incl_of: np.ndarray
    idx_in: np.ndarray
    idx_out: np.ndarray
    K_EE: sp.csc_matrix
    K_EG: sp.csr_matrix
    K_GG_out: np.ndarray
    C: np.ndarray
    measures: np.ndarray            # discrete inclusion volumes
    _eig_cache: tuple = None

    @property
    def vol(self) -> float:
        return self.grid.cell_volume

    @property
    def n_inclusions(self) -> int:
        return self.C.shape[1]

    def interface_flux(self, phi: np.ndarray, u_ext: np.ndarray) -> np.ndarray:
        """Total flux out of each inclusion for trace phi and exterior field u_ext."""
        phi = np.asarray(phi)
        kg = self.K_GG_out if phi.ndim == 1 else self.K_GG_out[:, None]
        per_face = kg * phi + self.K_EG.T.conj() @ u_ext
        return -(self.C.T @ per_face)

    def exterior_eigs(self, lam_max: float):
        """Exterior eigenpairs (zero interface data) up to lam_max, cached."""
        if self._eig_cache is None or self._eig_cache[0] < lam_max:
            dense = (self.K_EE / self.vol).toarray()
            w, v = sla.eigh(dense)
            self._eig_cache = (max(lam_max, w[-1]), w, v)
        _, w, v = self._eig_cache
        keep = w <= lam_max
        return w[keep], v[:, keep]

    def helmholtz_factor(self, lam):
        shift = self.K_EE - lam * self.vol * sp.identity(
            self.K_EE.shape[0], dtype=np.result_type(self.K_EE.dtype, type(lam)),
            format="csc")
        return spla.splu(shift.tocsc())


def _validate_bloch_k(medium: ContrastMedium) -> None:
    if medium.bc.kind != "bloch":
        return
    ks = medium.bc.k if isinstance(medium.bc.k, tuple) else (medium.bc.k,)
    for k in ks:
        if abs(k - round(k)) < DELTA_K:
            raise GeometryError(
                f"Bloch number {k} is within {DELTA_K} of an integer; the "
                "constant-trace closure degenerates there (integer case is "
                "Neumann-like and out of scope)")


def build_exterior(medium: ContrastMedium, n: int = None,
                   allow_integer_k: bool = False) -> ExteriorSystem:
    """Exterior system of a medium; the contrast value is irrelevant here."""
    if not allow_integer_k:
        _validate_bloch_k(medium)
    probe = medium if medium.epsilon > 0 else medium.with_epsilon(1.0)
    grid = build_grid(probe, n)
    (gamma, incl_of, idx_in, idx_out,
     _K_II, _K_IG, _K_GG_in, K_EE, K_EG, K_GG_out) = _unit_stiffness_blocks(probe, grid)
    m = int(incl_of.max()) if incl_of.size else 0
    if m == 0:
        raise GeometryError("limit spectrum needs at least one inclusion")
    C = np.zeros((len(gamma), m))
    for i in range(1, m + 1):
        C[incl_of == i, i - 1] = 1.0
    counts = np.array([np.count_nonzero(grid.labels == i) for i in range(1, m + 1)])
    return ExteriorSystem(medium, grid, incl_of, idx_in, idx_out,
                          K_EE.tocsc(), K_EG, K_GG_out, C,
                          counts * grid.cell_volume)


class CharacteristicDeterminant:
    """det T(lambda) with T_ij = (flux through interface i of the exterior
    solve with unit data on interface j) + delta_ij * lambda * |inclusion i|.

    Symmetric (Hermitian under Bloch) for real lambda away from the pole
    set of exterior eigenvalues.
    """

    def __init__(self, ext: ExteriorSystem, lam_max: float):
        self.ext = ext
        self.poles = ext.exterior_eigs(lam_max * 1.05 + 1.0)[0]

    def solves(self, lam: float) -> np.ndarray:
        """Exterior solutions (columns) for unit data on each interface."""
        lu = self.ext.helmholtz_factor(lam)
        rhs = -(self.ext.K_EG @ self.ext.C)
        return lu.solve(np.asarray(rhs, dtype=lu.U.dtype))

    def matrix(self, lam: float) -> np.ndarray:
        U = self.solves(lam)
        T = self.ext.interface_flux(self.ext.C.astype(U.dtype), U)
        T = np.asarray(T)
        T[np.diag_indices_from(T)] += lam * self.ext.measures
        return T

    def __call__(self, lam: float) -> float:
        d = np.linalg.det(self.matrix(lam))
        return float(np.real(d))


def exterior_helmholtz_solve(medium: ContrastMedium, lam: float, c: np.ndarray,
                             n: int = None, ext: ExteriorSystem = None) -> np.ndarray:
    """Full-grid exterior Helmholtz solution with constant data c_i per interface.

    Raises :class:`ResonanceError` when lambda sits on an exterior
    eigenvalue (the determinant scan never asks for those).
    """
    ext = ext or build_exterior(medium, n)
    poles = ext.exterior_eigs(abs(lam) * 1.2 + 1.0)[0]
    if poles.size and np.min(np.abs(poles - lam)) < POLE_MARGIN * max(1.0, abs(lam)):
        raise ResonanceError(f"lambda={lam} is an exterior resonance")
    c = np.asarray(c, dtype=complex if ext.K_EE.dtype.kind == "c" else float)
    phi = ext.C @ c
    lu = ext.helmholtz_factor(lam)
    u_ext = lu.solve(np.asarray(-(ext.K_EG @ phi), dtype=lu.U.dtype))
    u = np.zeros(ext.grid.ncells, dtype=u_ext.dtype)
    u[ext.idx_out] = u_ext
    for i in range(ext.n_inclusions):
        u[ext.grid.labels == i + 1] = c[i]
    return u


def _normalize_direction(c: np.ndarray) -> np.ndarray:
    c = c / np.linalg.norm(c)
    j = int(np.argmax(np.abs(c) > 1e-8 * np.max(np.abs(c))))
    lead = c[j]
    if np.iscomplexobj(c):
        c = c * (np.conj(lead) / abs(lead))
        if np.max(np.abs(c.imag)) < 1e-10:
            c = c.real
    elif lead < 0:
        c = -c
    return c


def _complete_root(ext: ExteriorSystem, cd: CharacteristicDeterminant,
                   lam: float) -> LimitEigenpair:
    T = cd.matrix(lam)
    _, s, vh = np.linalg.svd(T)
    c = _normalize_direction(vh[-1].conj())
    phi = ext.C @ c
    lu = ext.helmholtz_factor(lam)
    u_ext = lu.solve(np.asarray(-(ext.K_EG @ phi), dtype=lu.U.dtype))
    u = np.zeros(ext.grid.ncells, dtype=u_ext.dtype)
    u[ext.idx_out] = u_ext
    for i in range(ext.n_inclusions):
        u[ext.grid.labels == i + 1] = c[i]
    scale = max(np.max(np.abs(T)), 1.0)
    flux_res = float(np.linalg.norm(T @ c) / scale)
    shift = ext.K_EE @ u_ext - lam * ext.vol * u_ext + ext.K_EG @ phi
    pde_res = float(np.linalg.norm(shift) /
                    (ext.vol * max(lam, 1.0) * max(np.linalg.norm(u_ext), 1e-300)))
    return LimitEigenpair(float(lam), c, u, "constant_trace", flux_res, pde_res)


def det_scan(medium: ContrastMedium, lam_max: float, n: int = None,
             step: float = None, ext: ExteriorSystem = None) -> LimitSpectrum:
    """Constant-trace limit eigenvalues: roots of det T on (0, lam_max]."""
    if lam_max <= 0:
        raise ValueError("lam_max must be > 0")
    ext = ext or build_exterior(medium, n)
    cd = CharacteristicDeterminant(ext, lam_max)
    report = scan_roots(cd, LAM_FLOOR, lam_max, poles=cd.poles,
                        step=step or lam_max / 512.0, xtol=1e-13,
                        cluster_tol=CLUSTER_TOL)
    pairs, unresolved = [], []
    for r in report.roots:
        if r <= LAM_FLOOR * 10:
            continue
        if cd.poles.size and np.min(np.abs(cd.poles - r)) < CLUSTER_TOL * max(1.0, r):
            unresolved.append(float(r))
            continue
        pairs.append(_complete_root(ext, cd, r))
    return LimitSpectrum(tuple(pairs), clusters=report.clusters,
                         unresolved=tuple(unresolved))


def zero_flux_branch(medium: ContrastMedium, lam_max: float, n: int = None,
                     ext: ExteriorSystem = None) -> LimitSpectrum:
    """Exterior eigenvalues whose eigenspaces carry zero-flux eigenfunctions.

    Degenerate eigenvalues are handled as clusters: within each cluster
    the per-inclusion flux matrix is formed and its (numerical) null
    directions are the admitted limit eigenfunctions.  Directions with
    genuinely nonzero flux are reported in ``excluded`` -- they are not
    limit eigenvalues even though they are exterior eigenvalues.
    """
    ext = ext or build_exterior(medium, n)
    w, v = ext.exterior_eigs(lam_max)
    m = ext.n_inclusions
    pairs, excluded = [], []
    i = 0
    while i < w.size:
        j = i + 1
        while j < w.size and w[j] - w[j - 1] < CLUSTER_TOL * max(1.0, w[j]):
            j += 1
        lam = float(np.mean(w[i:j]))
        if lam > LAM_FLOOR:
            V = v[:, i:j]
            F = np.column_stack([ext.interface_flux(np.zeros(ext.C.shape[0]), V[:, d])
                                 for d in range(j - i)])
            Uf, s, Vh = np.linalg.svd(F, full_matrices=True)
            s_full = np.concatenate([s, np.zeros(max(0, (j - i) - len(s)))])
            smax = s_full.max() if s_full.size else 0.0
            thr = max(TOL_FLUX, ext.grid.h) * max(1.0, smax)
            for d in range(j - i):
                sd = s_full[d] if d < s_full.size else 0.0
                z = Vh.conj().T[:, d]
                if sd <= thr:
                    u_ext = V @ z
                    u_ext = u_ext / (np.linalg.norm(u_ext) * np.sqrt(ext.vol))
                    u = np.zeros(ext.grid.ncells, dtype=u_ext.dtype)
                    u[ext.idx_out] = u_ext
                    flux = np.linalg.norm(ext.interface_flux(
                        np.zeros(ext.C.shape[0]), u_ext))
                    res = np.linalg.norm(ext.K_EE @ u_ext - lam * ext.vol * u_ext)
                    pde = float(res / (ext.vol * max(lam, 1.0) * np.linalg.norm(u_ext)))
                    pairs.append(LimitEigenpair(lam, np.zeros(m), u,
                                                "zero_flux", float(flux), pde))
                else:
                    excluded.append((lam, float(sd)))
        i = j
    return LimitSpectrum(tuple(pairs), excluded=tuple(excluded))


def limit_spectrum(medium: ContrastMedium, lam_max: float, n: int = None,
                   step: float = None) -> LimitSpectrum:
    """Both limit families on (0, lam_max], merged and sorted by eigenvalue."""
    ext = build_exterior(medium, n)
    s2 = det_scan(medium, lam_max, n, step, ext=ext)
    s1 = zero_flux_branch(medium, lam_max, n, ext=ext)
    pairs = tuple(sorted(s2.pairs + s1.pairs, key=lambda p: p.lam))
    return LimitSpectrum(pairs, excluded=s1.excluded,
                         clusters=s2.clusters, unresolved=s2.unresolved)


def solve_limit_neumann(medium: ContrastMedium, f: np.ndarray, n: int = None):
    """Limit source problem under a Neumann outer condition.

    The source must have zero mesh mean (solvability).  Solves the
    exterior problem with zero interface data first, then shifts by the
    constant that makes the combined field mean-free; the shift is the
    inclusion value c0.  Returns (u, c0) with u a full grid vector.
    """
    if medium.bc.kind != "neumann":
        raise GeometryError("solve_limit_neumann needs a Neumann outer condition")
    ext = build_exterior(medium, n)
    f = np.asarray(f, dtype=float)
    total = np.sum(f) * ext.vol
    if abs(total) > 1e-12 * max(1.0, np.max(np.abs(f))):
        raise GeometryError("source must have zero mesh mean under Neumann closure")
    f_ext = f[ext.idx_out]
    lu = spla.splu(ext.K_EE)
    u_t = lu.solve(ext.vol * f_ext)
    domain_vol = ext.grid.ncells * ext.vol
    c0 = -np.sum(u_t) * ext.vol / domain_vol
    u = np.full(ext.grid.ncells, c0)
    u[ext.idx_out] = u_t + c0
    return u, float(c0)


def limit_spectrum_neumann(medium: ContrastMedium, lam_max: float,
                           n: int = None, step: float = None) -> LimitSpectrum:
    """Limit spectrum with the Neumann outer closure; lambda = 0 excluded."""
    if medium.bc.kind != "neumann":
        raise GeometryError("limit_spectrum_neumann needs a Neumann outer condition")
    return limit_spectrum(medium, lam_max, n, step)


def effective_resolvent(medium: ContrastMedium, z: complex, f: np.ndarray,
                        n: int = None, ext: ExteriorSystem = None) -> np.ndarray:
    """Limit resolvent applied to a source: exterior Helmholtz at spectral
    parameter z coupled to unknown inclusion constants through the flux
    conditions  flux_i + z c_i |inclusion_i| = -integral of f over inclusion i.
    """
    ext = ext or build_exterior(medium, n)
    f = np.asarray(f)
    dtype = np.result_type(ext.K_EE.dtype, type(z), f.dtype)
    I_E = sp.identity(ext.K_EE.shape[0], dtype=dtype, format="csc")
    lu = spla.splu((ext.K_EE.astype(dtype) - z * ext.vol * I_E).tocsc())
    W = lu.solve(np.asarray(-(ext.K_EG @ ext.C), dtype=dtype))
    u_f = lu.solve(ext.vol * f[ext.idx_out].astype(dtype))
    Tz = ext.interface_flux(ext.C.astype(dtype), W)
    Tz[np.diag_indices_from(Tz)] += z * ext.measures
    m = ext.n_inclusions
    b = np.zeros(m, dtype=dtype)
    for i in range(m):
        b[i] = -ext.vol * np.sum(f[ext.grid.labels == i + 1])
    b -= ext.interface_flux(np.zeros(ext.C.shape[0]), u_f)
    c = np.linalg.solve(Tz, b)
    u = np.zeros(ext.grid.ncells, dtype=dtype)
    u[ext.idx_out] = u_f + W @ c
    for i in range(m):
        u[ext.grid.labels == i + 1] = c[i]
    return u


def write_limit_csv(path: str, spectrum: LimitSpectrum, m: int) -> None:
    """CSV dump: branch,lambda,c_1..c_m,flux_residual,pde_residual."""
    cols = ",".join(f"c_{i + 1}" for i in range(m))
    with open(path, "w") as fh:
        fh.write(f"branch,lambda,{cols},flux_residual,pde_residual\n")
        for p in spectrum.pairs:
            cvals = ",".join(f"{np.real(ci):.16g}" for ci in p.c)
            fh.write(f"{p.branch},{p.lam:.16g},{cvals},"
                     f"{p.flux_residual:.3e},{p.pde_residual:.3e}\n")
