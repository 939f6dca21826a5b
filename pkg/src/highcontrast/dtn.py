"""Discrete Dirichlet-to-Neumann reduction onto the interface.

The cell system is augmented with one dof per interface face (the trace
value at the face center).  Half-cell conductances tie each face dof to
its two neighboring cells; eliminating the face dofs reproduces the
harmonic-mean matrix of :mod:`highcontrast.fdm` exactly, so the reduction
is an algebraic identity with the direct solve, while the interior and
exterior Schur complements give the interface flux operators with the
contrast factored out: the interface equation reads

    (Nm - eps * Np) phi = eps * (Mp f_plus - Mm f_minus),

with Nm the (eps-independent) interior flux map, Np the exterior one, and
Mp/Mm the source-to-flux maps.  Traces split into per-inclusion constants
plus zero-mean remainders; the block elimination in that splitting is
what evaluates the inverse at eps = 0 and exposes the flux constant that
determines the inclusion value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fdm import DiscreteOperator, Grid, build_grid
from .geometry import ContrastMedium, GeometryError

__all__ = [
    "TraceFunction",
    "DtNSystem",
    "build_dtn",
    "solve_block_system",
    "apply_Bhat",
    "analyticity_probe",
    "trace_on_interface",
]


@dataclass(frozen=True)
class TraceFunction:
    """Interface trace split into per-inclusion constants and zero-mean parts."""

    values: np.ndarray            # one value per interface face
    constants: np.ndarray         # m per-inclusion means
    perp: np.ndarray              # zero-mean remainder, same length as values


@dataclass(frozen=True)
class DtNSystem:
    """Interface flux operators and their constants/zero-mean block split.

    Dense matrices act on the vector of interface-face values.  ``C`` maps
    per-inclusion constants into traces; ``Z`` is an orthonormal basis of
    the per-inclusion zero-mean subspace.  ``Np11`` is the m x m constants
    block of the exterior flux map (strictly negative definite); the
    interior map ``Nm`` annihilates constants per inclusion.
    """

    medium: ContrastMedium
    grid: Grid
    gamma_faces: tuple            # Face records in dof order
    inclusion_of_face: np.ndarray
    Nm: np.ndarray = field(repr=False)
    Np: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)
    # cell-system blocks for reconstruction (splu factorizations + couplings)
    _in_solve: object = field(repr=False, default=None)
    _out_solve: object = field(repr=False, default=None)
    _K_IG: sp.csr_matrix = field(repr=False, default=None)
    _K_EG: sp.csr_matrix = field(repr=False, default=None)
    _K_GG_in: np.ndarray = field(repr=False, default=None)
    _K_GG_out: np.ndarray = field(repr=False, default=None)
    _idx_in: np.ndarray = field(repr=False, default=None)
    _idx_out: np.ndarray = field(repr=False, default=None)

    @property
    def n_inclusions(self) -> int:
        return self.C.shape[1]

    @property
    def n_faces(self) -> int:
        return self.C.shape[0]

    # descriptive aliases for the interface operators
    @property
    def N_minus(self) -> np.ndarray:
        return self.Nm

    @property
    def N_plus(self) -> np.ndarray:
        return self.Np

    def M_minus(self, f_minus: np.ndarray) -> np.ndarray:
        return self.Mm(f_minus)

    def M_plus(self, f_plus: np.ndarray) -> np.ndarray:
        return self.Mp(f_plus)

    @property
    def a_constants(self) -> np.ndarray:
        """Diagonal of the constants block of the exterior flux map (all < 0)."""
        return np.real(np.diag(self.Np11))

    @property
    def Np11(self) -> np.ndarray:
        return self.C.T @ self.Np @ self.C

    @property
    def Np12(self) -> np.ndarray:
        return self.C.T @ self.Np @ self.Z

    @property
    def Np21(self) -> np.ndarray:
        return self.Z.conj().T @ self.Np @ self.C

    @property
    def Np22(self) -> np.ndarray:
        return self.Z.conj().T @ self.Np @ self.Z

    @property
    def Nm22(self) -> np.ndarray:
        return self.Z.conj().T @ self.Nm @ self.Z

    def decompose(self, phi: np.ndarray) -> TraceFunction:
        """Split a trace into per-inclusion constants and zero-mean parts."""
        counts = self.C.sum(axis=0)
        consts = (self.C.T @ phi) / counts
        perp = phi - self.C @ consts
        return TraceFunction(np.asarray(phi), consts, perp)

    def Mm(self, f_minus: np.ndarray) -> np.ndarray:
        """Source-to-flux map of the interior problem (zero trace)."""
        vol = self.grid.cell_volume
        return self._K_IG.T.conj() @ self._in_solve(vol * np.asarray(f_minus))

    def Mp(self, f_plus: np.ndarray) -> np.ndarray:
        """Source-to-flux map of the exterior problem (zero trace, outer bc)."""
        vol = self.grid.cell_volume
        return -(self._K_EG.T.conj() @ self._out_solve(vol * np.asarray(f_plus)))

    def epsilon_max(self, seed: int = 0) -> float:
        """Computable surrogate for the admissible contrast range:
        0.5 / ||inv(Nm22) Np22|| with the norm from power iteration."""
        A = np.linalg.solve(self.Nm22, self.Np22)
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(A.shape[0])
        if np.iscomplexobj(A):
            x = x + 1j * rng.standard_normal(A.shape[0])
        nrm = 1.0
        for _ in range(200):
            x = A.conj().T @ (A @ x)
            nrm = np.linalg.norm(x) ** 0.5
            x = x / np.linalg.norm(x)
        return 0.5 / max(nrm, 1e-300)


def split_cells(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(inclusion cell indices, exterior cell indices) of a grid."""
    labels = grid.labels
    return np.nonzero(labels > 0)[0], np.nonzero(labels == 0)[0]


def interface_dofs(grid: Grid):
    """Interface faces in dof order (grouped by inclusion) and their labels."""
    faces = [f for f in grid.faces if f.inclusion > 0]
    faces.sort(key=lambda f: f.inclusion)
    incl = np.array([f.inclusion for f in faces])
    return tuple(faces), incl


def _unit_stiffness_blocks(medium: ContrastMedium, grid: Grid):
    """Contrast-free stiffness blocks of the augmented (cells + face dofs) system.

    Interior and exterior parts are assembled with coefficient 1; the
    contrast enters only as the 1/eps factor multiplying the interior
    part, which is what makes the interface equation affine in eps.
    """
    h, dim = grid.h, grid.dim
    area = h**(dim - 1)
    gamma, incl_of = interface_dofs(grid)
    gindex = {(f.cin, f.cout): g for g, f in enumerate(gamma)}

    idx_in, idx_out = split_cells(grid)
    loc_in = {c: i for i, c in enumerate(idx_in)}
    loc_out = {c: i for i, c in enumerate(idx_out)}
    nG = len(gamma)
    use_complex = medium.bc.kind == "bloch"
    dtype = complex if use_complex else float

    def blocks(n):
        return (sp.lil_matrix((n, n), dtype=dtype), sp.lil_matrix((n, nG), dtype=dtype),
                np.zeros(nG))

    K_II, K_IG, K_GG_in = blocks(len(idx_in))
    K_EE, K_EG, K_GG_out = blocks(len(idx_out))
    g_half = 2.0 / h * area  # half-cell conductance at unit coefficient

    for f in grid.faces:
        if f.inclusion > 0:
            g = gindex[(f.cin, f.cout)]
            i = loc_in[f.cin]
            K_II[i, i] += g_half
            K_IG[i, g] -= g_half
            K_GG_in[g] += g_half
            e = loc_out[f.cout]
            K_EE[e, e] += g_half
            K_EG[e, g] -= g_half
            K_GG_out[g] += g_half
        elif f.cout == -1:
            e = loc_out[f.cin]
            K_EE[e, e] += g_half  # Dirichlet half-cell closure, sigma = 1
        else:
            inside = grid.labels[f.cin] > 0
            g = 1.0 / h * area
            if inside:
                a, b = loc_in[f.cin], loc_in[f.cout]
                K_II[a, a] += g; K_II[b, b] += g
                K_II[a, b] -= g * np.conj(f.phase); K_II[b, a] -= g * f.phase
            else:
                a, b = loc_out[f.cin], loc_out[f.cout]
                K_EE[a, a] += g; K_EE[b, b] += g
                K_EE[a, b] -= g * np.conj(f.phase); K_EE[b, a] -= g * f.phase
    return (gamma, incl_of, idx_in, idx_out,
            K_II.tocsc(), K_IG.tocsr(), K_GG_in,
            K_EE.tocsc(), K_EG.tocsr(), K_GG_out)


def build_dtn(medium: ContrastMedium, n: int = None) -> DtNSystem:
    """Interface flux operators of the medium's grid; the contrast is ignored.

    The exterior closure follows the medium's outer condition (Dirichlet
    or Bloch at a non-integer wave vector); the Neumann pathway skips the
    constants block and lives in :mod:`highcontrast.limitspec`.
    """
    if medium.bc.kind == "neumann":
        raise GeometryError("Neumann outer conditions use the limit-source pathway "
                            "(limitspec.solve_limit_neumann)")
    probe = medium if medium.epsilon > 0 else medium.with_epsilon(1.0)
    grid = build_grid(probe, n)
    (gamma, incl_of, idx_in, idx_out,
     K_II, K_IG, K_GG_in, K_EE, K_EG, K_GG_out) = _unit_stiffness_blocks(probe, grid)

    try:
        in_lu = spla.splu(K_II)
        out_lu = spla.splu(K_EE)
    except RuntimeError as exc:
        raise GeometryError(f"singular interior/exterior block: {exc}") from exc

    nG = len(gamma)
    Nm = np.diag(K_GG_in).astype(K_IG.dtype) - K_IG.T.conj() @ in_lu.solve(K_IG.toarray())
    Sout = np.diag(K_GG_out).astype(K_EG.dtype) - K_EG.T.conj() @ out_lu.solve(K_EG.toarray())
    Np = -Sout

    m = int(incl_of.max())
    C = np.zeros((nG, m))
    for i in range(1, m + 1):
        C[incl_of == i, i - 1] = 1.0
    # orthonormal basis of the per-inclusion zero-mean subspace
    zs = []
    for i in range(1, m + 1):
        sel = np.nonzero(incl_of == i)[0]
        ni = sel.size
        if ni < 2:
            continue
        block = np.eye(ni) - np.full((ni, ni), 1.0 / ni)
        q, _ = np.linalg.qr(block)
        q = q[:, :ni - 1]
        Zi = np.zeros((nG, ni - 1))
        Zi[sel, :] = q
        zs.append(Zi)
    Z = np.hstack(zs) if zs else np.zeros((nG, 0))
    if np.iscomplexobj(Nm):
        Z = Z.astype(complex)
        C_use = C.astype(complex)
    else:
        C_use = C

    return DtNSystem(medium, grid, gamma, incl_of, Nm, Np, C_use, Z,
                     _in_solve=in_lu.solve, _out_solve=out_lu.solve,
                     _K_IG=K_IG, _K_EG=K_EG,
                     _K_GG_in=K_GG_in, _K_GG_out=K_GG_out,
                     _idx_in=idx_in, _idx_out=idx_out)


def _split_source(sys: DtNSystem, f: np.ndarray):
    f = np.asarray(f)
    return f[sys._idx_in], f[sys._idx_out]


def solve_block_system(sys: DtNSystem, eps: float, f: np.ndarray) -> TraceFunction:
    """Trace of the solution at contrast eps >= 0 by the two-step elimination.

    The zero-mean part is eliminated against the (invertible) interior
    block first; the remaining m x m system on the inclusion constants is
    solved last, and at eps = 0 reduces to the flux equation for the
    constant inclusion values.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    f_in, f_out = _split_source(sys, f)
    g = sys.Mp(f_out) - sys.Mm(f_in)
    gc = sys.C.T.conj() @ g
    gp = sys.Z.conj().T @ g
    m = sys.n_inclusions
    if eps == 0.0:
        A = sys.Np11
        c = np.linalg.solve(A, -gc)
        beta = np.zeros(sys.Z.shape[1], dtype=sys.Nm.dtype)
    else:
        B = sys.Nm22 - eps * sys.Np22
        try:
            X = np.linalg.solve(B, np.column_stack([sys.Np21, gp]))
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"zero-mean block singular at eps={eps}: {exc}") from exc
        Xc, xg = X[:, :m], X[:, m]
        A = sys.Np11 + eps * (sys.Np12 @ Xc)
        rhs = -gc - eps * (sys.Np12 @ xg)
        c = np.linalg.solve(A, rhs)
        beta = eps * (Xc @ c + xg)
    det = np.linalg.det(A)
    if abs(det) < 1e-14 * max(1.0, np.linalg.norm(A)) ** m:
        raise RuntimeError(f"reduced constants system singular (det={det:.3e})")
    phi = sys.C @ c + sys.Z @ beta
    return TraceFunction(phi, c, sys.Z @ beta)


def apply_Bhat(sys: DtNSystem, eps: float, f: np.ndarray):
    """Full-field inverse at contrast eps >= 0 via the interface reduction.

    Returns ``(u, trace)`` with ``u`` on the cell grid.  For eps > 0 this
    equals the direct solve of the assembled matrix (same grid) up to
    roundoff; at eps = 0 the inclusion values are exactly the solved
    constants.
    """
    tr = solve_block_system(sys, eps, f)
    f_in, f_out = _split_source(sys, f)
    vol = sys.grid.cell_volume
    u = np.zeros(sys.grid.ncells, dtype=sys.Nm.dtype)
    u[sys._idx_in] = sys._in_solve(eps * vol * f_in - sys._K_IG @ tr.values)
    u[sys._idx_out] = sys._out_solve(vol * f_out - sys._K_EG @ tr.values)
    return u, tr


def analyticity_probe(sys: DtNSystem, f: np.ndarray, eps_list, degree: int) -> dict:
    """Polynomial fit of the trace as a function of eps (diagnostic).

    Reports the maximum least-squares residual at the requested degree and
    the decay ratio against degree - 1, evidence of a convergent power
    series in the contrast.
    """
    eps_list = np.asarray(sorted(eps_list))
    if eps_list.size < degree + 2:
        raise ValueError("need at least degree + 2 contrast samples")
    traces = np.array([solve_block_system(sys, e, f).values for e in eps_list])

    def max_resid(d):
        worst = 0.0
        for j in range(traces.shape[1]):
            coef = np.polyfit(eps_list, traces[:, j].real, d)
            r = np.max(np.abs(np.polyval(coef, eps_list) - traces[:, j].real))
            worst = max(worst, r)
        return worst

    r_d = max_resid(degree)
    r_prev = max_resid(degree - 1) if degree >= 1 else np.inf
    return {"degree": degree, "max_residual": r_d,
            "residual_ratio": r_d / r_prev if r_prev > 0 else 0.0,
            "eps_list": eps_list.tolist()}


def export_blocks(sys: DtNSystem, directory: str) -> None:
    """Debug dump of the dense interface operators as CSV matrices."""
    import os
    for name, mat in (("N_minus", sys.Nm), ("N_plus", sys.Np),
                      ("Np11", sys.Np11), ("Nm22", sys.Nm22)):
        mat = np.atleast_2d(mat)
        if np.iscomplexobj(mat):
            np.savetxt(os.path.join(directory, f"{name}_re.csv"), mat.real, delimiter=",")
            np.savetxt(os.path.join(directory, f"{name}_im.csv"), mat.imag, delimiter=",")
        else:
            np.savetxt(os.path.join(directory, f"{name}.csv"), mat, delimiter=",")


def trace_on_interface(sys: DtNSystem, opr: DiscreteOperator, u: np.ndarray) -> np.ndarray:
    """Interface trace implied by a cell solution of the assembled operator.

    The face value follows from discrete flux continuity between the two
    adjacent cells: phi = (s_in u_in + s_out u_out) / (s_in + s_out).
    """
    phi = np.zeros(sys.n_faces, dtype=u.dtype)
    for g, fc in enumerate(sys.gamma_faces):
        phi[g] = (fc.sig_in * u[fc.cin] + fc.sig_out * u[fc.cout]) / (fc.sig_in + fc.sig_out)
    return phi
