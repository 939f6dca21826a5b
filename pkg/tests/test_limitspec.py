"""Limit spectrum on grids: determinant branch, zero-flux branch, sources."""

import numpy as np
import pytest

from highcontrast import exact1d, fdm, limitspec
from highcontrast.geometry import (BoundaryKind, ContrastMedium, Geometry1D,
                                   GeometryError)

SYM = Geometry1D(-1.0, 1.0, ((-0.5, 0.5),))
TWO = Geometry1D(-1.0, 1.0, ((-0.6, -0.2), (0.2, 0.6)))


def med(bc, geom=SYM):
    return ContrastMedium(geom, 0.0, bc)


@pytest.fixture(scope="module")
def ext_sym():
    return limitspec.build_exterior(med(BoundaryKind.dirichlet()), 1000)


def test_characteristic_matrix_limits(ext_sym):
    cd = limitspec.CharacteristicDeterminant(ext_sym, 45.0)
    # lambda -> 0: harmonic ramps, total flux -(1/(1+a) + 1/(1-b)) = -4
    assert cd.matrix(1e-10)[0, 0] == pytest.approx(-4.0, abs=1e-6)
    # symmetric for real lambda off poles
    T = cd.matrix(7.3)
    assert np.max(np.abs(T - T.T)) < 1e-10


def test_det_scan_matches_exact_oracle(ext_sym):
    spec = limitspec.det_scan(med(BoundaryKind.dirichlet()), 45.0, ext=ext_sym)
    exact = exact1d.limit_spectrum_1d(SYM, BoundaryKind.dirichlet(), 45.0)
    got = spec.eigenvalues
    ref = [l for l, _ in exact.S2]
    assert len(got) == len(ref)
    assert np.allclose(got, ref, rtol=1e-5)
    p = spec.pairs[0]
    assert p.branch == "constant_trace"
    assert p.c[0] == pytest.approx(1.0)
    assert p.flux_residual < 1e-8
    assert p.pde_residual < 1e-8


def test_zero_flux_branch_and_exclusions(ext_sym):
    spec = limitspec.zero_flux_branch(med(BoundaryKind.dirichlet()), 45.0,
                                      ext=ext_sym)
    assert len(spec.pairs) == 1
    p = spec.pairs[0]
    assert p.lam == pytest.approx(4 * np.pi ** 2, rel=1e-4)
    assert p.branch == "zero_flux"
    assert np.all(p.c == 0)
    assert p.flux_residual < 1e-10
    # inclusion dofs vanish identically
    assert np.max(np.abs(p.u_plus[ext_sym.grid.labels > 0])) == 0
    # the flux-carrying partner at the same eigenvalue is excluded
    assert len(spec.excluded) == 1
    lam_ex, flux_ex = spec.excluded[0]
    assert lam_ex == pytest.approx(p.lam, rel=1e-10)
    assert flux_ex > 0.1


def test_exterior_helmholtz_closed_form():
    # c = 1, lambda = 1: u = sin(x+1)/sin(0.5) on (-1,-0.5)
    u = limitspec.exterior_helmholtz_solve(med(BoundaryKind.dirichlet()),
                                           1.0, [1.0], 2000)
    x = np.linspace(-1 + 1 / 2000, 1 - 1 / 2000, 2000)
    left = x < -0.5
    expect = np.sin(x[left] + 1.0) / np.sin(0.5)
    assert np.max(np.abs(u[left] - expect)) < 1e-5
    # inside the inclusion the field is the constant c
    assert np.all(u[np.abs(x) < 0.5] == 1.0)


def test_resonance_is_refused(ext_sym):
    pole = ext_sym.exterior_eigs(45.0)[0][0]
    with pytest.raises(limitspec.ResonanceError):
        limitspec.exterior_helmholtz_solve(med(BoundaryKind.dirichlet()),
                                           float(pole), [1.0], ext=ext_sym)


def test_flux_functional_gauge_independence(ext_sym):
    """Adding a zero-flux exterior eigenvector leaves the fluxes unchanged."""
    zf = limitspec.zero_flux_branch(med(BoundaryKind.dirichlet()), 45.0,
                                    ext=ext_sym).pairs[0]
    v = zf.u_plus[ext_sym.idx_out]
    u = np.random.default_rng(7).standard_normal(v.size)
    phi = np.zeros(ext_sym.C.shape[0])
    base = ext_sym.interface_flux(phi, u)
    shifted = ext_sym.interface_flux(phi, u + 10.0 * v)
    assert np.allclose(base, shifted, atol=1e-9)


def test_neumann_limit_spectrum():
    spec = limitspec.limit_spectrum_neumann(med(BoundaryKind.neumann()), 45.0, 1000)
    branches = {p.branch: p.lam for p in spec.pairs}
    assert branches["zero_flux"] == pytest.approx(np.pi ** 2, rel=1e-4)
    assert branches["constant_trace"] == pytest.approx(16.463433462778102, rel=1e-4)
    assert np.all(spec.eigenvalues > 0)


def test_neumann_source_problem():
    m = med(BoundaryKind.neumann())
    ext = limitspec.build_exterior(m, 2000)
    f = np.where(ext.grid.labels > 0, 1.0, -1.0)
    u, c0 = limitspec.solve_limit_neumann(m, f, 2000)
    # hand computation: u'' = 1 outside with u(+-0.5) = 0, u'(+-1) = 0
    assert c0 == pytest.approx(1.0 / 24.0, abs=1e-6)
    assert abs(np.mean(u)) < 1e-12
    # flux emerges from the divergence theorem: -integral of f inside
    phi = np.full(ext.C.shape[0], c0)
    assert ext.interface_flux(phi, u[ext.idx_out])[0] == pytest.approx(-1.0, abs=1e-10)


def test_neumann_source_needs_zero_mean():
    m = med(BoundaryKind.neumann())
    ext = limitspec.build_exterior(m, 500)
    with pytest.raises(GeometryError):
        limitspec.solve_limit_neumann(m, np.ones(ext.grid.ncells), 500)


def test_two_inclusion_symmetry_split():
    spec = limitspec.det_scan(med(BoundaryKind.dirichlet(), TWO), 60.0, 2000)
    assert len(spec.pairs) >= 2
    c0, c1 = spec.pairs[0].c, spec.pairs[1].c
    assert np.allclose(c0, [1, 1] / np.sqrt(2), atol=1e-6)       # symmetric
    assert np.allclose(c1, [1, -1] / np.sqrt(2), atol=1e-6)      # antisymmetric
    T = limitspec.CharacteristicDeterminant(
        limitspec.build_exterior(med(BoundaryKind.dirichlet(), TWO), 2000), 60.0)
    M = T.matrix(5.0)
    assert M.shape == (2, 2)
    assert abs(M[0, 1] - M[1, 0]) < 1e-10


def test_effective_resolvent_against_contrast_solves():
    m = med(BoundaryKind.dirichlet())
    n = 1000
    ext = limitspec.build_exterior(m, n)
    f = np.where(ext.grid.labels > 0, 1.0, 0.0)
    u0 = limitspec.effective_resolvent(m, -1.0, f, ext=ext)
    errs = []
    for eps in (0.02, 0.01, 0.005):
        opr = fdm.assemble(m.with_epsilon(eps), n)
        import scipy.sparse.linalg as spla
        import scipy.sparse as sp
        A = (opr.K + 1.0 * opr.grid.cell_volume *
             sp.identity(n)).tocsc()           # (A_eps - z) with z = -1
        ue = spla.splu(A).solve(opr.grid.cell_volume * f)
        errs.append(np.linalg.norm(ue - u0) * np.sqrt(opr.grid.cell_volume))
    # linear decay in eps
    assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.15)
    assert errs[2] / errs[1] == pytest.approx(0.5, abs=0.15)


def test_limit_csv_format(tmp_path, ext_sym):
    spec = limitspec.limit_spectrum(med(BoundaryKind.dirichlet()), 45.0, 1000)
    path = tmp_path / "limit.csv"
    limitspec.write_limit_csv(str(path), spec, 1)
    lines = path.read_text().splitlines()
    assert lines[0] == "branch,lambda,c_1,flux_residual,pde_residual"
    assert len(lines) == len(spec.pairs) + 1
