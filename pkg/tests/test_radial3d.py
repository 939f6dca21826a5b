"""Radially symmetric 3D sector: closed forms vs the weighted grid."""

import numpy as np
import pytest

from highcontrast import radial3d
from highcontrast.geometry import GeometryError

A = 0.5
# first root of a s cot(s(1-a)) = lam a^2/3 - 1 at a = 0.5
FIRST_SPHERE = 10.710706579361926


def test_char_function_small_lambda_limit():
    # lam -> 0: a/(1-a) + 1 = 2 at a = 0.5
    assert radial3d.sphere_char(A, 1e-12) == pytest.approx(2.0, abs=1e-5)


def test_first_limit_eigenvalue():
    pairs, s1 = radial3d.sphere_limit_spectrum(A, 45.0)
    assert s1 == ()
    lams = [l for l, _ in pairs]
    assert lams[0] == pytest.approx(FIRST_SPHERE, abs=1e-10)
    # bracket sanity: between the uniform-ball and exterior-shell scales
    assert 3.2 ** 2 < lams[0] < 3.5 ** 2
    assert all(np.isfinite(radial3d.sphere_char(A, l + 1e-6)) for l in lams)


def test_limit_eigenfunction_shape():
    (lam, u), *_ = radial3d.sphere_limit_spectrum(A, 20.0)[0]
    assert u(0.0) == pytest.approx(1.0)
    assert u(0.3) == pytest.approx(1.0)      # constant inside the ball
    assert u(A) == pytest.approx(1.0, abs=1e-6)
    assert abs(u(1.0)) < 1e-12               # Dirichlet shell boundary
    # continuous and decaying outside
    assert 0 < u(0.75) < 1.0


def test_invalid_radius():
    with pytest.raises(GeometryError):
        radial3d.sphere_limit_spectrum(1.5, 10.0)


def test_uniform_ball_spectrum():
    # eps = 1: radial Laplacian eigenvalues on the ball are (pi n)^2
    opr = radial3d.radial_operator(A, 1.0, 2000)
    w, v, res = radial3d.radial_eigenpairs(opr, 3)
    assert np.allclose(w, (np.pi * np.arange(1, 4)) ** 2, rtol=1e-4)
    assert res.max() < 1e-8


def test_high_contrast_approaches_limit():
    errs = []
    for eps in (1e-2, 1e-3):
        opr = radial3d.radial_operator(A, eps, 1000)
        w, _, _ = radial3d.radial_eigenpairs(opr, 1)
        errs.append(abs(w[0] - FIRST_SPHERE))
    assert errs[1] < errs[0] / 5
    assert errs[1] / FIRST_SPHERE < 1e-3


def test_interface_alignment_required():
    with pytest.raises(GeometryError):
        radial3d.radial_operator(A, 1e-2, 333)   # h = 1/333 misses r = 0.5


def test_neumann_variant_drops_constant():
    opr = radial3d.radial_operator(A, 1e-2, 500, bc="neumann")
    w, v, _ = radial3d.radial_eigenpairs(opr, 2)
    assert w[0] > 0.5
    # eigenvectors are mass-orthogonal to the constant
    assert abs(np.sum(opr.M * v[:, 0])) < 1e-8


def test_flux_at_interface_of_limit_mode():
    # sampled closed-form mode: flux ~ -lam * |ball| by the eigenvalue relation
    pairs, _ = radial3d.sphere_limit_spectrum(A, 20.0)
    lam, u = pairs[0]
    opr = radial3d.radial_operator(A, 1e-3, 4000)
    flux = radial3d.flux_at_interface(opr, u(opr.centers))
    ball = 4.0 / 3.0 * np.pi * A ** 3
    assert flux == pytest.approx(-lam * ball, rel=2e-3)


def test_det_scan_matches_closed_form():
    got = radial3d.sphere_det_scan(A, 45.0, 2000)
    ref = [l for l, _ in radial3d.sphere_limit_spectrum(A, 45.0)[0]]
    assert len(got) == len(ref)
    assert np.allclose(got, ref, rtol=1e-5)
