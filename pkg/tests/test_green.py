from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fgf.dfgf import LatticeDomain, assemble_precision, dfgf_green, discrete_composed_green
from fgf.errors import DomainError, GeometryError, PSDError, SingularityError
from fgf.green import (
    CovMatrix,
    _riesz_integral,
    _riesz_integral_quad,
    ball_covariance_matrix,
    composed_ball_green,
    fractional_ball_green,
    integer_ball_green,
    integer_ball_green_quad,
    integer_green_constant,
)

interior = st.floats(-0.9, 0.9)


# -- integer s --------------------------------------------------------------------


def test_newtonian_values():
    # x = 0: G = (1/|y| - 1) / (4 pi)
    y = np.array([0.5, 0.0, 0.0])
    assert integer_ball_green(1, 3, np.zeros(3), y) == pytest.approx((2 - 1) / (4 * math.pi), rel=1e-13)
    # d = 1: (1 - xy - |x-y|) / 2
    assert integer_ball_green(1, 1, 0.3, -0.2) == pytest.approx((1 + 0.06 - 0.5) / 2, rel=1e-13)


def test_vanishes_at_boundary():
    y = np.array([0.2, 0.1, 0.0])
    for eps in (1e-3, 1e-6):
        x = np.array([1 - eps, 0, 0])
        assert abs(integer_ball_green(1, 3, x, y)) < 10 * eps


@given(st.integers(1, 3), st.integers(1, 3), st.lists(interior, min_size=6, max_size=6))
def test_integer_symmetry_and_quadrature(s, d, coords):
    x = np.array(coords[:d]) * 0.9 / max(1.0, np.linalg.norm(coords[:d]) / 0.9)
    y = np.array(coords[3 : 3 + d]) * 0.9 / max(1.0, np.linalg.norm(coords[3 : 3 + d]) / 0.9)
    if np.linalg.norm(x - y) < 1e-3 or max(np.linalg.norm(x), np.linalg.norm(y)) >= 0.99:
        return
    if d == 1:
        x, y = float(x[0]), float(y[0])
    a = integer_ball_green(s, d, x, y)
    assert a == pytest.approx(integer_ball_green(s, d, y, x), rel=1e-12)
    assert a == pytest.approx(integer_ball_green_quad(s, d, x, y), rel=1e-9, abs=1e-14)


def test_diagonal_rules():
    with pytest.raises(SingularityError):
        integer_ball_green(1, 3, np.zeros(3), np.zeros(3))
    # 2s > d: continuous diagonal
    x = np.array([0.3, 0.1])
    near = integer_ball_green(2, 2, x, x + 1e-7)
    assert integer_ball_green(2, 2, x, x) == pytest.approx(near, rel=1e-5)


def _cube_flux(kernel, y, half=0.125, h=1 / 64):
    """Outward flux of -grad G through a cube around y by midpoint differences."""
    m = int(round(2 * half / h))
    c = -half + (np.arange(m) + 0.5) * h
    A, B = (g.ravel() for g in np.meshgrid(c, c, indexing="ij"))
    total = 0.0
    for ax in range(3):
        other = [i for i in range(3) if i != ax]
        for sign in (1, -1):
            inner, outer = np.zeros((len(A), 3)), np.zeros((len(A), 3))
            for p, off in ((inner, -h / 2), (outer, h / 2)):
                p[:, ax] = sign * (half + off)
                p[:, other[0]], p[:, other[1]] = A, B
                p += y
            total += np.sum(-(kernel(outer) - kernel(inner)) / h) * h * h
    return total


def test_unit_source_strength_s1():
    y = np.array([0.5, 0.0, 0.0])
    flux = {c: _cube_flux(lambda P: integer_ball_green(1, 3, P, np.broadcast_to(y, P.shape), constant=c), y)
            for c in ("corrected", "printed")}
    assert flux["corrected"] == pytest.approx(1.0, rel=0.02)
    assert abs(flux["printed"] - 1.0) > 0.5


def _neg_laplacian(kernel, p, h):
    total = -2 * len(p) * kernel(p[None])[0]
    for ax in range(len(p)):
        for sign in (1, -1):
            q = p.copy()
            q[ax] += sign * h
            total += kernel(q[None])[0]
    return -total / h**2


def test_biharmonic_normalization_selects_constant():
    # for s = 2, d = 3, -Laplacian of G(., y) must behave like 1/(4 pi r) near y
    y = np.array([0.1, 0.2, 0.0])
    p = y + np.array([0.01, 0.0, 0.0])
    ratio = {}
    for c in ("corrected", "printed"):
        k = lambda P, c=c: integer_ball_green(2, 3, P, np.broadcast_to(y, P.shape), constant=c)
        ratio[c] = 4 * math.pi * 0.01 * _neg_laplacian(k, p, 0.01 / 20)
    assert ratio["corrected"] == pytest.approx(1.0, abs=0.03)
    assert ratio["printed"] == pytest.approx(0.25, abs=0.03)


def test_constant_choices_agree_when_s_equals_d():
    assert integer_green_constant(2, 2, "printed") == integer_green_constant(2, 2, "corrected")
    with pytest.raises(ValueError):
        integer_green_constant(1, 2, "other")


@pytest.mark.parametrize("d", [2, 3])
def test_harmonic_away_from_source(d):
    y = np.zeros(d)
    y[0] = 0.2
    p = np.zeros(d)
    p[0], p[1] = -0.3, 0.25
    kern = lambda P: integer_ball_green(1, d, P, np.broadcast_to(y, P.shape))
    r1 = abs(_neg_laplacian(kern, p, 1 / 64))
    r2 = abs(_neg_laplacian(kern, p, 1 / 128))
    scale = kern(p[None])[0] / np.linalg.norm(p - y) ** 2
    assert r1 < 5e-3 * scale
    assert r2 < r1 / 3


# -- fractional s -----------------------------------------------------------------


@pytest.mark.parametrize("s, d", [(0.55, 1), (0.75, 1), (0.95, 1), (0.3, 1), (0.5, 1), (0.4, 2), (0.7, 3)])
def test_riesz_closed_form_vs_quadrature(s, d):
    V = np.array([1e-6, 1e-3, 0.5, 3.0, 100.0, 1e5, 1e9])
    ref = np.array([_riesz_integral_quad(s, d, v) for v in V])
    np.testing.assert_allclose(_riesz_integral(s, d, V), ref, rtol=1e-9)


@given(st.floats(0.05, 0.95), st.integers(1, 3), st.lists(interior, min_size=6, max_size=6))
def test_fractional_symmetric_and_positive(s, d, coords):
    x = np.array(coords[:d]) / max(1.0, np.linalg.norm(coords[:d]) / 0.9)
    y = np.array(coords[3 : 3 + d]) / max(1.0, np.linalg.norm(coords[3 : 3 + d]) / 0.9)
    if np.linalg.norm(x - y) < 1e-3:
        return
    a = fractional_ball_green(s, d, x, y)
    assert a > 0
    assert a == pytest.approx(fractional_ball_green(s, d, y, x), rel=1e-13)


def test_fractional_boundary_decay_is_monotone():
    y = 0.2
    eps = np.array([1e-1, 1e-2, 1e-3, 1e-5])
    vals = fractional_ball_green(0.4, 1, 1 - eps, np.full(4, y))
    assert np.all(np.diff(vals) < 0)
    # G ~ dist(x, boundary)^s near the boundary
    assert vals[-1] / vals[-2] == pytest.approx(1e-2**0.4, rel=0.01)


def test_fractional_diagonal():
    with pytest.raises(SingularityError):
        fractional_ball_green(0.4, 1, 0.1, 0.1)
    x = 0.1
    assert fractional_ball_green(0.75, 1, x, x) == pytest.approx(fractional_ball_green(0.75, 1, x, x + 1e-9), rel=1e-4)


def test_fractional_matches_dfgf():
    dom = LatticeDomain(1, 2 / 64)
    green = dfgf_green(assemble_precision(dom, 0.4)).entries
    disc = green[dom.site_of(0.0), dom.site_of(0.5)]
    assert disc == pytest.approx(fractional_ball_green(0.4, 1, 0.0, 0.5), rel=0.10)


def test_domain_checks():
    with pytest.raises(DomainError):
        fractional_ball_green(1.2, 1, 0.0, 0.5)
    with pytest.raises(GeometryError):
        fractional_ball_green(0.5, 1, 0.0, 1.0)
    with pytest.raises(GeometryError):
        integer_ball_green(1, 2, [0.0, 0.0], [0.0, 0.0, 0.0])


def test_radius_scaling():
    # G_{rB}(rx, ry) = r^(2s-d) G_B(x, y)
    r = 2.5
    for s in (0.3, 0.8):
        assert fractional_ball_green(s, 2, [0.1 * r, 0.0], [0.0, 0.4 * r], radius=r) == pytest.approx(
            r ** (2 * s - 2) * fractional_ball_green(s, 2, [0.1, 0.0], [0.0, 0.4]), rel=1e-12
        )


# -- composed s > 1 -----------------------------------------------------------------


def _composed_1d(x, y, s):
    f = lambda u: integer_ball_green(1, 1, x, u) * fractional_ball_green(s - 1, 1, u, y) if u != y else 0.0
    return integrate.quad(f, -1, 1, points=[x, y], limit=400, epsabs=1e-12)[0]


def test_composed_1d_against_direct_quadrature():
    for x, y in ((0.0, 0.3), (0.3, 0.0), (-0.5, 0.2)):
        assert composed_ball_green(1.5, 1, x, y) == pytest.approx(_composed_1d(x, y, 1.5), rel=1e-5)


def test_composed_order_matters():
    # the integral is evaluated in the written order; the two orders differ at O(1%)
    a = composed_ball_green(1.5, 1, 0.0, 0.3)
    b = composed_ball_green(1.5, 1, 0.3, 0.0)
    assert abs(a - b) > 1e-3 * a
    assert abs(a - b) < 0.05 * a


def test_composed_matches_discrete_limit():
    dom = LatticeDomain(1, 2 / 128)
    disc = discrete_composed_green(dom, 1.5)
    val = disc[dom.site_of(0.0), dom.site_of(0.25)]
    assert val == pytest.approx(composed_ball_green(1.5, 1, 0.0, 0.25), rel=0.10)


def test_composed_continuous_in_s():
    vals = [composed_ball_green(s, 1, -0.2, 0.35) for s in (1.49, 1.5, 1.51)]
    step1, step2 = vals[1] - vals[0], vals[2] - vals[1]
    assert abs(step1) < 0.02 * vals[1]
    assert step2 == pytest.approx(step1, rel=0.2)


def test_composed_interpolates_integer_orders():
    pts = np.array([[-0.4], [-0.1], [0.3], [0.55]])
    g1 = ball_covariance_matrix(1, 1, pts).entries
    g2 = ball_covariance_matrix(2, 1, pts).entries
    g15 = ball_covariance_matrix(1.5, 1, pts).entries
    n1, n15, n2 = (np.linalg.norm(g, 2) for g in (g1, g15, g2))
    assert min(n1, n2) < n15 < max(n1, n2)


def test_composed_gram_positive_definite_3d():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-0.4, 0.4, (5, 3))
    cov = ball_covariance_matrix(2.5, 3, pts)
    assert cov.min_eigenvalue() > 0


def test_composed_requires_noninteger():
    with pytest.raises(DomainError):
        composed_ball_green(2, 1, 0.0, 0.3)


# -- covariance matrices ------------------------------------------------------------


def test_reflection_invariance():
    pts = np.array([-0.6, -0.2, 0.2, 0.6])
    cov = ball_covariance_matrix(1, 1, pts).entries
    perm = np.arange(4)[::-1]
    np.testing.assert_allclose(cov[np.ix_(perm, perm)], cov, rtol=1e-13)


def test_newtonian_gram_positive_definite():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.5, 0.5, (10, 3))
    pts = pts[np.linalg.norm(pts, axis=1) < 0.95]
    # G(x, x) is infinite in d = 3, so use s = 2 where the diagonal is finite
    cov = ball_covariance_matrix(2, 3, pts)
    assert cov.min_eigenvalue() > 0
    low = cov.factorize().factor
    np.testing.assert_allclose(low @ low.T, cov.entries, rtol=1e-10, atol=1e-14)


def test_cell_average_matrix_matches_dfgf():
    s, h = 0.4, 0.25
    centers = -1 + h * (np.arange(8) + 0.5)
    cov = ball_covariance_matrix(s, 1, centers, cell=h).entries
    dom = LatticeDomain(1, 1 / 32, offset=0.5)
    green = dfgf_green(assemble_precision(dom, s)).entries
    label = np.floor((dom.interior[:, 0] + 1) / h).astype(int)
    blocks = np.array([[green[np.ix_(label == i, label == j)].mean() for j in range(8)] for i in range(8)])
    np.testing.assert_array_less(np.abs(blocks / cov - 1), 0.10)


def test_psd_check_rejects_indefinite():
    bad = CovMatrix(np.zeros((2, 1)), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(PSDError):
        bad.check()


def test_matrix_rejects_bad_points():
    with pytest.raises(GeometryError):
        ball_covariance_matrix(1, 1, [0.1, 0.1])
    with pytest.raises(GeometryError):
        ball_covariance_matrix(1, 1, [0.1, 1.2])
