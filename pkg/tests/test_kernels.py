from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fgf.errors import DomainError, MomentError, NoPointwiseKernel, PoleError
from fgf.kernels import (
    TestFunctionGrid,
    covariance_bilinear,
    fbm_covariance,
    fbm_gram,
    gaussian_derivative,
    grid_for,
    log_residue,
    normalization_constant,
    whole_space_kernel,
)
from fgf.params import FieldSpec, Regime, classify


# -- FieldSpec ----------------------------------------------------------------


@pytest.mark.parametrize(
    "s, d, regime",
    [
        (1, 3, Regime.POS_NONINTEGER_H),
        (1, 2, Regime.NONNEG_INTEGER_H),
        ("3/2", 1, Regime.NONNEG_INTEGER_H),
        (0, 2, Regime.NONPOS_INTEGER_S),
        (-2, 1, Regime.NONPOS_INTEGER_S),
        (-0.5, 1, Regime.NEG_NONINTEGER_S),
        (0.25, 1, Regime.POS_NONINTEGER_H),
    ],
)
def test_regime_table(s, d, regime):
    assert FieldSpec(d, s).regime is regime


def test_float_near_boundary_snaps():
    assert FieldSpec(2, 1 + 1e-14).regime is Regime.NONNEG_INTEGER_H
    assert FieldSpec(2, 1 + 1e-6).regime is Regime.POS_NONINTEGER_H


@given(st.integers(1, 6), st.fractions(min_value=-4, max_value=6, max_denominator=8))
def test_hurst_relation_and_unique_regime(d, s):
    spec = FieldSpec(d, s)
    assert spec.H_exact == Fraction(s) - Fraction(d, 2)
    h = Fraction(s) - Fraction(d, 2)
    expected = (
        Regime.NONNEG_INTEGER_H if h.denominator == 1 and h >= 0
        else Regime.POS_NONINTEGER_H if s > 0
        else Regime.NONPOS_INTEGER_S if Fraction(s).denominator == 1
        else Regime.NEG_NONINTEGER_S
    )
    assert classify(s, d) is expected


# -- constants and pointwise kernels --------------------------------------------


def test_normalization_constant_examples():
    assert normalization_constant(1, 3) == pytest.approx(1 / (4 * math.pi), rel=1e-14)
    assert normalization_constant(1, 1) == pytest.approx(-0.5, rel=1e-14)
    with pytest.raises(PoleError):
        normalization_constant(1, 2)
    with pytest.raises(PoleError):
        normalization_constant(1.5, 3)
    with pytest.raises(DomainError):
        normalization_constant(0, 1)


@given(st.floats(0.05, 6.0), st.integers(1, 5))
def test_normalization_constant_matches_gamma(s, d):
    if abs(d / 2 - s - round(d / 2 - s)) < 1e-6 and d / 2 - s <= 0.5:
        return
    expected = 2 ** (-2 * s) * math.pi ** (-d / 2) * math.gamma(d / 2 - s) / math.gamma(s)
    assert normalization_constant(s, d) == pytest.approx(expected, rel=1e-12)


def test_log_residue_examples():
    assert log_residue(0, 2) == pytest.approx(-1 / (4 * math.pi), rel=1e-14)
    assert log_residue(0, 4) == pytest.approx(-1 / (16 * math.pi**2), rel=1e-14)
    assert log_residue(1, 2) == pytest.approx(1 / (16 * math.pi), rel=1e-14)


@pytest.mark.parametrize("k, d", [(0, 2), (1, 2), (0, 3), (2, 1)])
def test_log_residue_is_the_residue(k, d):
    # (s - s0) C(s, d) -> residue as s -> s0 = d/2 + k
    s0 = d / 2 + k
    eps = 1e-7
    approx = 0.5 * (eps * normalization_constant(s0 + eps, d) - eps * normalization_constant(s0 - eps, d))
    assert approx == pytest.approx(log_residue(k, d), rel=1e-6)


def test_whole_space_kernel_examples():
    assert whole_space_kernel(FieldSpec(3, 1), 2.0) == pytest.approx(1 / (8 * math.pi), rel=1e-14)
    assert whole_space_kernel(FieldSpec(2, 1), 1.0) == 0.0
    assert whole_space_kernel(FieldSpec(2, 1), math.e) == pytest.approx(-1 / (2 * math.pi), rel=1e-14)
    for s in (0, -1, -0.5):
        with pytest.raises(NoPointwiseKernel):
            whole_space_kernel(FieldSpec(1, s), 1.0)
    with pytest.raises(DomainError):
        whole_space_kernel(FieldSpec(3, 1), 0.0)


def test_kernel_vectorized():
    r = np.array([0.1, 1.0, 10.0])
    np.testing.assert_allclose(whole_space_kernel(FieldSpec(3, 1), r), 1 / (4 * math.pi * r), rtol=1e-13)


# -- fBm covariance ---------------------------------------------------------------


def test_fbm_examples():
    bm = FieldSpec(1, 1)
    assert fbm_covariance(bm, 0.3, 0.7) == pytest.approx(0.3, rel=1e-14)
    assert fbm_covariance(bm, 0.0, 0.9) == 0.0
    spec = FieldSpec(2, 1.5)
    x = np.array([0.3, -0.4])
    expected = 2 * abs(normalization_constant(1.5, 2)) * 0.5
    assert fbm_covariance(spec, x, x) == pytest.approx(expected, rel=1e-13)
    with pytest.raises(DomainError):
        fbm_covariance(FieldSpec(1, 2), 0.1, 0.2)


@given(
    st.integers(1, 3),
    st.floats(0.05, 0.95),
    st.lists(st.floats(-3, 3), min_size=3, max_size=24),
)
def test_fbm_gram_is_psd(d, H, coords):
    pts = np.array(coords[: (len(coords) // d) * d]).reshape(-1, d)
    gram = fbm_gram(FieldSpec(d, H + d / 2), pts)
    lam = np.linalg.eigvalsh(gram)
    assert lam[0] >= -1e-10 * max(np.trace(gram), 1e-300)


# -- bilinear oracle --------------------------------------------------------------


@pytest.fixture(scope="module")
def gauss1():
    return grid_for(gaussian_derivative(1, 0, 1.0), 1)


@pytest.fixture(scope="module")
def dgauss1():
    return grid_for(gaussian_derivative(1, 1, 1.0), 1)


def test_moment_order_is_computed(gauss1, dgauss1):
    assert gauss1.moment_order == -1
    assert dgauss1.moment_order == 0
    assert grid_for(gaussian_derivative(1, 2, 1.0), 1).moment_order == 1


def test_boundary_decay_enforced():
    with pytest.raises(ValueError):
        TestFunctionGrid(np.ones(20), 0.1)


def test_white_noise_is_plancherel(gauss1):
    assert covariance_bilinear(FieldSpec(1, 0), gauss1) == pytest.approx(gauss1.l2_inner(gauss1), rel=1e-10)


def test_negative_s_matches_finite_differences(gauss1):
    # s = -1: int phi (-Laplacian) phi
    phi, h = gauss1.values, gauss1.spacing
    lap = -(np.roll(phi, -1) - 2 * phi + np.roll(phi, 1)) / h**2
    fd = float(np.sum(phi * lap) * h)
    assert covariance_bilinear(FieldSpec(1, -1), gauss1) == pytest.approx(fd, rel=2e-3)


def test_negative_s_exact_gaussian(gauss1):
    # ||phi||_{H^1}^2 for exp(-x^2/2) is sqrt(pi)/2
    assert covariance_bilinear(FieldSpec(1, -1), gauss1) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-9)


def _real_space_1d(s: float, f1, f2) -> float:
    """Brute-force int int C |x-y|^(2H) f1(x) f2(y) dx dy (singular inner integral via weight='alg')."""
    H = s - 0.5
    c = normalization_constant(s, 1)

    def inner(x):
        g = lambda u: f2(x + u) + f2(x - u)
        return integrate.quad(g, 0, 14, weight="alg", wvar=(2 * H, 0), limit=200)[0]

    return c * integrate.quad(lambda x: f1(x) * inner(x), -10, 10, limit=200, epsabs=1e-13)[0]


@pytest.mark.parametrize("s", [0.2, 0.35])
def test_oracle_agrees_with_real_space_1d(s):
    f1 = gaussian_derivative(1, 0, 1.0)
    f2 = lambda x: np.exp(-((x - 0.7) ** 2) / (2 * 0.6**2))
    g1 = grid_for(f1, 1)
    g2 = TestFunctionGrid.from_function(f2, 1, g1.shape[0], g1.spacing)
    expected = _real_space_1d(s, f1, f2)
    assert covariance_bilinear(FieldSpec(1, s), g1, g2) == pytest.approx(expected, rel=1e-7)


def test_oracle_agrees_with_real_space_2d():
    # Gaussians of widths a, b centred at the origin and at c have a Gaussian cross-correlation,
    # so the real-space integral reduces to int C |u|^(2H) A(u) du, done here in polar coordinates.
    s, a, b = 0.5, 1.0, 0.8
    c = np.array([0.6, -0.2])
    g1 = grid_for(lambda x, y: np.exp(-(x**2 + y**2) / (2 * a**2)), 2, points_per_width=6, extent=10)
    n = g1.shape[0]
    g2 = TestFunctionGrid.from_function(lambda x, y: np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2) / (2 * b**2)), 2, n, g1.spacing)
    v = a**2 + b**2
    amp = 2 * math.pi * a**2 * b**2 / v

    def corr(r, t):
        u = r * np.array([math.cos(t), math.sin(t)])
        return amp * math.exp(-np.sum((u - c) ** 2) / (2 * v))

    H = s - 1
    cst = normalization_constant(s, 2)
    val = integrate.dblquad(lambda r, t: r ** (2 * H + 1) * corr(r, t), 0, 2 * math.pi, 0, 20, epsabs=1e-12)[0]
    assert covariance_bilinear(FieldSpec(2, s), g1, g2) == pytest.approx(cst * val, rel=1e-6)


def test_symmetry_and_positivity(gauss1, dgauss1):
    f2 = TestFunctionGrid.from_function(lambda x: np.exp(-((x - 0.4) ** 2)) * (x - 0.4), 1, gauss1.shape[0], gauss1.spacing)
    for s in (0.3, 0.9, 1.2, -0.5):
        spec = FieldSpec(1, s)
        a = covariance_bilinear(spec, dgauss1, f2)
        b = covariance_bilinear(spec, f2, dgauss1)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-14)
        assert covariance_bilinear(spec, dgauss1) > 0


def test_moment_precondition(gauss1):
    with pytest.raises(MomentError):
        covariance_bilinear(FieldSpec(1, 1), gauss1)


@pytest.mark.parametrize("a", [0.5, 2.0])
def test_scaling_1d(dgauss1, a):
    spec = FieldSpec(1, 1)
    base = covariance_bilinear(spec, dgauss1)
    scaled = covariance_bilinear(spec, dgauss1.rescaled(a))
    assert scaled == pytest.approx(a ** (2 * spec.H) * base, rel=1e-6)
