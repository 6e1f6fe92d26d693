"""Finite-dimensional projections: conditioning splits, restriction, spherical averages."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate, linalg
from scipy.fft import dstn, idstn
from scipy.special import hyperu, roots_jacobi, roots_legendre

from .errors import DomainError, FactorizationError, GeometryError, QuadratureError
from .fracops import truncated_operator_matrix
from .green import CovMatrix
from .kernels import TestFunctionGrid, covariance_bilinear, log_residue, normalization_constant
from .params import FieldSpec, Regime, as_exact
from .sampler import CHUNK, RunConfig
from .special import hyp2f1

# -- conditioning split -------------------------------------------------------


@dataclass(frozen=True)
class SplitResult:
    """``field = harmonic_part + zero_part`` with ``zero_part`` supported on D.

    ``conditioning_map`` sends exterior values to the harmonic part on D;
    ``zero_covariance`` is the Schur complement the zero part was drawn from.
    Parts are 1-D for a single exterior vector and 2-D (draws x points) for
    a batch.
    """

    harmonic_part: np.ndarray
    zero_part: np.ndarray
    conditioning_map: np.ndarray
    zero_covariance: np.ndarray
    d_mask: np.ndarray

    @property
    def field(self) -> np.ndarray:
        return self.harmonic_part + self.zero_part


def condition_on_complement(
    cov: CovMatrix, d_mask, exterior_values, config: RunConfig, index: int = 0
) -> SplitResult:
    """Gaussian conditioning of the field on its values outside ``D``.

    On D the harmonic part is ``S_DE S_EE^{-1} h_E``; outside D it equals the
    given values. The zero part is a fresh draw from
    ``S_DD - S_DE S_EE^{-1} S_ED`` placed on D.
    """
    mask = np.asarray(d_mask, bool)
    if mask.shape != (cov.size,) or mask.all() or not mask.any():
        raise GeometryError("D must be a proper nonempty subset of the points")
    ext = ~mask
    S = cov.entries
    try:
        low = linalg.cholesky(S[np.ix_(ext, ext)], lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError(f"exterior covariance not positive definite: {exc}") from exc
    cross = S[np.ix_(mask, ext)]
    kmap = linalg.cho_solve((low, True), cross.T).T
    schur = S[np.ix_(mask, mask)] - kmap @ cross.T
    schur = 0.5 * (schur + schur.T)
    try:
        zlow = linalg.cholesky(schur, lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError(f"Schur complement not positive definite: {exc}") from exc

    values = np.asarray(exterior_values, float)
    single = values.ndim == 1
    batch = values.reshape(-1, int(ext.sum()))
    n = batch.shape[0]
    harmonic = np.zeros((n, cov.size))
    harmonic[:, ext] = batch
    harmonic[:, mask] = batch @ kmap.T
    zero = np.zeros((n, cov.size))
    for chunk, start in enumerate(range(0, n, CHUNK)):
        stop = min(start + CHUNK, n)
        z = config.rng(index + chunk).standard_normal((stop - start, int(mask.sum())))
        zero[start:stop, mask] = z @ zlow.T
    if single:
        harmonic, zero = harmonic[0], zero[0]
    return SplitResult(harmonic, zero, kmap, schur, mask)


def _lattice_check(points: np.ndarray, spacing: float) -> None:
    ratio = (points - points[0]) / spacing
    if np.max(np.abs(ratio - np.rint(ratio))) > 1e-8:
        raise GeometryError("points do not lie on a common lattice of the given spacing")


def discrete_operator(points, spacing: float, s) -> np.ndarray:
    """Discrete ``(-Delta)^s`` on lattice points with zero values off the set.

    Truncated singular-integral matrix for 0 < s < 1; powers of the
    nearest-neighbour Laplacian for integer s.
    """
    pts = np.asarray(points, float)
    if pts.ndim == 1:
        pts = pts[:, None]
    _lattice_check(pts, spacing)
    sf = float(s)
    if 0 < sf < 1:
        span = float(np.max(np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)))
        return truncated_operator_matrix(pts, spacing, sf, max(span, spacing))
    if sf == int(sf) and sf >= 1:
        dist = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
        lap = np.where(np.abs(dist - spacing) < 1e-9 * spacing, -1.0, 0.0)
        np.fill_diagonal(lap, 2.0 * pts.shape[1])
        return np.linalg.matrix_power(lap / spacing**2, int(sf))
    raise DomainError(f"discrete operator available for 0 < s < 1 or integer s, got {s}")


def s_harmonicity_residual(
    split: SplitResult, s, points, spacing: float, core_distance: float = 0.0,
    part: str = "harmonic",
) -> float:
    """Relative size of ``(-Delta)^s`` of the harmonic part at core points of D.

    Returns ``max |A g| / max sum_y |A(x,y) g(y)|`` over D points further than
    ``core_distance`` from every exterior point, a cancellation ratio that is
    0 for an exactly s-harmonic vector and O(1) for a generic one. ``part``
    may be ``"zero"`` to evaluate the zero part instead.
    """
    pts = np.asarray(points, float)
    if pts.ndim == 1:
        pts = pts[:, None]
    g = split.harmonic_part if part == "harmonic" else split.zero_part
    if g.ndim != 1:
        raise ValueError("residual needs a single realization")
    A = discrete_operator(pts, spacing, s)
    mask = split.d_mask
    dist = np.min(np.linalg.norm(pts[mask][:, None] - pts[~mask][None], axis=-1), axis=1)
    core = np.flatnonzero(mask)[dist > core_distance]
    if core.size == 0:
        raise GeometryError("no D points beyond the core distance")
    num = np.abs(A[core] @ g)
    den = np.abs(A[core]) @ np.abs(g)
    return float(np.max(num) / max(float(np.max(den)), 1e-300))


# -- restriction to a hyperplane ----------------------------------------------


@dataclass(frozen=True)
class RestrictionResult:
    """Variances of the lifted and the lower-dimensional pairing.

    ``ratio`` uses the zero-width limit of the lift; ``mollified_ratios``
    maps transverse mollifier widths to the ratio at that width.
    """

    var_d: float
    var_lower: float
    ratio: float
    mollified_ratios: dict
    constant_squared: float


def restriction_constant_squared(s: float) -> float:
    """``C^2 = Gamma(s - 1/2) / (2 sqrt(pi) Gamma(s))``, the ratio of kernel constants."""
    return math.gamma(s - 0.5) / (2 * math.sqrt(math.pi) * math.gamma(s))


def _mollified_power(u: np.ndarray, tau: float, H: float) -> np.ndarray:
    """``E (|u|^2 + 2 tau^2 Z^2)^H`` for standard normal Z."""
    b = 2 * tau**2
    a = np.asarray(u, float) ** 2
    out = np.empty_like(a)
    zero = a == 0
    out[zero] = (2 * b) ** H * math.gamma(H + 0.5) / math.sqrt(math.pi)
    z = a[~zero] / (2 * b)
    out[~zero] = a[~zero] ** H * np.sqrt(z) * hyperu(0.5, H + 1.5, z)
    return out


def _autocorrelation(phi: TestFunctionGrid):
    """Band-limited autocorrelation ``psi(u) = int phi(x) phi(x+u) dx`` as a callable."""
    vals, h = phi.values, phi.spacing
    acf = np.correlate(vals, vals, mode="full") * h
    lags = (np.arange(acf.size) - (vals.size - 1)) * h

    def psi(u):
        u = np.asarray(u, float)
        return np.sinc((u[:, None] - lags[None, :]) / h) @ acf

    return psi, float(lags[-1])


def _panels(edges: np.ndarray, n: int):
    xl, wl = roots_legendre(n)
    a, b = edges[:-1], edges[1:]
    u = (0.5 * (b - a)[:, None] * xl[None, :] + 0.5 * (a + b)[:, None]).ravel()
    w = (0.5 * (b - a)[:, None] * wl[None, :]).ravel()
    return u, w


def _lift_variance(phi: TestFunctionGrid, s: float, d: int, tau: float) -> float:
    """Variance of ``(h^d, phi (x) eta)``; ``eta`` Gaussian of width tau (0 = surface measure)."""
    H = s - d / 2
    c = normalization_constant(s, d)
    psi, top = _autocorrelation(phi)
    if tau == 0:
        # product rule with the weight u^(2H) on the first panel
        first = min(phi.spacing * 4, top)
        xj, wj = roots_jacobi(24, 0.0, 2 * H)
        u0 = 0.5 * first * (1 + xj)
        w0 = (0.5 * first) ** (2 * H + 1) * wj
        u1, w1 = _panels(np.linspace(first, top, int(math.ceil((top - first) / phi.spacing)) + 1), 12)
        total = np.sum(w0 * psi(u0)) + np.sum(w1 * psi(u1) * u1 ** (2 * H))
    else:
        # the mollified kernel varies on scale tau near 0: grade panels there
        edges = np.unique(np.concatenate([[0.0], tau * np.geomspace(1e-3, 64, 40), np.linspace(0, top, 400)]))
        u, w = _panels(edges[edges <= top], 12)
        total = np.sum(w * psi(u) * _mollified_power(u, tau, H))
    return float(2 * c * total)


def restrict_variance_check(
    d: int, s: float, phi: TestFunctionGrid, widths=None
) -> RestrictionResult:
    """Compare the variance of the lift ``phi (x) delta_hyperplane`` with the lower-dimensional one.

    The d-dimensional variance is the real-space double integral of the
    d-dimensional kernel over the hyperplane, i.e. the zero-width limit of
    transversally mollified lifts; ``widths`` (default: the grid spacing and
    half of it) give the mollified values as a convergence diagnostic. The
    lower-dimensional variance comes from the Fourier oracle with the same H.
    Implemented for d = 2.
    """
    if d != 2 or phi.values.ndim != 1:
        raise DomainError("restriction check is implemented for d = 2 with a 1-D test function")
    if not s > 0.5:
        raise DomainError("restriction needs s > 1/2")
    if FieldSpec(d, s).regime is not Regime.POS_NONINTEGER_H:
        raise DomainError("restriction check needs a non-integer H")
    if widths is None:
        widths = (phi.spacing, phi.spacing / 2)
    var_lower = covariance_bilinear(FieldSpec(d - 1, s - 0.5), phi)
    var_d = _lift_variance(phi, s, d, 0.0)
    mollified = {float(w): _lift_variance(phi, s, d, float(w)) / var_lower for w in widths}
    return RestrictionResult(var_d, var_lower, var_d / var_lower, mollified, restriction_constant_squared(s))


# -- spherical averages -------------------------------------------------------


@dataclass(frozen=True)
class SphericalKernel:
    integral: float
    closed: float | None

    @property
    def value(self) -> float:
        return self.integral if self.closed is None else self.closed


def _sphere_ratio(d: int) -> float:
    # |S^(d-2)| / |S^(d-1)|
    return math.gamma(d / 2) / (math.sqrt(math.pi) * math.gamma((d - 1) / 2))


def _quad(f, a, b, scale: float, **kw) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=1e-14 * scale, epsrel=1e-12, limit=500, **kw)
    if err > 1e-10 * max(abs(val), scale):
        raise QuadratureError(f"theta integral error estimate {err:.2e} too large")
    return val


def _theta_integral(spec: FieldSpec, r1: float, r2: float) -> float:
    """``int_0^pi G(rho(t)) sin^(d-2) t dt`` for the whole-space kernel of ``spec``."""
    d, H, k = spec.d, spec.H, spec.integer_H
    amp = normalization_constant(spec.s, d) if k is None else 2 * log_residue(k, d)
    rmax = max(r1, r2)
    scale = abs(amp) * (2 * rmax) ** (2 * H) * (1 + abs(math.log(2 * rmax)))
    if r1 != r2:
        def f(t):
            rho = math.sqrt(max(r1 * r1 + r2 * r2 - 2 * r1 * r2 * math.cos(t), 0.0))
            val = rho ** (2 * H) * (math.log(rho) if k is not None else 1.0)
            return amp * val * math.sin(t) ** (d - 2)

        return _quad(f, 0.0, math.pi, scale)
    # equal radii: rho = t g(t) with g smooth, so the singular factor goes into the weight
    expo = 2 * H + d - 2
    if expo <= -1:
        raise DomainError("spherical average diverges for equal radii at this H")

    def g(t):
        return r1 if t == 0 else 2 * r1 * math.sin(t / 2) / t

    def q(t):
        return 1.0 if t == 0 else (math.sin(t) / t) ** (d - 2)

    if k is None:
        return _quad(lambda t: amp * g(t) ** (2 * H) * q(t), 0.0, math.pi, scale, weight="alg", wvar=(expo, 0.0))
    smooth = _quad(lambda t: amp * g(t) ** (2 * k) * q(t) * math.log(g(t)), 0.0, math.pi, scale, weight="alg", wvar=(expo, 0.0))
    logpart = _quad(lambda t: amp * g(t) ** (2 * k) * q(t), 0.0, math.pi, scale, weight="alg-loga", wvar=(expo, 0.0))
    return smooth + logpart


def spherical_average_kernel(
    d: int, H, r1: float, r2: float, *, check: bool = True, rtol: float = 1e-8
) -> SphericalKernel:
    """Covariance of the averages of the field over spheres of radii r1, r2.

    Computes ``|S^(d-2)|/|S^(d-1)| int_0^pi G(rho) sin^(d-2) t dt`` with
    ``rho^2 = r1^2 + r2^2 - 2 r1 r2 cos t`` and the whole-space kernel G of
    index ``s = H + d/2``. For non-integer H also evaluates the closed form
    ``C 2^(d-2) Gamma(d/2) Gamma((d-1)/2) / (sqrt(pi) Gamma(d-1))
    (r1+r2)^(2H) 2F1((d-1)/2, -H; d-1; 4 r1 r2 / (r1+r2)^2)`` and, with
    ``check``, raises :class:`QuadratureError` if the two disagree.
    """
    if d < 2:
        raise DomainError("spherical averages need d >= 2")
    if not (r1 > 0 and r2 > 0):
        raise DomainError("radii must be positive")
    spec = FieldSpec(d, as_exact(H) + Fraction(d, 2))
    Hf = spec.H
    if spec.regime not in (Regime.POS_NONINTEGER_H, Regime.NONNEG_INTEGER_H):
        raise DomainError(f"no pointwise kernel for s = {spec.s}")

    integral = _sphere_ratio(d) * _theta_integral(spec, r1, r2)
    closed = None
    if spec.integer_H is None:
        c = normalization_constant(spec.s, d)
        pref = c * 2 ** (d - 2) * math.gamma(d / 2) * math.gamma((d - 1) / 2) / (math.sqrt(math.pi) * math.gamma(d - 1))
        z = 4 * r1 * r2 / (r1 + r2) ** 2
        closed = pref * (r1 + r2) ** (2 * Hf) * hyp2f1((d - 1) / 2, -Hf, d - 1, min(z, 1.0))
        if check and abs(closed - integral) > rtol * max(abs(closed), 1e-300):
            raise QuadratureError(
                f"spherical kernel forms disagree: closed {closed!r} vs integral {integral!r}"
            )
    return SphericalKernel(integral, closed)


def spherical_coefficient_cov(d: int, H, k: int, r1: float, r2: float, **kwargs) -> SphericalKernel:
    """Covariance of degree-k spherical-harmonic coefficient processes.

    Equal to the spherical-average kernel in dimension ``d + 2k`` with the
    same index s, i.e. Hurst parameter ``H - k``.
    """
    if k < 0:
        raise DomainError("harmonic degree must be nonnegative")
    return spherical_average_kernel(d + 2 * k, as_exact(H) - k, r1, r2, **kwargs)


def spherical_projection_cov(d: int, H, k: int, r1: float, r2: float, **kwargs) -> float:
    """Covariance of ``int_{S^(d-1)} h(r theta) phi(theta) d theta`` at radii r1, r2.

    ``phi`` is any degree-k spherical harmonic of unit norm in ``L^2(S^(d-1))``.
    The field equals ``sum coefficient(|x|) P(x)`` with ``P = |x|^k phi``, and
    the coefficient process has the law of ``|S^(d+2k-1)|^(1/2)`` times the
    spherical average in dimension ``d + 2k``, hence
    ``(r1 r2)^k |S^(d+2k-1)| K_(d+2k)(r1, r2)``.
    """
    kern = spherical_coefficient_cov(d, H, k, r1, r2, **kwargs).value
    dim = d + 2 * k
    area = 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)
    return (r1 * r2) ** k * area * kern


# -- zero-boundary fields on a box ------------------------------------------


def dirichlet_eigenvalues(n: int, d: int, spacing: float) -> np.ndarray:
    """Eigenvalues of the nearest-neighbour Dirichlet ``-Delta`` on an ``n^d`` interior grid."""
    k = np.arange(1, n + 1)
    lam1 = (4 / spacing**2) * np.sin(np.pi * k / (2 * (n + 1))) ** 2
    mesh = np.meshgrid(*([lam1] * d), indexing="ij")
    return sum(mesh)


def dirichlet_field_family(config: RunConfig, s_list, index: int = 0) -> dict:
    """Zero-boundary lattice fields ``(-Delta_D)^(-s/2) W`` on the box for every s, one noise draw.

    Diagonalized by the type-I sine transform, so the discrete Laplacian maps
    the field of index s exactly onto the field of index s - 2.
    """
    shape = config.shape
    noise = config.rng(index).standard_normal(shape) * config.spacing ** (-config.d / 2)
    spec_noise = dstn(noise, type=1, norm="ortho")
    lam = dirichlet_eigenvalues(config.n, config.d, config.spacing)
    return {s: idstn(spec_noise * lam ** (-s / 2), type=1, norm="ortho") for s in s_list}


def dirichlet_laplacian_apply(values: np.ndarray, spacing: float) -> np.ndarray:
    """Nearest-neighbour ``-Delta`` with zero values outside the box."""
    padded = np.pad(values, 1)
    out = 2 * values.ndim * values
    for axis in range(values.ndim):
        for step in (-1, 1):
            out = out - np.roll(padded, step, axis=axis)[tuple(slice(1, -1) for _ in range(values.ndim))]
    return out / spacing**2
