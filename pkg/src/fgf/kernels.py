"""Whole-space FGF covariance kernels, their constants, and a Fourier oracle.

The Fourier transform is the unitary one, ``phi_hat(xi) = (2 pi)^(-d/2)
int exp(-i x.xi) phi(x) dx``, so that ``int C(s,d)|x-y|^(2H) phi1 phi2`` and
``int |xi|^(-2s) phi1_hat conj(phi2_hat)`` agree for ``0 < s < d/2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import DomainError, MomentError, NoPointwiseKernel, PoleError, QuadratureError
from .params import FieldSpec, Regime
from .special import gamma_product, is_nonpositive_integer

MOMENT_TOL = 1e-8
MAX_MOMENT_ORDER = 6


def normalization_constant(s: float, d: int) -> float:
    """C(s, d) = 2^(-2s) pi^(-d/2) Gamma(d/2 - s) / Gamma(s)."""
    s = float(s)
    if s <= 0:
        raise DomainError(f"normalization constant needs s > 0, got s={s}")
    if is_nonpositive_integer(d / 2 - s):
        raise PoleError(
            f"H = s - d/2 = {s - d / 2} is a nonnegative integer; use log_residue"
        )
    return 2.0 ** (-2 * s) * math.pi ** (-d / 2) * gamma_product([d / 2 - s], [s])


def log_residue(k: int, d: int) -> float:
    """Residue of s -> C(s, d) at s = d/2 + k."""
    if int(k) != k or k < 0:
        raise DomainError(f"k must be a nonnegative integer, got {k!r}")
    if int(d) != d or d < 1:
        raise DomainError(f"d must be a positive integer, got {d!r}")
    k, d = int(k), int(d)
    return (
        (-1) ** (k + 1)
        * 2.0 ** (-2 * k - d)
        * math.pi ** (-d / 2)
        / (math.factorial(k) * math.gamma(d / 2 + k))
    )


def whole_space_kernel(spec: FieldSpec, r):
    """Pointwise covariance kernel G^s as a function of ``r = |x - y| > 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("kernel needs r > 0")
    if spec.regime is Regime.POS_NONINTEGER_H:
        out = normalization_constant(spec.s, spec.d) * r ** (2 * spec.H)
    elif spec.regime is Regime.NONNEG_INTEGER_H:
        k = spec.integer_H
        out = 2 * log_residue(k, spec.d) * r ** (2 * k) * np.log(r)
    else:
        raise NoPointwiseKernel(
            f"s={spec.s_exact} < 0 or = 0: kernel is a distribution; use covariance_bilinear"
        )
    return out[()] if out.ndim == 0 else out


def fbm_covariance(spec: FieldSpec, x, y):
    """Covariance of the FGF pinned at the origin, ``(h, delta_x - delta_0)``.

    Equals ``|C(s,d)| (|x|^2H + |y|^2H - |x-y|^2H)``; C(s,d) is negative for
    0 < H < 1, which makes this the usual positive-definite fBm form.
    """
    H = spec.H
    if not 0 < H < 1:
        raise DomainError(f"pinned field needs 0 < H < 1, got H={H}")
    c = abs(normalization_constant(spec.s, spec.d))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.d == 1 and x.ndim == 0:
        nx, ny, nxy = abs(x), abs(y), abs(x - y)
    else:
        nx = np.linalg.norm(np.atleast_1d(x), axis=-1)
        ny = np.linalg.norm(np.atleast_1d(y), axis=-1)
        nxy = np.linalg.norm(np.atleast_1d(x) - np.atleast_1d(y), axis=-1)
    return c * (nx ** (2 * H) + ny ** (2 * H) - nxy ** (2 * H))


def fbm_gram(spec: FieldSpec, points) -> np.ndarray:
    """Gram matrix of :func:`fbm_covariance` over ``points`` (shape (n, d) or (n,))."""
    pts = _as_points(points, spec.d)
    H = spec.H
    if not 0 < H < 1:
        raise DomainError(f"pinned field needs 0 < H < 1, got H={H}")
    c = abs(normalization_constant(spec.s, spec.d))
    norms = np.linalg.norm(pts, axis=1) ** (2 * H)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1) ** (2 * H)
    gram = c * (norms[:, None] + norms[None, :] - dist)
    return 0.5 * (gram + gram.T)


def _as_points(points, d: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and d == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"points must have shape (n, {d}), got {pts.shape}")
    return pts


# -- test functions ---------------------------------------------------------


@dataclass(frozen=True)
class TestFunctionGrid:
    """A test function sampled on a uniform lattice.

    ``origin`` is the coordinate of the first sample; ``moment_order`` is
    always recomputed from the samples.
    """

    __test__ = False  # not a pytest class

    values: np.ndarray
    spacing: float
    origin: np.ndarray = field(default=None)
    boundary_tol: float = 1e-10

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        origin = np.zeros(vals.ndim) if self.origin is None else np.asarray(self.origin, float)
        if origin.shape != (vals.ndim,):
            raise ValueError("origin must have one entry per axis")
        object.__setattr__(self, "origin", origin)
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        scale = np.max(np.abs(vals)) if vals.size else 0.0
        if scale > 0:
            edge = max(
                np.max(np.abs(np.take(vals, idx, axis=ax)))
                for ax in range(vals.ndim)
                for idx in (0, -1)
            )
            if edge > self.boundary_tol * scale:
                raise ValueError(
                    f"test function does not decay at the grid boundary "
                    f"(edge/max = {edge / scale:.2e})"
                )

    @classmethod
    def from_function(
        cls,
        func: Callable[..., np.ndarray],
        d: int,
        n: int,
        spacing: float,
        center: Sequence[float] | float = 0.0,
    ) -> "TestFunctionGrid":
        """Sample ``func(x1, ..., xd)`` on an ``n^d`` grid centred at ``center``."""
        center = np.broadcast_to(np.asarray(center, float), (d,))
        offsets = (np.arange(n) - (n - 1) / 2) * spacing
        axes = [c + offsets for c in center]
        mesh = np.meshgrid(*axes, indexing="ij")
        return cls(np.asarray(func(*mesh), float), spacing, center - (n - 1) / 2 * spacing)

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def axes(self) -> list[np.ndarray]:
        return [o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.shape)]

    @property
    def center(self) -> np.ndarray:
        return self.origin + self.spacing * (np.asarray(self.shape) - 1) / 2

    @cached_property
    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.spacing**self.d)

    @cached_property
    def support_radius(self) -> float:
        vals = np.abs(self.values)
        mask = vals > 1e-12 * vals.max()
        mesh = np.meshgrid(*[a - c for a, c in zip(self.axes(), self.center)], indexing="ij")
        r = np.sqrt(sum(m**2 for m in mesh))
        return float(r[mask].max()) if mask.any() else 0.0

    def moment(self, alpha: Sequence[int]) -> float:
        mesh = np.meshgrid(*[a - c for a, c in zip(self.axes(), self.center)], indexing="ij")
        weight = np.ones_like(self.values)
        for m, a in zip(mesh, alpha):
            if a:
                weight = weight * m**a
        return float(np.sum(weight * self.values) * self.spacing**self.d)

    @cached_property
    def moment_order(self) -> int:
        """Largest k with every moment of order <= k vanishing (-1 if none)."""
        if self.l1_norm == 0:
            return MAX_MOMENT_ORDER
        rad = max(self.support_radius, self.spacing)
        order = -1
        for k in range(MAX_MOMENT_ORDER + 1):
            tol = MOMENT_TOL * self.l1_norm * rad**k
            for alpha in _multi_indices(self.d, k):
                if abs(self.moment(alpha)) > tol:
                    return order
            order = k
        return order

    def rescaled(self, a: float) -> "TestFunctionGrid":
        """Grid representation of ``a^-d phi(x / a)`` (spacing scales by ``a``)."""
        return TestFunctionGrid(self.values * a ** (-self.d), self.spacing * a, self.origin * a)

    def l2_inner(self, other: "TestFunctionGrid") -> float:
        if self.shape != other.shape or self.spacing != other.spacing or not np.allclose(
            self.origin, other.origin
        ):
            raise ValueError("grids differ")
        return float(np.sum(self.values * other.values) * self.spacing**self.d)


def _multi_indices(d: int, k: int):
    for combo in itertools.combinations_with_replacement(range(d), k):
        alpha = [0] * d
        for i in combo:
            alpha[i] += 1
        yield tuple(alpha)


def gaussian_derivative(d: int, order: int, width: float = 1.0, axis: int = 0):
    """Callable for ``d^order/dx_axis^order exp(-|x|^2 / (2 width^2))``.

    Its moments of order < ``order`` vanish, so it is admissible for
    ``H < order``.
    """

    def func(*xs):
        r2 = sum(x**2 for x in xs)
        u = xs[axis] / width
        # probabilists' Hermite: d^n/du^n e^{-u^2/2} = (-1)^n He_n(u) e^{-u^2/2}
        he = np.polynomial.hermite_e.hermeval(u, [0] * order + [1])
        return (-1) ** order * he * width ** (-order) * np.exp(-r2 / (2 * width**2))

    return func


def grid_for(func, d: int, width: float = 1.0, points_per_width: int = 12, extent: float = 11.0):
    """Sample ``func`` on a centred grid reaching ``extent`` widths each side."""
    h = width / points_per_width
    n = 2 * int(math.ceil(extent * points_per_width)) + 1
    return TestFunctionGrid.from_function(func, d, n, h)


# -- Fourier oracle ---------------------------------------------------------


def fourier_transform(phi: TestFunctionGrid, xi: np.ndarray, reference=None) -> np.ndarray:
    """Unitary FT of the sampled test function at arbitrary frequencies.

    ``xi`` has shape (q, d). Phases are taken relative to ``reference``
    (default: grid centre); a common reference makes cross terms exact.
    """
    xi = np.atleast_2d(np.asarray(xi, float))
    d = phi.d
    ref = phi.center if reference is None else np.asarray(reference, float)
    axes = [a - r for a, r in zip(phi.axes(), ref)]
    norm = (2 * math.pi) ** (-d / 2) * phi.spacing**d
    out = np.empty(xi.shape[0], dtype=complex)
    # bound working memory to ~ 2e7 complex entries per block
    inner = int(np.prod(phi.shape[1:])) if d > 1 else 1
    block = max(1, int(2e7 // max(inner, 1)))
    for start in range(0, xi.shape[0], block):
        q = xi[start : start + block]
        e0 = np.exp(-1j * np.outer(q[:, 0], axes[0]))
        acc = e0 @ phi.values.reshape(phi.shape[0], -1)
        acc = acc.reshape((q.shape[0],) + phi.shape[1:])
        for ax in range(1, d):
            e = np.exp(-1j * np.outer(q[:, ax], axes[ax]))
            shape = (q.shape[0], phi.shape[ax]) + (1,) * (d - ax - 1)
            acc = np.sum(acc * e.reshape(shape), axis=1)
        out[start : start + block] = norm * acc
    return out


def _sphere_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions and weights covering half the sphere (antipodal symmetry)."""
    if d == 1:
        return np.array([[1.0]]), np.array([2.0])
    if d == 2:
        theta = np.arange(n) * math.pi / n
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        return dirs, np.full(n, 2 * math.pi / n)
    if d == 3:
        mu, wmu = roots_legendre(max(n // 2, 2))
        mu = 0.5 * (mu + 1)
        wmu = 0.5 * wmu
        phi = np.arange(2 * n) * 2 * math.pi / (2 * n)
        M, P = np.meshgrid(mu, phi, indexing="ij")
        sin_t = np.sqrt(1 - M**2)
        dirs = np.column_stack([(sin_t * np.cos(P)).ravel(), (sin_t * np.sin(P)).ravel(), M.ravel()])
        w = (wmu[:, None] * np.full(2 * n, 2 * math.pi / (2 * n))[None, :]).ravel() * 2
        return dirs, w
    raise DomainError(f"Fourier oracle supports d <= 3, got d={d}")


def _radial_rule(gamma: float, r1: float, rmax: float, n_jac: int, n_panels: int, n_leg: int):
    """Nodes/weights for int_0^rmax r^gamma g(r) dr: Jacobi on [0,r1], Legendre beyond.

    Returned weights already include r^gamma on the Legendre panels, so the
    caller always multiplies by ``g``.
    """
    x, w = roots_jacobi(n_jac, 0.0, gamma)
    nodes = [0.5 * r1 * (1 + x)]
    weights = [(0.5 * r1) ** (gamma + 1) * w]
    if rmax > r1:
        edges = np.linspace(r1, rmax, n_panels + 1)
        xl, wl = roots_legendre(n_leg)
        for a, b in zip(edges[:-1], edges[1:]):
            r = 0.5 * (b - a) * xl + 0.5 * (a + b)
            nodes.append(r)
            weights.append(0.5 * (b - a) * wl * r**gamma)
    return np.concatenate(nodes), np.concatenate(weights)


def _radial_cutoff(phi: TestFunctionGrid, dirs: np.ndarray) -> float:
    nyquist = math.pi / phi.spacing
    r = np.linspace(0, nyquist, 257)[1:]
    pick = dirs[:: max(1, len(dirs) // 8)]
    mags = np.stack([np.abs(fourier_transform(phi, np.outer(r, w))) for w in pick]).max(axis=0)
    keep = np.nonzero(mags > 1e-9 * mags.max())[0]
    last = r[keep[-1]] if keep.size else r[0]
    return float(min(nyquist, 1.5 * last + 2 * r[0]))


def covariance_bilinear(
    spec: FieldSpec,
    phi1: TestFunctionGrid,
    phi2: TestFunctionGrid | None = None,
    rtol: float = 1e-10,
    max_refinements: int = 4,
) -> float:
    """``int |xi|^(-2s) phi1_hat(xi) conj(phi2_hat(xi)) dxi`` for any real s.

    The integral is taken in polar coordinates. Near the origin the radial
    factor ``r^(d-1-2s)`` times the ``O(r^(2 floor(H) + 2))`` decay of the
    transforms is absorbed into a Gauss-Jacobi weight; the rest uses
    Gauss-Legendre panels up to where the transforms have decayed. The rule
    is doubled until two successive values agree to ``rtol``.
    """
    if phi2 is None:
        phi2 = phi1
    d = spec.d
    if phi1.d != d or phi2.d != d:
        raise ValueError("test function dimension does not match the field dimension")
    s, H = spec.s, spec.H
    m = -1
    if H >= 0:
        m = int(math.floor(H + 1e-12))
        for p in (phi1, phi2):
            if p.moment_order < m:
                raise MomentError(
                    f"H={H} needs moments up to order {m} to vanish; "
                    f"test function has moment_order={p.moment_order}"
                )
    gamma = d - 1 - 2 * s + 2 * (m + 1)
    ref = phi1.center
    dirs0, _ = _sphere_rule(d, 16)
    rmax = max(_radial_cutoff(phi1, dirs0), _radial_cutoff(phi2, dirs0))
    r1 = rmax / 8

    def evaluate(level: int) -> float:
        scale = 2**level
        dirs, wdir = _sphere_rule(d, 16 * scale)
        r, wr = _radial_rule(gamma, r1, rmax, 24 * scale, 6 * scale, 16)
        xi = (r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
        f1 = fourier_transform(phi1, xi, ref)
        f2 = f1 if phi2 is phi1 else fourier_transform(phi2, xi, ref)
        prod = np.real(f1 * np.conj(f2)).reshape(len(r), len(dirs))
        # remove the r^(2m+2) factor carried by the Jacobi weight
        prod = prod / r[:, None] ** (2 * (m + 1))
        return float(wr @ prod @ wdir), float(np.abs(wr) @ np.abs(prod) @ wdir)

    prev, _ = evaluate(0)
    for level in range(1, max_refinements + 1):
        cur, mass = evaluate(level)
        if abs(cur - prev) <= rtol * max(mass, 1e-300):
            return cur
        prev = cur
    raise QuadratureError(
        f"Fourier quadrature did not reach rtol={rtol} (last change {abs(cur - prev):.3e})"
    )
