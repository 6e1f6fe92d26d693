"""Zero-boundary Green's functions of (-Delta)^s on the ball and covariance matrices.

All evaluators take points in a ball of the given ``radius`` centred at the
origin and use ``G_{B_R}(x, y) = R^(2s-d) G_{B_1}(x/R, y/R)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, linalg
from scipy.special import betainc, beta, roots_legendre

from .errors import (
    DomainError,
    FactorizationError,
    GeometryError,
    PSDError,
    QuadratureError,
    SingularityError,
)
from .params import as_exact

CONSTANT_CHOICES = ("corrected", "printed")


# -- shared helpers -----------------------------------------------------------


def _pairs(x, y, d: int):
    """Broadcast two point arguments to arrays of shape (m, d)."""
    xa = np.asarray(x, float)
    ya = np.asarray(y, float)
    limit = 0 if d == 1 else 1
    scalar = xa.ndim <= limit and ya.ndim <= limit
    if d == 1:
        xa = xa.reshape(-1, 1)
        ya = ya.reshape(-1, 1)
    else:
        xa = np.atleast_2d(xa)
        ya = np.atleast_2d(ya)
    if xa.shape[1] != d or ya.shape[1] != d:
        raise GeometryError(f"points must have {d} coordinates")
    xa, ya = np.broadcast_arrays(xa, ya)
    return xa, ya, scalar


def _check_interior(*arrays: np.ndarray) -> None:
    for arr in arrays:
        if np.any(np.sum(arr**2, axis=1) >= 1.0):
            raise GeometryError("points must lie strictly inside the ball")


def _ball_geometry(xa: np.ndarray, ya: np.ndarray):
    """Return ``|x-y|`` and ``A = ||x| y - x/|x||`` (equal to 1 at x = 0)."""
    w = np.linalg.norm(xa - ya, axis=1)
    x2 = np.sum(xa**2, axis=1)
    y2 = np.sum(ya**2, axis=1)
    a2 = x2 * y2 - 2 * np.sum(xa * ya, axis=1) + 1.0
    return w, np.sqrt(np.maximum(a2, 0.0)), x2, y2


def _finish(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


def _integer_order(s) -> int:
    se = as_exact(s)
    if isinstance(se, float) or se.denominator != 1 or se < 1:
        raise DomainError(f"integer Green's function needs integer s >= 1, got {s}")
    return int(se)


# -- integer s ----------------------------------------------------------------


def integer_green_constant(s: int, d: int, constant: str = "corrected") -> float:
    """``Gamma(1+d/2) / (d pi^(d/2) 4^(e) ((s-1)!)^2)`` with ``e = s-1`` or ``d-1``.

    ``"corrected"`` (``e = s-1``) reproduces the Newtonian potential for
    s = 1 and the biharmonic fundamental solution ``-|x|/(8 pi)`` for
    s = 2, d = 3. ``"printed"`` keeps ``e = d-1``, which only agrees when
    ``s = d``.
    """
    if constant not in CONSTANT_CHOICES:
        raise ValueError(f"constant must be one of {CONSTANT_CHOICES}")
    e = s - 1 if constant == "corrected" else d - 1
    return math.gamma(1 + d / 2) / (d * math.pi ** (d / 2) * 4**e * math.factorial(s - 1) ** 2)


def _integer_radial_integral(s: int, d: int, w: np.ndarray, a: np.ndarray) -> np.ndarray:
    """``|x-y|^(2s-d) int_1^U (v^2-1)^(s-1) v^(1-d) dv`` with ``U = a / w``."""
    out = np.zeros_like(w)
    u = a / w
    near = u <= 4.0
    if np.any(near):
        # Gauss-Legendre on [1, U]: the integrand is a polynomial times v^(1-d)
        xl, wl = roots_legendre(40)
        un = u[near]
        v = 1 + 0.5 * (un[:, None] - 1) * (1 + xl[None, :])
        f = (v**2 - 1) ** (s - 1) * v ** (1 - d)
        out[near] = w[near] ** (2 * s - d) * 0.5 * (un - 1) * (f @ wl)
    far = ~near
    if np.any(far):
        wf, af = w[far], a[far]
        acc = np.zeros_like(wf)
        for j in range(s):
            coef = math.comb(s - 1, j) * (-1) ** (s - 1 - j)
            e = 2 * j + 2 - d
            if e == 0:
                term = wf ** (2 * s - d) * np.log(af / wf)
            else:
                term = (af**e * wf ** (2 * s - d - e) - wf ** (2 * s - d)) / e
            acc += coef * term
        out[far] = acc
    return out


def integer_ball_green(
    s, d: int, x, y, *, radius: float = 1.0, constant: str = "corrected"
):
    """Green's function of ``(-Delta)^s`` (integer s) on the ball with zero boundary data.

    ``k |x-y|^(2s-d) int_1^U (v^2-1)^(s-1) v^(1-d) dv`` with
    ``U = ||x| y - x/|x|| / |x-y|``. The diagonal returns its continuous
    limit ``k (1-|x|^2)^(2s-d) / (2s-d)`` when ``2s > d`` and raises
    :class:`SingularityError` otherwise.
    """
    m = _integer_order(s)
    xa, ya, scalar = _pairs(np.asarray(x, float) / radius, np.asarray(y, float) / radius, d)
    _check_interior(xa, ya)
    k = integer_green_constant(m, d, constant)
    w, a, x2, _ = _ball_geometry(xa, ya)
    out = np.empty_like(w)
    diag = w == 0
    if np.any(diag):
        if 2 * m <= d:
            raise SingularityError("Green's function is infinite on the diagonal for 2s <= d")
        out[diag] = (1 - x2[diag]) ** (2 * m - d) / (2 * m - d)
    if np.any(~diag):
        out[~diag] = _integer_radial_integral(m, d, w[~diag], a[~diag])
    return _finish(k * radius ** (2 * m - d) * out, scalar)


def integer_ball_green_quad(s, d: int, x, y, constant: str = "corrected") -> float:
    """Scalar reference evaluation of :func:`integer_ball_green` by adaptive quadrature."""
    m = _integer_order(s)
    xa, ya, _ = _pairs(x, y, d)
    w, a, _, _ = _ball_geometry(xa, ya)
    upper = float(a[0] / w[0])
    val, _ = integrate.quad(lambda v: (v * v - 1) ** (m - 1) * v ** (1 - d), 1, upper, epsrel=1e-13)
    return integer_green_constant(m, d, constant) * float(w[0]) ** (2 * m - d) * val


# -- fractional s in (0, 1) ---------------------------------------------------


def fractional_green_constant(s: float, d: int) -> float:
    """``Gamma(d/2) / (4^s pi^(d/2) Gamma(s)^2)``."""
    return math.gamma(d / 2) / (4**s * math.pi ** (d / 2) * math.gamma(s) ** 2)


def _riesz_integral_quad(s: float, d: int, V: float) -> float:
    """Reference value of the Riesz integral by adaptive quadrature."""
    # v = u^(1/s) removes the v^(s-1) endpoint singularity on [0, 1]
    lower = min(V, 1.0)
    f = lambda u: (1 + u ** (1 / s)) ** (-d / 2) / s
    val, err = integrate.quad(f, 0, lower**s, epsabs=0, epsrel=1e-13, limit=200)
    if V > 1:
        # logarithmic variable keeps the slowly decaying tail smooth
        g = lambda w: math.exp(s * w) * (1 + math.exp(w)) ** (-d / 2)
        more, err2 = integrate.quad(g, 0, math.log(V), epsabs=0, epsrel=1e-13, limit=400)
        val, err = val + more, err + err2
    if err > 1e-9 * abs(val):
        raise QuadratureError(f"Riesz integral did not converge (err={err:.2e})")
    return val


def _riesz_integral(s: float, d: int, V: np.ndarray) -> np.ndarray:
    """``int_0^V v^(s-1) (1+v)^(-d/2) dv`` for an array of V."""
    b = d / 2 - s
    if b > 0:
        t = V / (1 + V)
        return beta(s, b) * betainc(s, b, t)
    if b == 0:
        return 2 * np.arcsinh(np.sqrt(V))
    # b in (-1/2, 0): step the incomplete beta function up to b + 1 > 0
    t = V / (1 + V)
    upper = beta(s, b + 1) * betainc(s, b + 1, t)
    return ((s + b) * upper - t**s * (1 + V) ** (-b)) / b


def fractional_ball_green(s: float, d: int, x, y, *, radius: float = 1.0):
    """Green's function of ``(-Delta)^s``, 0 < s < 1, on the ball with zero exterior data.

    ``k |x-y|^(2s-d) int_0^V v^(s-1) (1+v)^(-d/2) dv`` with
    ``V = (1-|x|^2)(1-|y|^2)/|x-y|^2``. The diagonal is finite only when
    ``d < 2s`` (then ``k (1-|x|^2)^(2s-d) / (s - d/2)``).
    """
    s = float(s)
    if not 0 < s < 1:
        raise DomainError(f"fractional Green's function needs 0 < s < 1, got {s}")
    xa, ya, scalar = _pairs(np.asarray(x, float) / radius, np.asarray(y, float) / radius, d)
    _check_interior(xa, ya)
    k = fractional_green_constant(s, d)
    w, _, x2, y2 = _ball_geometry(xa, ya)
    out = np.empty_like(w)
    diag = w == 0
    if np.any(diag):
        if d >= 2 * s:
            raise SingularityError("Green's function is infinite on the diagonal for d >= 2s")
        hurst = s - d / 2
        out[diag] = (1 - x2[diag]) ** (2 * hurst) / hurst
    off = ~diag
    if np.any(off):
        V = (1 - x2[off]) * (1 - y2[off]) / w[off] ** 2
        out[off] = w[off] ** (2 * s - d) * _riesz_integral(s, d, V)
    return _finish(k * radius ** (2 * s - d) * out, scalar)


# -- composed s > 1 -----------------------------------------------------------


def _full_sphere(d: int, n: int):
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        t = (np.arange(2 * n) + 0.5) * math.pi / n
        return np.column_stack([np.cos(t), np.sin(t)]), np.full(2 * n, math.pi / n)
    if d == 3:
        mu, wmu = roots_legendre(n)
        phi = (np.arange(2 * n) + 0.5) * math.pi / n
        M, P = np.meshgrid(mu, phi, indexing="ij")
        st = np.sqrt(1 - M**2)
        dirs = np.column_stack([(st * np.cos(P)).ravel(), (st * np.sin(P)).ravel(), M.ravel()])
        w = (wmu[:, None] * np.full(2 * n, math.pi / n)[None, :]).ravel()
        return dirs, w
    raise DomainError(f"composed Green's function supports d <= 3, got {d}")


def _graded_rule(n_leg: int, levels: int, ratio: float = 0.2):
    """Nodes/weights on [0, 1] graded geometrically toward both endpoints."""
    inner = ratio ** np.arange(levels, 0, -1) * 0.5
    edges = np.concatenate([[0.0], inner, [0.5], 1 - inner[::-1], [1.0]])
    xl, wl = roots_legendre(n_leg)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * xl + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * wl)
    return np.concatenate(nodes), np.concatenate(weights)


def _exit_distance(p: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    pw = dirs @ p
    return -pw + np.sqrt(pw**2 + 1 - p @ p)


def composed_ball_green(
    s, d: int, x, y, *, quad_points: int = 8, rtol: float = 1e-6, radius: float = 1.0,
    constant: str = "corrected",
) -> float:
    """``int_B G^{floor(s)}(x, u) G^{s - floor(s)}(u, y) du`` for non-integer s > 1.

    The integral is split by a partition of unity into a part singular only
    at ``x`` and a part singular only at ``y``; each is integrated in polar
    coordinates about its singular point with radial panels graded toward
    the centre and the sphere. Radial and angular orders are raised together
    until successive values agree to ``rtol``.

    The composition is taken in the order written; the two factors do not
    commute on the ball, so the result is not symmetric in ``(x, y)``.
    """
    se = float(as_exact(s))
    m = int(math.floor(se))
    frac = se - m
    if m < 1 or frac == 0:
        raise DomainError(f"composed Green's function needs non-integer s > 1, got {s}")
    xp = np.atleast_1d(np.asarray(x, float)) / radius
    yp = np.atleast_1d(np.asarray(y, float)) / radius
    if xp.size != d or yp.size != d:
        raise GeometryError(f"points must have {d} coordinates")
    _check_interior(xp[None, :], yp[None, :])
    same = bool(np.all(xp == yp))
    if same and se - d / 2 <= 0:
        raise SingularityError("composed kernel is infinite on the diagonal when H <= 0")

    def integrand(u: np.ndarray) -> np.ndarray:
        g1 = integer_ball_green(m, d, np.broadcast_to(xp, u.shape), u, constant=constant)
        g2 = fractional_ball_green(frac, d, u, np.broadcast_to(yp, u.shape))
        return np.atleast_1d(g1) * np.atleast_1d(g2)

    def polar(center: np.ndarray, other: np.ndarray | None, n_ang: int, n_leg: int) -> float:
        dirs, wdir = _full_sphere(d, n_ang)
        tmax = _exit_distance(center, dirs)
        tn, tw = _graded_rule(n_leg, 8)
        r = tmax[:, None] * tn[None, :]
        u = (center[None, None, :] + r[:, :, None] * dirs[:, None, :]).reshape(-1, d)
        # keep the outermost nodes strictly inside the sphere
        u *= np.minimum(1.0, (1 - 1e-15) / np.maximum(np.linalg.norm(u, axis=1), 1e-300))[:, None]
        vals = integrand(u) * r.ravel() ** (d - 1)
        if other is not None:
            a4 = np.sum((u - center) ** 2, axis=1) ** 2
            b4 = np.sum((u - other) ** 2, axis=1) ** 2
            vals = vals * b4 / (a4 + b4)
        vals = vals.reshape(r.shape)
        return float(np.sum(wdir * tmax * (vals @ tw)))

    def evaluate(level: int) -> float:
        # radial panels converge algebraically, angles spectrally
        n_ang = quad_points + 4 * level
        n_leg = 12 + 8 * level
        if same:
            return polar(xp, None, n_ang, n_leg)
        return polar(xp, yp, n_ang, n_leg) + polar(yp, xp, n_ang, n_leg)

    prev = evaluate(0)
    for level in range(1, 4):
        cur = evaluate(level)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur * radius ** (2 * se - d)
        prev = cur
    raise QuadratureError(
        f"composed Green's function did not reach rtol={rtol:.1e} (last change {abs(cur - prev):.2e})"
    )


# -- cell averages (d = 1) ----------------------------------------------------


def cell_averaged_matrix(kernel, centers: np.ndarray, h: float, n_leg: int = 10) -> np.ndarray:
    """``(1/h^2) int_{I_i} int_{I_j} K(x, y) dy dx`` over cells of width h in d = 1.

    ``kernel(x, y)`` takes equal-length 1-D arrays. Well-separated cells use
    a tensor Gauss rule; for touching or identical cells the difference
    variable ``t = y - x`` is integrated on panels graded toward ``t = 0``.
    """
    c = np.asarray(centers, float).ravel()
    n = c.size
    xl, wl = roots_legendre(n_leg)
    ref = 0.5 * h * xl
    wref = 0.5 * wl
    out = np.empty((n, n))
    tn, tw = _graded_rule(n_leg, 10, ratio=0.15)
    for i in range(n):
        for j in range(i, n):
            gap = abs(c[j] - c[i])
            if gap > 1.5 * h:
                X, Y = np.meshgrid(c[i] + ref, c[j] + ref, indexing="ij")
                val = np.sum(wref[:, None] * wref[None, :] * kernel(X.ravel(), Y.ravel()).reshape(X.shape))
            else:
                a, b = c[i] - h / 2, c[j] - h / 2
                lo, hi = b - a - h, b - a + h
                val = 0.0
                for t0, t1 in ((lo, 0.0), (0.0, hi)):
                    if t1 - t0 <= 1e-15 * h:
                        continue
                    # half-graded: only the end at t = 0 is singular
                    t = t0 + (t1 - t0) * tn
                    wt = (t1 - t0) * tw
                    for tk, wk in zip(t, wt):
                        xlo, xhi = max(a, b - tk), min(a + h, b + h - tk)
                        if xhi <= xlo:
                            continue
                        xs = 0.5 * (xhi - xlo) * xl + 0.5 * (xhi + xlo)
                        val += wk * 0.5 * (xhi - xlo) * np.sum(wl * kernel(xs, xs + tk))
                val /= h * h
            out[i, j] = out[j, i] = val
    return out


# -- covariance matrices ------------------------------------------------------


@dataclass(frozen=True)
class CovMatrix:
    """Dense covariance over an explicit ordered point set, optionally factorized."""

    points: np.ndarray
    entries: np.ndarray
    factor: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def check(self, sym_tol: float = 1e-12, eig_tol: float = 1e-10) -> None:
        """Raise :class:`PSDError` if symmetry or the eigenvalue floor fails."""
        e = self.entries
        scale = max(float(np.max(np.abs(e))), 1e-300)
        if np.max(np.abs(e - e.T)) > sym_tol * scale:
            raise PSDError("covariance matrix is not symmetric")
        floor = -eig_tol * float(np.trace(e))
        lam = self.min_eigenvalue()
        if lam < floor:
            raise PSDError(f"minimum eigenvalue {lam:.3e} below floor {floor:.3e}")

    def factorize(self) -> "CovMatrix":
        try:
            low = linalg.cholesky(self.entries, lower=True)
        except linalg.LinAlgError as exc:
            raise FactorizationError(f"Cholesky failed: {exc}") from exc
        return replace(self, factor=low)

    def inverse(self) -> np.ndarray:
        cov = self if self.factor is not None else self.factorize()
        return linalg.cho_solve((cov.factor, True), np.eye(self.size))


def ball_covariance_matrix(
    s, d: int, points, *, radius: float = 1.0, cell: float | None = None,
    constant: str = "corrected", rtol: float = 1e-6,
) -> CovMatrix:
    """Zero-boundary covariance ``G_B(x_i, x_j)`` on a point set, dispatched on s.

    When the kernel is infinite on the diagonal the matrix of point values
    does not exist; in d = 1 pass ``cell`` (a width) to get the covariance of
    cell averages instead. For non-integer s > 1 the composed kernel is
    symmetrized as ``(K + K^T)/2``.
    """
    se = as_exact(s)
    pts = np.asarray(points, float)
    if d == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise GeometryError(f"points must have shape (m, {d})")
    if len({tuple(p) for p in pts}) != len(pts):
        raise GeometryError("points must be pairwise distinct")
    _check_interior(pts / radius)
    sf = float(se)
    if sf <= 0:
        raise DomainError("ball covariance needs s > 0")
    is_int = not isinstance(se, float) and se.denominator == 1

    if is_int:
        def kern(a, b):
            return integer_ball_green(int(se), d, a, b, radius=radius, constant=constant)
    elif sf < 1:
        def kern(a, b):
            return fractional_ball_green(sf, d, a, b, radius=radius)
    else:
        kern = None

    if cell is not None:
        if d != 1 or kern is None:
            raise DomainError("cell averages are implemented for d = 1 and s = integer or s < 1")
        if np.any(np.abs(pts[:, 0]) + cell / 2 > radius):
            raise GeometryError("cells must lie inside the ball")
        entries = cell_averaged_matrix(lambda a, b: kern(a, b), pts[:, 0], cell)
    elif kern is not None:
        m = len(pts)
        I, J = np.triu_indices(m)
        vals = kern(pts[I], pts[J])
        entries = np.empty((m, m))
        entries[I, J] = vals
        entries[J, I] = vals
    else:
        m = len(pts)
        raw = np.empty((m, m))
        for i in range(m):
            for j in range(m):
                raw[i, j] = composed_ball_green(se, d, pts[i], pts[j], radius=radius, rtol=rtol, constant=constant)
        entries = 0.5 * (raw + raw.T)
    cov = CovMatrix(points=pts, entries=entries)
    cov.check()
    return cov
