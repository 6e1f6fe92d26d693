"""Discrete fractional Gaussian field on a lattice domain.

The precision matrix is normalised so that ``Q^{-1}`` approximates the
continuum zero-exterior Green's function pointwise:

    Q(x, y) = -C delta^(2d) |x - y|^(-d-2s)                       (x != y)
    Q(x, x) =  C delta^(2d) sum_{z in delta Z^d, z != x} |x - z|^(-d-2s)

with the sum over every lattice site (interior and exterior) and the part
beyond the truncation radius closed in form. The same normalisation makes
``f^T Q f`` equal :func:`fgf.fracops.fractional_gradient_energy` and
``Q = delta^d A`` with ``A`` the truncated singular-integral operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DominanceError, DomainError, FactorizationError, GeometryError
from .fracops import lattice_kernel_sums, levy_constant
from .green import CovMatrix, fractional_ball_green
from .sampler import CHUNK, RunConfig, SampleEnsemble, cholesky_lower


@dataclass(frozen=True)
class LatticeDomain:
    """Sites ``delta (Z^d + offset)`` inside an open ball or box of half-width ``size``.

    ``truncation_radius`` defaults to the diameter, the smallest value for
    which every interaction leaving the domain is represented explicitly.
    """

    d: int
    delta: float
    kind: str = "ball"
    size: float = 1.0
    offset: float = 0.0
    truncation_radius: float | None = None
    interior_index: np.ndarray = field(init=False, repr=False)
    interior: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in ("ball", "box"):
            raise GeometryError(f"kind must be 'ball' or 'box', got {self.kind!r}")
        if self.delta <= 0 or self.size <= 0:
            raise ValueError("delta and size must be positive")
        diameter = 2 * self.size * (math.sqrt(self.d) if self.kind == "box" else 1.0)
        radius = diameter if self.truncation_radius is None else float(self.truncation_radius)
        if radius < diameter - 1e-12:
            raise GeometryError(f"truncation radius {radius} is below the diameter {diameter}")
        object.__setattr__(self, "truncation_radius", radius)
        kmax = int(math.ceil(self.size / self.delta)) + 1
        ks = np.arange(-kmax, kmax + 1)
        mesh = np.stack(np.meshgrid(*([ks] * self.d), indexing="ij"), axis=-1).reshape(-1, self.d)
        coords = (mesh + self.offset) * self.delta
        if self.kind == "ball":
            inside = np.sum(coords**2, axis=1) < self.size**2 * (1 - 1e-12)
        else:
            inside = np.all(np.abs(coords) < self.size * (1 - 1e-12), axis=1)
        if not np.any(inside):
            raise GeometryError("domain contains no lattice sites")
        object.__setattr__(self, "interior_index", mesh[inside])
        object.__setattr__(self, "interior", coords[inside])

    @property
    def n_sites(self) -> int:
        return len(self.interior)

    def site_of(self, point) -> int:
        """Index of the interior site closest to ``point`` (must be a lattice site)."""
        p = np.atleast_1d(np.asarray(point, float))
        dist = np.linalg.norm(self.interior - p, axis=1)
        i = int(np.argmin(dist))
        if dist[i] > 1e-9 * max(self.delta, 1.0):
            raise GeometryError(f"{point} is not an interior lattice site")
        return i

    def kernel_sums(self, s: float) -> tuple[float, float]:
        return lattice_kernel_sums(self.d, s, self.delta, self.truncation_radius)


@dataclass(frozen=True)
class PrecisionMatrix:
    entries: np.ndarray
    domain: LatticeDomain
    s: float
    dominance_margin: float
    tail_bound: float

    @property
    def points(self) -> np.ndarray:
        return self.domain.interior


def assemble_precision(dom: LatticeDomain, s: float) -> PrecisionMatrix:
    """Long-range precision matrix of the DFGF with zero exterior values.

    Raises :class:`DominanceError` when a row fails strict diagonal
    dominance (the certificate of positive definiteness).
    """
    if not 0 < s < 1:
        raise DomainError(f"DFGF needs 0 < s < 1, got {s}")
    c = levy_constant(dom.d, s)
    scale = c * dom.delta ** (2 * dom.d)
    inner, tail = dom.kernel_sums(s)
    pts = dom.interior
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    off = np.zeros_like(dist)
    nz = dist > 0
    off[nz] = dist[nz] ** (-dom.d - 2 * s)
    q = -scale * off
    np.fill_diagonal(q, scale * (inner + tail))
    margin = float(np.min(np.diag(q) - np.sum(np.abs(q), axis=1) + np.abs(np.diag(q))))
    if not margin > 0 or np.any(q[nz] >= 0):
        raise DominanceError(f"diagonal dominance fails (margin {margin:.3e}); enlarge the truncation radius")
    return PrecisionMatrix(q, dom, float(s), margin, float(scale * tail))


def _factor(q: PrecisionMatrix) -> np.ndarray:
    return cholesky_lower(q.entries)


def sample_dfgf(q: PrecisionMatrix, config: RunConfig) -> SampleEnsemble:
    """``config.ensemble_size`` exact draws: solve ``L^T h = z`` with ``Q = L L^T``."""
    low = _factor(q)
    m = low.shape[0]
    out = np.empty((config.ensemble_size, m))
    for chunk, start in enumerate(range(0, config.ensemble_size, CHUNK)):
        stop = min(start + CHUNK, config.ensemble_size)
        z = config.rng(chunk).standard_normal((m, stop - start))
        out[start:stop] = linalg.solve_triangular(low, z, lower=True, trans="T").T
    return SampleEnsemble(out, q.domain.delta, None, config, q.points)


def dfgf_green(q: PrecisionMatrix) -> CovMatrix:
    """The discrete Green's function ``Q^{-1}`` via the Cholesky factor."""
    low = _factor(q)
    inv = linalg.cho_solve((low, True), np.eye(low.shape[0]))
    inv = 0.5 * (inv + inv.T)
    return CovMatrix(points=q.points, entries=inv)


# -- random-walk representation ---------------------------------------------


@dataclass(frozen=True)
class WalkEstimate:
    """Occupation estimate of one row of ``Q^{-1}`` with per-site standard errors."""

    mean: np.ndarray
    stderr: np.ndarray
    n_walks: int
    censored: int
    mean_steps: float


def _step_law(d: int, s: float, kmax: int):
    ks = np.arange(-kmax, kmax + 1)
    mesh = np.stack(np.meshgrid(*([ks] * d), indexing="ij"), axis=-1).reshape(-1, d)
    r = np.linalg.norm(mesh, axis=1)
    keep = (r > 0) & (r <= kmax + 1e-9)
    offsets = mesh[keep]
    weights = r[keep] ** (-d - 2 * s)
    return offsets, weights


def walk_green_estimator(
    dom: LatticeDomain, s: float, x, n_walks: int, config: RunConfig, max_steps: int = 10**6
) -> WalkEstimate:
    """Estimate ``Q^{-1}(x, .)`` from the long-range walk killed on leaving the domain.

    The jump chain moves by ``z`` with probability proportional to
    ``|z|^(-d-2s)``; a jump beyond the truncation radius always leaves the
    domain. Holding times are replaced by their conditional mean
    ``1 / lambda``, so each visit to ``y`` contributes ``1 / Q(y, y)``.
    """
    if not 0 < s < 1:
        raise DomainError(f"walk needs 0 < s < 1, got {s}")
    start = dom.site_of(x)
    kmax = int(math.floor(dom.truncation_radius / dom.delta + 1e-9))
    offsets, weights = _step_law(dom.d, s, kmax)
    inner, tail = dom.kernel_sums(s)
    # lattice-unit sums: weights.sum() equals inner * delta^(d+2s)
    unit = dom.delta ** (dom.d + 2 * s)
    p_tail = tail * unit / (weights.sum() + tail * unit)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]

    idx = dom.interior_index
    lo = idx.min(axis=0)
    shape = idx.max(axis=0) - lo + 1
    lookup = np.full(tuple(shape), -1, dtype=np.int64)
    lookup[tuple((idx - lo).T)] = np.arange(dom.n_sites)
    c = levy_constant(dom.d, s)
    qdiag = c * dom.delta ** (2 * dom.d) * (inner + tail)

    visits = np.zeros((n_walks, dom.n_sites))
    censored = 0
    total_steps = 0
    for chunk, first in enumerate(range(0, n_walks, CHUNK)):
        last = min(first + CHUNK, n_walks)
        rng = config.rng(chunk)
        walkers = np.arange(first, last)
        pos = np.tile(idx[start], (last - first, 1))
        site = np.full(last - first, start)
        for _ in range(max_steps):
            np.add.at(visits, (walkers, site), 1.0)
            total_steps += len(walkers)
            u = rng.random(len(walkers))
            escaped = u < p_tail
            k = np.searchsorted(cdf, rng.random(len(walkers)), side="right")
            pos = pos + offsets[np.minimum(k, len(offsets) - 1)]
            rel = pos - lo
            inside = np.all((rel >= 0) & (rel < shape), axis=1) & ~escaped
            site = np.full(len(walkers), -1)
            site[inside] = lookup[tuple(rel[inside].T)]
            alive = site >= 0
            walkers, pos, site = walkers[alive], pos[alive], site[alive]
            if len(walkers) == 0:
                break
        censored += len(walkers)
    occ = visits / qdiag
    return WalkEstimate(
        mean=occ.mean(axis=0),
        stderr=occ.std(axis=0, ddof=1) / math.sqrt(n_walks),
        n_walks=n_walks,
        censored=censored,
        mean_steps=total_steps / n_walks,
    )


# -- continuum comparison ---------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    delta: float
    discrete: np.ndarray
    continuum: np.ndarray
    relative_error: float


def convergence_report(
    s: float, deltas, pairs, d: int = 1, radius: float = 1.0
) -> list[ConvergenceRow]:
    """Compare ``Q^{-1}`` with the continuum ball Green's function at probe pairs.

    ``pairs`` are pairs of points that must be lattice sites for every
    spacing in ``deltas``. The reported error is the maximum relative error
    over the pairs.
    """
    rows = []
    for delta in deltas:
        dom = LatticeDomain(d, delta, "ball", radius)
        green = dfgf_green(assemble_precision(dom, s)).entries
        disc, cont = [], []
        for a, b in pairs:
            disc.append(green[dom.site_of(a), dom.site_of(b)])
            cont.append(fractional_ball_green(s, d, a, b, radius=radius))
        disc, cont = np.array(disc), np.array(cont)
        err = float(np.max(np.abs(disc - cont) / np.abs(cont)))
        rows.append(ConvergenceRow(float(delta), disc, cont, err))
    return rows


def dirichlet_laplacian(dom: LatticeDomain) -> np.ndarray:
    """Nearest-neighbour ``-Delta`` on the interior sites with zero exterior values."""
    idx = dom.interior_index
    lookup = {tuple(k): i for i, k in enumerate(idx)}
    m = dom.n_sites
    lap = np.zeros((m, m))
    np.fill_diagonal(lap, 2 * dom.d / dom.delta**2)
    for i, k in enumerate(idx):
        for axis in range(dom.d):
            for step in (-1, 1):
                nb = k.copy()
                nb[axis] += step
                j = lookup.get(tuple(nb))
                if j is not None:
                    lap[i, j] = -1 / dom.delta**2
    return lap


def discrete_composed_green(dom: LatticeDomain, s: float) -> np.ndarray:
    """Lattice analogue of ``int G^{floor s}(x,u) G^{s - floor s}(u,y) du`` for 1 < s < 2.

    ``L^{-1} Q_f^{-1}`` with ``L`` the Dirichlet Laplacian and ``Q_f`` the
    DFGF precision of order ``s - 1``; the ``delta^d`` factors cancel.
    """
    if not 1 < s < 2:
        raise DomainError(f"needs 1 < s < 2, got {s}")
    lap = dirichlet_laplacian(dom)
    gf = dfgf_green(assemble_precision(dom, s - 1)).entries
    return np.linalg.solve(lap, gf)
