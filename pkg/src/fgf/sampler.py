"""FGF samplers: spectral torus sampler, exact Gram samplers, eigen-series and diagnostics.

Randomness comes from numpy's PCG64 with ``SeedSequence(seed,
spawn_key=(index,))``: every sample index (or chunk of draws) has its own
substream, so ensembles can be generated in any order or in parallel and
still be bit-identical.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, stats

from .errors import DomainError, FactorizationError, InsufficientData, TailError
from .fracops import Boundary, FieldGrid, fourier_multiplier
from .green import ball_covariance_matrix
from .kernels import _as_points, fbm_gram
from .params import FieldSpec

CHUNK = 4096


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a stochastic output.

    ``n`` points per axis on a box of side ``box_length`` in ``d`` dimensions
    (spacing ``box_length / n``). ``tolerances`` holds named numerical
    tolerances recorded in run manifests.
    """

    seed: int
    n: int = 64
    d: int = 1
    box_length: float = 1.0
    ensemble_size: int = 1
    truncation_radius: float | None = None
    tolerances: dict = field(default_factory=lambda: {"rtol": 1e-10})

    def __post_init__(self) -> None:
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.n < 2 or self.d < 1 or self.ensemble_size < 1:
            raise ValueError("need n >= 2, d >= 1 and ensemble_size >= 1")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def rng(self, index: int = 0) -> np.random.Generator:
        """Generator for substream ``index``."""
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(self.seed), spawn_key=(index,))))

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "n": self.n,
            "d": self.d,
            "box_length": self.box_length,
            "ensemble_size": self.ensemble_size,
            "truncation_radius": self.truncation_radius,
            "tolerances": dict(self.tolerances),
        }


@dataclass(frozen=True)
class SampleEnsemble:
    """Draws sharing one law. ``samples`` has shape ``(n_draws, *site_shape)``.

    ``spacing`` is the distance between neighbouring sites along the first
    site axis; structure functions measure lags along that axis.
    """

    samples: np.ndarray
    spacing: float
    spec: FieldSpec | None = None
    config: RunConfig | None = None
    points: np.ndarray | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n_draws(self) -> int:
        return self.samples.shape[0]

    def covariance(self) -> np.ndarray:
        flat = self.samples.reshape(self.n_draws, -1)
        return np.cov(flat, rowvar=False)


# -- white noise and spectral sampler -----------------------------------------


def sample_white_noise(config: RunConfig, index: int = 0) -> FieldGrid:
    """i.i.d. Normal(0, delta^-d) lattice values, so ``sum W phi delta^d`` has variance ``~ ||phi||^2``."""
    scale = config.spacing ** (-config.d / 2)
    values = scale * config.rng(index).standard_normal(config.shape)
    return FieldGrid(values, config.spacing, Boundary.TORUS)


def _filter(noise: FieldGrid, s: float) -> FieldGrid:
    spectrum = np.fft.rfftn(noise.values)
    spectrum *= fourier_multiplier(noise.values.shape, noise.spacing, -s)
    return noise.with_values(np.fft.irfftn(spectrum, s=noise.values.shape, axes=tuple(range(noise.d))))


def sample_fgf_spectral(config: RunConfig, s: float, index: int = 0) -> FieldGrid:
    """``h = (-Delta)^(-s/2) W`` on the torus, zero mode removed.

    This is a periodic approximation: wavelengths comparable to the box
    differ from the whole-space field, which is only defined modulo
    constants (or polynomials) anyway.
    """
    return _filter(sample_white_noise(config, index), s)


def sample_coupled_family(config: RunConfig, s_list, index: int = 0) -> dict[float, FieldGrid]:
    """One white-noise draw pushed through the spectral filter for every s."""
    s_list = list(s_list)
    if not s_list:
        raise ValueError("s_list must be nonempty")
    noise = sample_white_noise(config, index)
    return {s: _filter(noise, s) for s in s_list}


def spectral_pairing_variance(phi: np.ndarray, spacing: float, s: float) -> float:
    """Exact ``Var (h, phi)`` for the spectral sampler, ``(h, phi) = sum h phi delta^d``.

    Equals ``delta^d / N sum_{k != 0} |xi_k|^(-2s) |Phi_k|^2`` with ``Phi`` the
    unnormalized DFT of the samples of phi.
    """
    phi = np.asarray(phi, float)
    spectrum = np.fft.rfftn(phi)
    mult = fourier_multiplier(phi.shape, spacing, -2 * s)
    # rfft keeps half the spectrum: double every column except the self-conjugate ones
    weight = np.full(spectrum.shape[-1], 2.0)
    weight[0] = 1.0
    if phi.shape[-1] % 2 == 0:
        weight[-1] = 1.0
    total = np.sum(weight * mult * np.abs(spectrum) ** 2)
    return float(spacing**phi.ndim * total / phi.size)


def pair(field: FieldGrid | np.ndarray, phi: np.ndarray, spacing: float | None = None) -> np.ndarray:
    """Lattice pairing ``sum h phi delta^d`` (works on stacked draws too)."""
    if isinstance(field, FieldGrid):
        values, spacing = field.values, field.spacing
    else:
        values = np.asarray(field, float)
    phi = np.asarray(phi, float)
    axes = tuple(range(values.ndim - phi.ndim, values.ndim))
    return np.tensordot(values, phi, axes=(axes, tuple(range(phi.ndim)))) * spacing**phi.ndim


# -- exact Gram samplers ------------------------------------------------------


class ExactMode(enum.Enum):
    PINNED_AT_ZERO = "PinnedAtZero"
    ZERO_BOUNDARY_BALL = "ZeroBoundaryBall"


def _gaussian_draws(factor: np.ndarray, config: RunConfig) -> np.ndarray:
    m = factor.shape[0]
    out = np.empty((config.ensemble_size, m))
    for chunk, start in enumerate(range(0, config.ensemble_size, CHUNK)):
        stop = min(start + CHUNK, config.ensemble_size)
        z = config.rng(chunk).standard_normal((stop - start, m))
        out[start:stop] = z @ factor.T
    return out


def cholesky_lower(matrix: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError(f"Cholesky failed: {exc}") from exc


def sample_fgf_exact(
    spec: FieldSpec, points, mode: ExactMode | str, config: RunConfig, *, cell: float | None = None
) -> SampleEnsemble:
    """Exact finite-dimensional draws at ``points`` (``config.ensemble_size`` of them).

    ``PinnedAtZero`` uses the pinned (fBm) covariance and needs 0 < H < 1;
    points at the origin are returned as exact zeros. ``ZeroBoundaryBall``
    uses the unit-ball Green's function; ``cell`` switches to cell averages
    in d = 1 when the kernel is infinite on the diagonal.
    """
    mode = ExactMode(mode)
    pts = _as_points(points, spec.d)
    m = len(pts)
    values = np.zeros((config.ensemble_size, m))
    if mode is ExactMode.PINNED_AT_ZERO:
        if not 0 < spec.H < 1:
            raise DomainError(f"PinnedAtZero needs 0 < H < 1, got H={spec.H}")
        live = np.linalg.norm(pts, axis=1) > 0
        gram = fbm_gram(spec, pts[live])
        values[:, live] = _gaussian_draws(cholesky_lower(gram), config)
    else:
        if spec.s <= 0:
            raise DomainError("ZeroBoundaryBall needs s > 0")
        cov = ball_covariance_matrix(spec.s_exact, spec.d, pts, cell=cell).factorize()
        values[:] = _gaussian_draws(cov.factor, config)
    spacing = float(np.linalg.norm(pts[1] - pts[0])) if m > 1 else 1.0
    return SampleEnsemble(values, spacing, spec, config, pts)


# -- eigenfunction series -----------------------------------------------------


@dataclass(frozen=True)
class SeriesSample:
    values: np.ndarray
    tail_bound: float
    n_terms: int


def _box_modes(d: int, n_modes: int) -> np.ndarray:
    """Integer vectors k in N^d with |k| <= n_modes."""
    axes = [np.arange(1, n_modes + 1)] * d
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return mesh[np.sum(mesh**2, axis=1) <= n_modes**2]


def _box_eigenfunctions(modes: np.ndarray, pts: np.ndarray) -> np.ndarray:
    # normalized Dirichlet eigenfunctions of (0, pi)^d
    d = modes.shape[1]
    out = np.full((len(modes), len(pts)), (2 / math.pi) ** (d / 2))
    for i in range(d):
        out *= np.sin(np.outer(modes[:, i], pts[:, i]))
    return out


def efgf_tail_bound(s: float, d: int, n_modes: int) -> float:
    """Bound on ``sum_{|k| > N} lambda_k^(-s) sup f_k^2`` for the box eigenbasis."""
    if s <= d / 2:
        raise TailError(f"pointwise eigen-series diverges for s <= d/2 (s={s}, d={d})")
    if d == 1:
        return (2 / math.pi) * n_modes ** (1 - 2 * s) / (2 * s - 1)
    # each lattice point beyond N owns a unit cube beyond N - sqrt(d)
    r0 = max(n_modes - math.sqrt(d), 1.0)
    area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    return (2 / math.pi) ** d * 2.0**-d * area * r0 ** (d - 2 * s) / (2 * s - d)


def efgf_covariance(s: float, d: int, n_modes: int, x, y) -> np.ndarray:
    """Truncated eigen-series covariance ``sum lambda^-s f(x) f(y)`` on (0, pi)^d."""
    modes = _box_modes(d, n_modes)
    lam = np.sum(modes**2, axis=1).astype(float)
    fx = _box_eigenfunctions(modes, _as_points(x, d))
    fy = _box_eigenfunctions(modes, _as_points(y, d))
    return (fx * lam[:, None] ** (-s)).T @ fy


def sample_efgf(s: float, d: int, n_modes: int, eval_points, config: RunConfig) -> SeriesSample:
    """Eigenfunction FGF on (0, pi)^d: ``sum Z_k lambda_k^(-s/2) f_k(x)`` over ``|k| <= n_modes``."""
    tail = efgf_tail_bound(s, d, n_modes)
    pts = _as_points(eval_points, d)
    modes = _box_modes(d, n_modes)
    lam = np.sum(modes**2, axis=1).astype(float)
    basis = _box_eigenfunctions(modes, pts) * lam[:, None] ** (-s / 2)
    out = np.empty((config.ensemble_size, len(pts)))
    for chunk, start in enumerate(range(0, config.ensemble_size, CHUNK)):
        stop = min(start + CHUNK, config.ensemble_size)
        out[start:stop] = config.rng(chunk).standard_normal((stop - start, len(modes))) @ basis
    return SeriesSample(out, tail, len(modes))


# -- diagnostics --------------------------------------------------------------


@dataclass(frozen=True)
class StructureFunction:
    lags: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    slope: float

    @property
    def hurst(self) -> float:
        return 0.5 * self.slope


def structure_function(ensemble: SampleEnsemble, lags, min_pairs: int = 100) -> StructureFunction:
    """Mean ``|h(x + r) - h(x)|^2`` per lag and the log-log least-squares slope (2H).

    Lags are rounded to whole multiples of the ensemble spacing along the
    first site axis.
    """
    data = ensemble.samples
    n_sites = data.shape[1]
    lags = np.asarray(lags, float)
    steps = np.rint(lags / ensemble.spacing).astype(int)
    if np.any(steps < 1) or np.any(np.abs(steps * ensemble.spacing - lags) > 1e-9 * np.maximum(lags, 1)):
        raise ValueError("lags must be positive multiples of the spacing")
    values = np.empty(len(steps))
    counts = np.empty(len(steps), dtype=int)
    for i, k in enumerate(steps):
        diff = data[:, k:] - data[:, : n_sites - k]
        counts[i] = diff.size
        if counts[i] < min_pairs:
            raise InsufficientData(f"lag {lags[i]} has only {counts[i]} pairs (< {min_pairs})")
        values[i] = float(np.mean(diff**2))
    if np.all(values > 0) and len(lags) > 1:
        slope = float(np.polyfit(np.log(lags), np.log(values), 1)[0])
    else:
        slope = math.nan
    return StructureFunction(lags, values, counts, slope)


def gaussianity_statistics(values) -> tuple[float, float]:
    """Sample skewness and excess kurtosis."""
    v = np.asarray(values, float).ravel()
    return float(stats.skew(v)), float(stats.kurtosis(v))


def with_config(config: RunConfig, **changes) -> RunConfig:
    return replace(config, **changes)
