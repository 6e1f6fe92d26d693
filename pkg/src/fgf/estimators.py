"""scikit-learn style wrappers around the spectral operator and the Hurst diagnostic."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fracops import Boundary, FieldGrid, spectral_fractional_laplacian
from .sampler import SampleEnsemble, structure_function


class FractionalLaplacianTransformer(TransformerMixin, BaseEstimator):
    """Apply the torus ``(-Delta)^s`` row by row.

    Each row of ``X`` is a periodic field flattened in C order; ``grid_shape``
    gives its lattice shape (default: one-dimensional). The transform is
    stateless apart from the recorded input width; ``inverse_transform``
    applies the exponent ``-s`` and so recovers the mean-zero part of a row.
    """

    def __init__(self, s: float = 0.5, spacing: float = 1.0, grid_shape: tuple[int, ...] | None = None):
        self.s = s
        self.spacing = spacing
        self.grid_shape = grid_shape

    def fit(self, X, y=None):
        X = check_array(X)
        shape = self._shape(X.shape[1])
        if int(np.prod(shape)) != X.shape[1]:
            raise ValueError(f"grid_shape {shape} does not match {X.shape[1]} features")
        self.n_features_in_ = X.shape[1]
        self.shape_ = shape
        return self

    def _shape(self, width: int) -> tuple[int, ...]:
        return (width,) if self.grid_shape is None else tuple(self.grid_shape)

    def _apply(self, X, exponent: float) -> np.ndarray:
        check_is_fitted(self, "shape_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        out = np.empty_like(X, dtype=float)
        for i, row in enumerate(X):
            grid = FieldGrid(row.reshape(self.shape_), self.spacing, Boundary.TORUS)
            out[i] = spectral_fractional_laplacian(grid, exponent).values.ravel()
        return out

    def transform(self, X):
        return self._apply(X, self.s)

    def inverse_transform(self, X):
        return self._apply(X, -self.s)


class HurstEstimator(BaseEstimator):
    """Estimate H from the structure function of line samples.

    ``fit(X)`` treats each row of ``X`` as one draw of the field at equally
    spaced points and regresses ``log E|h(x+r) - h(x)|^2`` on ``log r``; the
    slope is ``2H``.
    """

    def __init__(self, lags=(1, 2, 3, 4, 5, 6, 7, 8), spacing: float = 1.0, min_pairs: int = 100):
        self.lags = lags
        self.spacing = spacing
        self.min_pairs = min_pairs

    def fit(self, X, y=None):
        X = check_array(X)
        lags = self.spacing * np.asarray(self.lags, float)
        ens = SampleEnsemble(X, self.spacing)
        self.structure_ = structure_function(ens, lags, self.min_pairs)
        self.hurst_ = self.structure_.hurst
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, lags) -> np.ndarray:
        """Fitted power law ``c r^(2H)`` at the given lags."""
        check_is_fitted(self, "hurst_")
        sf = self.structure_
        logc = np.mean(np.log(sf.values) - sf.slope * np.log(sf.lags))
        return np.exp(logc) * np.asarray(lags, float) ** sf.slope
