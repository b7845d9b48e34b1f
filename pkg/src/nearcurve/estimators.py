"""Estimator wrapper around the log-log scaling fit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .kernel_bounds import MIN_FIT_CELLS, MIN_FIT_COUNT, fit_exponents


class ScalingLawRegressor(RegressorMixin, BaseEstimator):
    """Fit N ~ C * Q^alpha_Q * delta^alpha_delta.

    X has two columns (Q, delta); y holds the counts. Cells with fewer than
    ``min_count`` points are dropped before fitting, as in :func:`fit_exponents`.
    """

    def __init__(self, min_cells=MIN_FIT_CELLS, min_count=MIN_FIT_COUNT):
        self.min_cells = min_cells
        self.min_count = min_count

    def fit(self, X, y, sample_mask=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2 or len(X) != len(y):
            raise ValueError("X must have shape (n, 2) matching y")
        aQ, ad = fit_exponents(X[:, 0], X[:, 1], y, sample_mask, self.min_cells, self.min_count)
        keep = y >= self.min_count
        if sample_mask is not None:
            keep &= np.asarray(sample_mask, dtype=bool)
        # with a constant column the lstsq intercept is the mean residual
        resid = np.log(y[keep]) - aQ * np.log(X[keep, 0]) - ad * np.log(X[keep, 1])
        self.coef_ = np.array([aQ, ad])
        self.intercept_ = float(resid.mean())
        self.n_cells_ = int(keep.sum())
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=float)
        return np.exp(np.log(X) @ self.coef_ + self.intercept_)

    @property
    def alpha_Q(self):
        return float(self.coef_[0])

    @property
    def alpha_delta(self):
        return float(self.coef_[1])
