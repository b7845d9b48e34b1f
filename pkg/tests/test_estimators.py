import numpy as np
import pytest
from sklearn.base import clone

from nearcurve import DomainError, ScalingLawRegressor


def _grid():
    Q, d = np.meshgrid(2.0 ** np.arange(6, 12), 2.0 ** -np.arange(1, 5))
    return np.column_stack([Q.ravel(), d.ravel()])


def test_exact_power_law():
    X = _grid()
    y = 3 * X[:, 1] * X[:, 0] ** 2
    est = ScalingLawRegressor().fit(X, y)
    assert est.coef_ == pytest.approx([2, 1], abs=1e-12)
    assert np.exp(est.intercept_) == pytest.approx(3)
    assert est.predict(X) == pytest.approx(y)
    assert est.score(X, y) == pytest.approx(1.0)


def test_params_and_clone():
    est = ScalingLawRegressor(min_cells=4, min_count=1)
    assert clone(est).get_params() == {"min_cells": 4, "min_count": 1}


def test_too_few_cells():
    X = _grid()[:5]
    with pytest.raises(DomainError):
        ScalingLawRegressor().fit(X, np.full(5, 1000.0))
    with pytest.raises(ValueError):
        ScalingLawRegressor().fit(X[:, :1], np.ones(5))
