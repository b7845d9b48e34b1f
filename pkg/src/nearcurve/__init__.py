"""Shifted rational points near planar curves: exact counts and bound checks."""

__version__ = "0.1.0"

from .counting import (CountedPoint, CountQuery, Shift, count_fast, count_naive, dist_to_nearest_int,
                       enumerate_points)
from .curve import MonotonePiece, PlanarCurve, curvature_bounds, make_curve, monotone_pieces
from .exceptions import (BadPointError, BudgetExceededError, CalibrationFailedError,
                         DegenerateCurvatureError, DomainError, FalsificationError, NearCurveError,
                         SpecError, SurrogateViolation, WitnessConstructionError)
from .estimators import ScalingLawRegressor
from .psi import ApproxFunction, dimension_formula, lower_order, parse_psi, series_classify

__all__ = [
    "CountedPoint", "CountQuery", "Shift", "count_fast", "count_naive", "dist_to_nearest_int",
    "enumerate_points", "MonotonePiece", "PlanarCurve", "curvature_bounds", "make_curve",
    "monotone_pieces", "ApproxFunction", "dimension_formula", "lower_order", "parse_psi",
    "series_classify", "ScalingLawRegressor", "NearCurveError", "DomainError", "SpecError", "DegenerateCurvatureError",
    "BudgetExceededError", "BadPointError", "FalsificationError", "WitnessConstructionError",
    "CalibrationFailedError", "SurrogateViolation",
]
