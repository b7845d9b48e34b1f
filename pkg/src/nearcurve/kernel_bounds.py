"""Fejer-kernel majorant and empirical checks of the counting bounds.

The upper and lower bounds are O-statements with unspecified constants.
What we can falsify is boundedness: ratios N/bound must stay below a fixed
ceiling and must not drift upward as Q grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .counting import (CountQuery, Shift, _check_candidate_budget, _chunks_by_work, _denominators,
                       _expand, _naive_candidates, count_fast, residual_u)
from .curve import PlanarCurve
from .exceptions import DegenerateCurvatureError, DomainError, SurrogateViolation

UPPER_CEILING = 10.0
DRIFT_FACTOR = 1.5
LOWER_FLOOR = 0.5
MIN_FIT_CELLS = 16
MIN_FIT_COUNT = 100


def fejer_order(delta: float) -> int:
    """Kernel order M = floor(1/(2 delta))."""
    if not 0 < delta <= 0.5:
        raise DomainError(f"delta must lie in (0, 1/2], got {delta}")
    return int(math.floor(1.0 / (2.0 * delta)))


def fejer_eval(M: int, x):
    """(sin(pi M x) / (M sin(pi x)))^2, equal to 1 at integers."""
    if M < 1:
        raise DomainError(f"kernel order must be >= 1, got {M}")
    x = np.asarray(x, dtype=float)
    r = x - np.rint(x)  # the kernel has period 1
    s = np.sin(np.pi * r)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = (np.sin(np.pi * M * r) / (M * s)) ** 2
    k = np.where(s == 0, 1.0, k)
    k = np.clip(k, 0.0, 1.0)
    return float(k) if k.ndim == 0 else k


def smoothed_count(query: CountQuery) -> float:
    """Sum of K_M(q f((p1+theta1)/q) - theta2) over all candidate pairs.

    (pi/2) times this majorises N_theta(Q, delta).
    """
    _check_candidate_budget(query)
    M = fejer_order(query.delta)
    qs = _denominators(query)
    theta, start, counts = _naive_candidates(query, qs)
    total = 0.0
    for sl in _chunks_by_work(qs, counts):
        owner, p = _expand(start[sl], counts[sl])
        if len(p):
            total += math.fsum(fejer_eval(M, residual_u(query.curve, qs[sl][owner], p, theta)))
    return total


# -- bound formulas ------------------------------------------------------------

def upper_bound(Q, delta):
    return delta * Q * Q + Q / math.sqrt(delta)


def upper_bound_lip(Q, delta, phi, eps):
    first = delta * Q * Q + delta**-0.5 * Q ** (0.5 + eps)
    if phi == 1:
        return first + Q * math.log(Q / delta)
    return first + delta ** ((phi - 1) / 2.0) * Q ** ((3.0 - phi) / 2.0)


def lower_bound(Q, delta):
    return delta * Q * Q


@dataclass
class BoundReport:
    kind: str
    curve: str
    shift: tuple
    grid: list
    counts: list
    bounds: list
    ratios: list
    admissible: list
    sup_ratio: float
    inf_ratio: float
    checks: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def rows(self):
        for (Q, d), n, b, r, a in zip(self.grid, self.counts, self.bounds, self.ratios, self.admissible):
            yield {"Q": Q, "delta": d, "N": n, "bound": b, "ratio": r, "admissible": a}

    def raise_if_failed(self):
        bad = [k for k, ok in self.checks.items() if not ok]
        if bad:
            raise SurrogateViolation(f"{self.kind} check failed for {self.curve}: {', '.join(bad)}")
        return self


def _grid(grid):
    cells = [(float(Q), float(d)) for Q, d in grid]
    if not cells:
        raise DomainError("empty grid")
    return cells


def make_grid(Qs, deltas):
    return [(Q, d) for Q in Qs for d in deltas]


def _counts(curve, shift, cells, J=None, counts=None, threads=1):
    if counts is not None:
        if len(counts) != len(cells):
            raise DomainError("counts and grid differ in length")
        return [int(n) for n in counts]
    return [count_fast(CountQuery(curve, shift, Q, d, J), threads=threads) for Q, d in cells]


def _refuse_degenerate(curve, force):
    if curve.degenerate and not force:
        raise DegenerateCurvatureError(
            f"{curve.spec} has vanishing curvature; the bound does not apply "
            "(pass force=True to run it as a negative control)")


def _half_sups(cells, ratios):
    Qs = sorted({Q for Q, _ in cells})
    k = max(len(Qs) // 2, 1)
    small, large = set(Qs[:k]), set(Qs[-k:])
    lo = max((r for (Q, _), r in zip(cells, ratios) if Q in small), default=0.0)
    hi = max((r for (Q, _), r in zip(cells, ratios) if Q in large), default=0.0)
    return lo, hi


def _upper_report(kind, curve, shift, cells, counts, bounds, params):
    ratios = [n / b for n, b in zip(counts, bounds)]
    lo, hi = _half_sups(cells, ratios)
    checks = {
        "sup_ratio<=%g" % UPPER_CEILING: max(ratios) <= UPPER_CEILING,
        "large_Q_drift<=%g" % DRIFT_FACTOR: hi <= DRIFT_FACTOR * lo or hi == 0.0,
    }
    params = dict(params, sup_small_Q=lo, sup_large_Q=hi)
    return BoundReport(kind, curve.spec, shift.as_tuple(), cells, counts, bounds, ratios,
                       [True] * len(cells), max(ratios), min(ratios), checks, params)


def verify_upper(curve: PlanarCurve, shift: Shift, grid: Sequence, *, J=None, counts=None,
                 force=False, threads=1) -> BoundReport:
    """Ratios N / (delta Q^2 + delta^-1/2 Q) over the grid."""
    _refuse_degenerate(curve, force)
    cells = _grid(grid)
    counts = _counts(curve, shift, cells, J, counts, threads)
    bounds = [upper_bound(Q, d) for Q, d in cells]
    return _upper_report("upper", curve, shift, cells, counts, bounds, {"forced": bool(force)})


def verify_upper_lip(curve: PlanarCurve, shift: Shift, grid: Sequence, phi: Optional[float] = None,
                     epsilon: float = 0.05, *, J=None, counts=None, force=False, threads=1) -> BoundReport:
    """Same check against the three-term bound for f'' in Lip_phi."""
    _refuse_degenerate(curve, force)
    phi = curve.lip_exponent if phi is None else phi
    if phi is None or not 0 < phi <= 1:
        raise DomainError(f"Lipschitz exponent must lie in (0, 1], got {phi}")
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    cells = _grid(grid)
    counts = _counts(curve, shift, cells, J, counts, threads)
    bounds = [upper_bound_lip(Q, d, phi, epsilon) for Q, d in cells]
    return _upper_report("upper_lip", curve, shift, cells, counts, bounds,
                         {"phi": phi, "epsilon": epsilon, "forced": bool(force)})


def admissible_mask(cells, k1, k2, Q0=0.0):
    return [bool(k1 / Q <= d <= k2 and Q > Q0) for Q, d in cells]


def verify_lower(curve: PlanarCurve, shift: Shift, grid: Sequence, k1: float, k2: float,
                 Q0: float = 0.0, *, J=None, counts=None, threads=1) -> BoundReport:
    """inf of N/(delta Q^2) over cells with k1/Q <= delta <= k2 and Q > Q0."""
    _refuse_degenerate(curve, False)
    cells = _grid(grid)
    mask = admissible_mask(cells, k1, k2, Q0)
    if not any(mask):
        raise DomainError(f"no admissible cells for k1={k1}, k2={k2}, Q0={Q0}")
    # inadmissible cells are not counted at all
    if counts is None:
        counts = [count_fast(CountQuery(curve, shift, Q, d, J), threads=threads) if m else -1
                  for (Q, d), m in zip(cells, mask)]
    counts = [int(n) for n in counts]
    bounds = [lower_bound(Q, d) for Q, d in cells]
    ratios = [n / b if m else float("nan") for n, b, m in zip(counts, bounds, mask)]
    inf = min(r for r, m in zip(ratios, mask) if m)
    sup = max(r for r, m in zip(ratios, mask) if m)
    checks = {"inf_ratio>=%g" % LOWER_FLOOR: inf >= LOWER_FLOOR}
    return BoundReport("lower", curve.spec, shift.as_tuple(), cells, counts, bounds, ratios, mask,
                       sup, inf, checks, {"k1": k1, "k2": k2, "Q0": Q0})


def fit_exponents(Qs, deltas, counts, mask=None, min_cells=MIN_FIT_CELLS, min_count=MIN_FIT_COUNT):
    """Least-squares (alpha_Q, alpha_delta) in log N = aQ log Q + ad log delta + c."""
    Qs, deltas, counts = (np.asarray(a, dtype=float) for a in (Qs, deltas, counts))
    keep = counts >= min_count
    if mask is not None:
        keep &= np.asarray(mask, dtype=bool)
    if keep.sum() < min_cells:
        raise DomainError(f"need {min_cells} cells with N >= {min_count}, have {int(keep.sum())}")
    X = np.column_stack([np.log(Qs[keep]), np.log(deltas[keep]), np.ones(int(keep.sum()))])
    if np.linalg.matrix_rank(X) < 3:
        raise DomainError("degenerate grid: Q and delta do not vary independently")
    coef, *_ = np.linalg.lstsq(X, np.log(counts[keep]), rcond=None)
    return float(coef[0]), float(coef[1])


def fit_report(report: BoundReport, **kw):
    """Exponents from the admissible cells of an existing report."""
    Qs = [Q for Q, _ in report.grid]
    ds = [d for _, d in report.grid]
    return fit_exponents(Qs, ds, report.counts, report.admissible, **kw)
