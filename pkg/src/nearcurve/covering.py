"""Covering J by small balls around counted points, and the constants that make it work.

For each (Q, delta) the balls B((p1 + theta1)/q, C1/(Q^2 delta)) over all
counted points are clipped to J and merged; the covering statement asks
for at least half of J. :func:`calibrate` searches for constants
(k1, k2, C1, Q0) under which that holds on a grid for a set of shifts.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .counting import CountQuery, Shift, enumerate_arrays, point_x
from .curve import PlanarCurve
from .dual_lattice import proof_C1
from .exceptions import CalibrationFailedError, DegenerateCurvatureError, DomainError, FalsificationError

CANONICAL_SHIFTS = (
    (0.0, 0.0),
    (0.41421356, 0.57735027),
    (0.5, 0.25),
    (1.0, 0.0),
    (3.0, -2.0),
    (1 / 3, 2 / 3),
    (0.7071067811865476, 0.1),
    (math.pi - 3, math.e - 2),
    (0.25, 0.5),
    (0.9, 0.05),
)
C1_LATTICE = tuple(2.0**k for k in range(-6, 9))
K1_LATTICE = tuple(2.0**k for k in range(0, 9))
K2_LATTICE = (0.5, 0.25, 0.125)
WITNESS_C0 = 0.16


def merge_intervals(starts, ends):
    """Sort-and-sweep union; returns disjoint (starts, ends) in order."""
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    if len(starts) == 0:
        return starts, ends
    order = np.argsort(starts, kind="stable")
    s, e = starts[order], ends[order]
    reach = np.maximum.accumulate(e)
    # a new block starts where the interval begins past everything before it
    new = np.empty(len(s), dtype=bool)
    new[0] = True
    new[1:] = s[1:] > reach[:-1]
    idx = np.flatnonzero(new)
    block_end = np.append(idx[1:] - 1, len(s) - 1)
    return s[idx], reach[block_end]


def union_length(starts, ends):
    s, e = merge_intervals(starts, ends)
    return float(np.sum(e - s))


def _covered(xs, r, lo, hi):
    """Length of the union of [x - r, x + r] clipped to [lo, hi]."""
    if len(xs) == 0:
        return 0.0
    return union_length(np.clip(xs - r, lo, hi), np.clip(xs + r, lo, hi))


@dataclass
class CoverReport:
    Q: float
    delta: float
    J: tuple
    C1: float
    shift: tuple
    n_points: int
    merged: list
    measure: float
    ratio: float
    checks: dict = field(default_factory=dict)

    @property
    def radius(self):
        return self.C1 / (self.Q * self.Q * self.delta)


def _points_x(curve, shift, Q, delta, J, threads=1):
    q, p, _ = enumerate_arrays(CountQuery(curve, shift, Q, delta, J), threads=threads)
    return np.sort(point_x(q, p, shift))


def union_measure(curve: PlanarCurve, shift: Shift, Q: float, delta: float, J, C1: float,
                  threads: int = 1, xs=None) -> CoverReport:
    if C1 <= 0:
        raise DomainError("C1 must be positive")
    lo, hi = (float(J[0]), float(J[1])) if J is not None else curve.domain
    if xs is None:
        xs = _points_x(curve, shift, Q, delta, (lo, hi), threads)
    r = C1 / (Q * Q * delta)
    s, e = merge_intervals(np.clip(xs - r, lo, hi), np.clip(xs + r, lo, hi))
    measure = float(np.sum(e - s))
    width = hi - lo
    ratio = measure / width if width > 0 else 0.0
    n = len(xs)
    # every ball has length at most 2r, so n * 2r bounds the union from above
    checks = {"n*2r>=measure": n * 2 * r >= measure * (1 - 1e-12)}
    if not checks["n*2r>=measure"]:
        raise FalsificationError(f"union of {n} balls of radius {r:.3g} exceeds their total length")
    return CoverReport(float(Q), float(delta), (lo, hi), float(C1), shift.as_tuple(), n,
                       list(zip(s.tolist(), e.tolist())), measure, min(ratio, 1.0), checks)


@dataclass
class CalibrationRecord:
    curve: str
    J: tuple
    k1: float
    k2: float
    C1: float
    Q0: float
    c0: float
    shifts: list
    evidence: list
    proof_C1: float
    constraints: dict
    grid: dict = field(default_factory=dict)

    @property
    def c(self):
        """Lower-bound constant implied by covering: N >= c delta Q^2."""
        return (self.J[1] - self.J[0]) / (4.0 * self.C1)

    def admissible(self, Q, delta):
        return self.k1 / Q <= delta <= self.k2 and Q > self.Q0

    def to_json(self, path=None):
        text = json.dumps(asdict(self), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, source):
        if isinstance(source, str) and source.lstrip().startswith("{"):
            data = json.loads(source)
        else:
            with open(source) as fh:
                data = json.load(fh)
        data["J"] = tuple(data["J"])
        return cls(**data)


def proof_constraints(curve, c0, C1, k1):
    return {
        "c0<=1/3": c0 <= 1 / 3,
        "c0<1/6": c0 < 1 / 6,
        "c2*C1^2/(2*k1^3)<1/2": curve.c2 * C1 * C1 / (2 * k1**3) < 0.5,
    }


def calibrate(curve: PlanarCurve, shifts: Sequence, J, Qs: Sequence, deltas: Sequence,
              c0: float = WITNESS_C0, C1s=C1_LATTICE, k1s=K1_LATTICE, k2s=K2_LATTICE,
              threads: int = 1) -> CalibrationRecord:
    """Find (k1, k2, C1, Q0) with covering ratio >= 1/2 on every admissible cell.

    Preference: the widest admissible region (most evidence cells), then
    the smallest C1 that covers it, then the smallest Q0.
    """
    if curve.degenerate:
        raise DegenerateCurvatureError(f"{curve.spec} has vanishing curvature; calibration refused")
    Qs = sorted(float(q) for q in Qs)
    deltas = sorted(float(d) for d in deltas)
    if Qs[-1] < 8 * Qs[0]:
        raise DomainError("the Q grid must span at least three dyadic steps")
    lo, hi = (float(J[0]), float(J[1])) if J is not None else curve.domain
    shifts = [s if isinstance(s, Shift) else Shift(*s) for s in shifts]
    cells = [(Q, d) for Q in Qs for d in deltas if d <= max(k2s) and d >= min(k1s) / Q]
    # the point sets do not depend on C1, so enumerate each cell once
    xs = {(Q, d, i): _points_x(curve, s, Q, d, (lo, hi), threads)
          for Q, d in cells for i, s in enumerate(shifts)}
    width = hi - lo
    ratio = {}
    for C1 in C1s:
        for (Q, d, i), x in xs.items():
            ratio[C1, Q, d, i] = _covered(x, C1 / (Q * Q * d), lo, hi) / width

    best = None
    for k1 in k1s:
        for k2 in k2s:
            adm = [(Q, d) for Q, d in cells if k1 / Q <= d <= k2]
            if not adm:
                continue
            for C1 in C1s:
                if not proof_constraints(curve, c0, C1, k1)["c2*C1^2/(2*k1^3)<1/2"]:
                    continue
                failing = [Q for Q, d in adm for i in range(len(shifts)) if ratio[C1, Q, d, i] < 0.5]
                Q0 = max(failing, default=0.0)
                Q0 = max(Q0, k1 / k2)
                evidence = [(Q, d) for Q, d in adm if Q > Q0]
                if not evidence:
                    continue
                key = (-len(evidence), C1, Q0, k1)
                if best is None or key < best[0]:
                    best = (key, k1, k2, C1, Q0, evidence)
                break  # larger C1 only widens balls; keep the sharpest one
    if best is None:
        raise CalibrationFailedError(
            f"no (k1, k2, C1) on the search lattice covers half of J on any cell for {curve.spec}")
    _, k1, k2, C1, Q0, evidence = best
    rows = []
    for Q, d in cells:
        if not (k1 / Q <= d <= k2):
            continue
        for i, s in enumerate(shifts):
            r = ratio[C1, Q, d, i]
            rows.append({"Q": Q, "delta": d, "shift": list(s.as_tuple()), "N": int(len(xs[Q, d, i])),
                         "ratio": r, "admissible": Q > Q0, "passed": r >= 0.5})
    return CalibrationRecord(
        curve=curve.spec, J=(lo, hi), k1=k1, k2=k2, C1=C1, Q0=Q0, c0=c0,
        shifts=[list(s.as_tuple()) for s in shifts], evidence=rows,
        proof_C1=proof_C1(curve, c0), constraints=proof_constraints(curve, c0, C1, k1),
        grid={"Q": Qs, "delta": deltas})


def check_record(curve: PlanarCurve, record: CalibrationRecord, shifts: Sequence, Qs, deltas,
                 threads: int = 1) -> list:
    """Covering reports on every admissible cell of a grid, for each shift."""
    out = []
    for Q in Qs:
        for d in deltas:
            if not record.admissible(Q, d):
                continue
            for s in shifts:
                s = s if isinstance(s, Shift) else Shift(*s)
                out.append(union_measure(curve, s, Q, d, record.J, record.C1, threads))
    return out
