"""Grid scans with CSV/JSON artifacts, and the box-counting diagnostic."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .counting import CountQuery, Shift, _chunks_by_work, _expand, candidate_range, count_fast
from .covering import CalibrationRecord, merge_intervals, union_measure
from .curve import PlanarCurve, make_curve
from .exceptions import DomainError, NearCurveError
from .kernel_bounds import (DRIFT_FACTOR, LOWER_FLOOR, UPPER_CEILING, fit_exponents, lower_bound,
                            upper_bound, upper_bound_lip)
from .psi import dimension_formula

MODES = ("upper", "upper_lip", "lower", "covering", "exponents")
CSV_FIELDS = ("mode", "theta1", "theta2", "Q", "delta", "N", "bound", "ratio", "admissible", "error")


@dataclass
class ScanConfig:
    curve: str = "parabola@[0,1]"
    shifts: list = field(default_factory=lambda: [[0.41421356, 0.57735027]])
    Q: list = field(default_factory=lambda: [2.0**k for k in range(6, 13)])
    delta: list = field(default_factory=lambda: [2.0**-k for k in range(1, 9)])
    J: Optional[list] = None
    modes: list = field(default_factory=lambda: ["upper"])
    k1: Optional[float] = None
    k2: Optional[float] = None
    Q0: float = 0.0
    C1: Optional[float] = None
    calibration: Optional[str] = None
    phi: Optional[float] = None
    epsilon: float = 0.05
    force: bool = False
    threads: int = 1
    budget: int = 10**7
    seed: int = 0
    out_csv: Optional[str] = None
    out_json: Optional[str] = None

    def __post_init__(self):
        unknown = set(self.modes) - set(MODES)
        if unknown:
            raise DomainError(f"unknown scan modes {sorted(unknown)}; choose from {MODES}")
        if self.budget <= 0 or self.threads < 1:
            raise DomainError("budget and threads must be positive")
        self.shifts = [list(map(float, s)) for s in self.shifts]
        make_curve(self.curve)  # parse early
        if self.calibration:
            rec = CalibrationRecord.from_json(self.calibration)
            for name in ("k1", "k2", "C1"):
                if getattr(self, name) is None:
                    setattr(self, name, getattr(rec, name))
            if not self.Q0:
                self.Q0 = rec.Q0

    @classmethod
    def from_json(cls, path, **overrides):
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def to_dict(self):
        return asdict(self)


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def header(config: dict) -> str:
    """One-line reproducibility header embedded in every artifact."""
    return json.dumps({"tool": "nearcurve", "version": __version__, "config": config}, sort_keys=True)


def write_csv(path, rows, config: dict, fields=CSV_FIELDS):
    buf = io.StringIO()
    buf.write("# " + header(config) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(k)) for k in fields])
    text = buf.getvalue()
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def write_json(path, payload, config: dict):
    doc = {"header": json.loads(header(config)), **payload}
    text = json.dumps(doc, indent=2, sort_keys=True, default=_json_default)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _cell_count(curve, shift, Q, d, J):
    try:
        return count_fast(CountQuery(curve, shift, Q, d, J)), None
    except NearCurveError as e:
        return None, f"{type(e).__name__}: {e}"


def run_scan(config: ScanConfig):
    """Run every requested mode over the grid; returns (summary, rows)."""
    curve = make_curve(config.curve, lip_exponent=config.phi if config.phi is not None else 1.0)
    J = tuple(config.J) if config.J else None
    shifts = [Shift(*s) for s in config.shifts]
    cells = sorted((float(Q), float(d), i) for Q in config.Q for d in config.delta
                   for i in range(len(shifts)))
    modes = [m for m in MODES if m in config.modes]
    summary = {"curve": curve.spec, "modes": modes, "cells": len(cells), "verdicts": {}}
    rows = []
    if not modes:
        _emit(config, summary, rows)
        return summary, rows

    refused = None
    if curve.degenerate and not config.force:
        refused = f"DegenerateCurvatureError: {curve.spec} has vanishing curvature; bound checks refused"

    need_counts = refused is None and any(m in modes for m in ("upper", "upper_lip", "lower", "exponents"))
    counts = {}
    if need_counts:
        def work(cell):
            Q, d, i = cell
            return cell, _cell_count(curve, shifts[i], Q, d, J)
        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                results = list(pool.map(work, cells))
        else:
            results = [work(c) for c in cells]
        counts = dict(results)

    for mode in modes:
        if mode in ("upper", "upper_lip"):
            rows += _bound_rows(mode, curve, shifts, cells, counts, config, refused, summary)
        elif mode == "lower":
            rows += _lower_rows(curve, shifts, cells, counts, config, refused, summary)
        elif mode == "exponents":
            _exponents(curve, cells, counts, config, refused, summary)
        elif mode == "covering":
            rows += _covering_rows(curve, shifts, cells, J, config, refused, summary)
    _emit(config, summary, rows)
    return summary, rows


def _row(mode, shift, Q, d, N=None, bound=None, ratio=None, admissible=None, error=None):
    return {"mode": mode, "theta1": shift.theta1, "theta2": shift.theta2, "Q": Q, "delta": d,
            "N": N, "bound": bound, "ratio": ratio, "admissible": admissible, "error": error}


def _bound_rows(mode, curve, shifts, cells, counts, config, refused, summary):
    rows, ratios = [], []
    phi = config.phi if config.phi is not None else (curve.lip_exponent or 1.0)
    for Q, d, i in cells:
        n, err = counts.get((Q, d, i), (None, None))
        err = refused or err
        if err:
            rows.append(_row(mode, shifts[i], Q, d, error=err))
            continue
        b = upper_bound(Q, d) if mode == "upper" else upper_bound_lip(Q, d, phi, config.epsilon)
        rows.append(_row(mode, shifts[i], Q, d, n, b, n / b, True))
        ratios.append((Q, n / b))
    if not ratios:
        summary["verdicts"][mode] = {"passed": False, "reason": refused or "no cells"}
        return rows
    Qs = sorted({Q for Q, _ in ratios})
    k = max(len(Qs) // 2, 1)
    lo = max(r for Q, r in ratios if Q in Qs[:k])
    hi = max(r for Q, r in ratios if Q in Qs[-k:])
    sup = max(r for _, r in ratios)
    summary["verdicts"][mode] = {"sup_ratio": sup, "sup_small_Q": lo, "sup_large_Q": hi,
                                 "passed": bool(sup <= UPPER_CEILING and (hi <= DRIFT_FACTOR * lo or hi == 0))}
    return rows


def _lower_rows(curve, shifts, cells, counts, config, refused, summary):
    rows, ratios = [], []
    if config.k1 is None or config.k2 is None:
        refused = refused or "DomainError: lower mode needs k1 and k2 (or a calibration record)"
    for Q, d, i in cells:
        n, err = counts.get((Q, d, i), (None, None))
        err = refused or err
        if err:
            rows.append(_row("lower", shifts[i], Q, d, error=err))
            continue
        adm = bool(config.k1 / Q <= d <= config.k2 and Q > config.Q0)
        b = lower_bound(Q, d)
        rows.append(_row("lower", shifts[i], Q, d, n, b, n / b, adm))
        if adm:
            ratios.append(n / b)
    if ratios:
        summary["verdicts"]["lower"] = {"inf_ratio": min(ratios), "admissible_cells": len(ratios),
                                        "passed": bool(min(ratios) >= LOWER_FLOOR)}
    else:
        summary["verdicts"]["lower"] = {"passed": False, "reason": refused or "no admissible cells"}
    return rows


def _exponents(curve, cells, counts, config, refused, summary):
    keep = []
    for Q, d, i in cells:
        n = counts.get((Q, d, i), (None, None))[0]
        if n is not None:
            keep.append((Q, d, n))
    if config.k1 is not None and config.k2 is not None:
        keep = [(Q, d, n) for Q, d, n in keep if config.k1 / Q <= d <= config.k2 and Q > config.Q0]
    try:
        if refused:
            raise DomainError(refused)
        aQ, ad = fit_exponents(*zip(*keep)) if keep else fit_exponents([], [], [])
        summary["verdicts"]["exponents"] = {"alpha_Q": aQ, "alpha_delta": ad,
                                            "passed": bool(1.9 <= aQ <= 2.1 and 0.9 <= ad <= 1.1)}
    except NearCurveError as e:
        summary["verdicts"]["exponents"] = {"passed": False, "reason": f"{type(e).__name__}: {e}"}


def _covering_rows(curve, shifts, cells, J, config, refused, summary):
    rows, worst = [], []
    if config.C1 is None or config.k1 is None or config.k2 is None:
        refused = refused or "DomainError: covering mode needs C1, k1, k2 (or a calibration record)"
    for Q, d, i in cells:
        if refused:
            rows.append(_row("covering", shifts[i], Q, d, error=refused))
            continue
        adm = bool(config.k1 / Q <= d <= config.k2 and Q > config.Q0)
        if not adm:
            rows.append(_row("covering", shifts[i], Q, d, admissible=False))
            continue
        try:
            rep = union_measure(curve, shifts[i], Q, d, J, config.C1)
        except NearCurveError as e:
            rows.append(_row("covering", shifts[i], Q, d, error=f"{type(e).__name__}: {e}"))
            continue
        rows.append(_row("covering", shifts[i], Q, d, rep.n_points, rep.measure, rep.ratio, True))
        worst.append(rep.ratio)
    if worst:
        summary["verdicts"]["covering"] = {"min_ratio": min(worst), "cells": len(worst),
                                           "passed": bool(min(worst) >= 0.5)}
    else:
        summary["verdicts"]["covering"] = {"passed": False, "reason": refused or "no admissible cells"}
    return rows


def _emit(config, summary, rows):
    summary["passed"] = all(v.get("passed") for v in summary["verdicts"].values())
    cfg = config.to_dict()
    if config.out_csv:
        write_csv(config.out_csv, rows, cfg)
    if config.out_json:
        write_json(config.out_json, {"summary": summary}, cfg)


# -- box counting ----------------------------------------------------------------------

@dataclass
class DimensionDiagnostic:
    v: float
    scales: list
    counts: list
    slope: float
    target: float
    intercept: float = 0.0
    label: str = "diagnostic: finite truncation of a limsup set, biased upward"


def _hit_intervals(curve, shift, v, Q_max):
    """x-intervals where ||q x - theta1|| < q^-v and ||q f(x) - theta2|| < q^-v.

    The second condition is applied to the tangent line at (p1 + theta1)/q.
    """
    th = shift.normalized()
    a, b = curve.domain
    qs = np.arange(1, int(Q_max) + 1, dtype=np.int64)
    start, stop = candidate_range(qs, th.theta1, a, b)
    counts = np.maximum(stop - start + 1, 0)
    out_q, out_lo, out_hi = [], [], []
    for sl in _chunks_by_work(qs, counts):
        owner, p = _expand(start[sl], counts[sl])
        if len(p) == 0:
            continue
        q = qs[sl][owner].astype(float)
        psi = q ** (-v)
        x0 = (p + th.theta1) / q
        u = q * curve.f(x0) - th.theta2
        slope = q * curve.d1(x0)  # d(q f)/dx at x0
        r = u - np.rint(u)
        # t = x - x0 with |q t| < psi and |r + slope t| < psi
        hw = psi / q
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = np.where(slope != 0, (-psi - r) / slope, -np.inf)
            t2 = np.where(slope != 0, (psi - r) / slope, np.inf)
        lo_t = np.maximum(-hw, np.minimum(t1, t2))
        hi_t = np.minimum(hw, np.maximum(t1, t2))
        flat = slope == 0
        lo_t = np.where(flat & (np.abs(r) < psi), -hw, lo_t)
        hi_t = np.where(flat & (np.abs(r) < psi), hw, hi_t)
        ok = hi_t > lo_t
        out_q.append(q[ok])
        out_lo.append(np.clip(x0[ok] + lo_t[ok], a, b))
        out_hi.append(np.clip(x0[ok] + hi_t[ok], a, b))
    cat = lambda xs: np.concatenate(xs) if xs else np.empty(0)
    return cat(out_q), cat(out_lo), cat(out_hi)


def boxdim_diagnostic(curve: PlanarCurve, shift: Shift, v: float, Q_max: int = 2**14,
                      scales=None, box_budget: int = 10**8) -> DimensionDiagnostic:
    """Box-count slope for the truncated approximable set along the x-projection.

    At scale eps only the dyadic shell q(eps)/2 < q <= q(eps) with
    q(eps) = eps^(-1/(1+v)) is used: those neighbourhoods have width about
    eps, and smaller q would cover everything at coarse scales.
    """
    if not 0.5 <= v < 1:
        raise DomainError(f"v must lie in [1/2, 1), got {v}")
    lo_eps = Q_max ** (-(1 + v))
    if scales is None:
        scales = np.geomspace(0.1, lo_eps * 4, 10)
    scales = sorted((float(s) for s in scales), reverse=True)
    if len(scales) < 2:
        raise DomainError("need at least two scales to fit a slope")
    if scales[0] > 0.1 * (1 + 1e-12) or scales[-1] < lo_eps * (1 - 1e-12):
        raise DomainError(f"scales must lie in [{lo_eps:.3g}, 0.1]")
    q, xlo, xhi = _hit_intervals(curve, shift, v, Q_max)
    a, _ = curve.domain
    counts = []
    for eps in scales:
        qmax = eps ** (-1.0 / (1.0 + v))
        sel = (q <= qmax) & (q > qmax / 2)
        i0 = np.floor((xlo[sel] - a) / eps)
        i1 = np.floor((xhi[sel] - a) / eps)
        if np.sum(i1 - i0 + 1) > box_budget and len(i0) > box_budget:
            raise DomainError("box budget exceeded")
        s, e = merge_intervals(i0, i1 + 1)
        counts.append(int(np.sum(e - s)))
    counts = [max(c, 1) for c in counts]
    X = np.log(1.0 / np.asarray(scales))
    slope, intercept = np.polyfit(X, np.log(counts), 1)
    target = dimension_formula(v)
    return DimensionDiagnostic(float(v), scales, counts, float(slope), target, float(intercept))
