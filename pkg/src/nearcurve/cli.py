"""Command-line entry point.

Exit codes: 0 success, 1 bad input or refused workload, 2 a result that
contradicts one of the checked bounds or constructions.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import __version__
from .counting import CountQuery, Shift, count_fast, count_naive, enumerate_arrays
from .covering import CANONICAL_SHIFTS, CalibrationRecord, calibrate, union_measure
from .curve import make_curve
from .dual_lattice import construct_witness
from .exceptions import DomainError, FalsificationError, NearCurveError
from .harness import ScanConfig, boxdim_diagnostic, run_scan, write_csv, write_json
from .kernel_bounds import fit_report, make_grid, verify_lower, verify_upper, verify_upper_lip
from .psi import dimension_formula, lower_order, parse_psi, series_classify

DEFAULT_GRID_Q = [2.0**k for k in range(6, 13)]
DEFAULT_GRID_DELTA = [2.0**-k for k in range(1, 9)]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text):
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(t) for t in text]
    return [float(t) for t in str(text).split(",") if t.strip()]


def _pair(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise DomainError(f"expected 'a,b', got {text!r}")
    return tuple(vals)


def _common(p, grid=False):
    p.add_argument("--curve", help="curve spec, e.g. parabola@[0,1] or poly:[0,0,1]@[0,1]")
    p.add_argument("--theta", help="shift 'theta1,theta2' (use --theta=-1,0 for negatives)")
    p.add_argument("--Q", help="comma list of Q values" if grid else "Q >= 1")
    p.add_argument("--delta", help="comma list of delta values" if grid else "0 < delta <= 1/2")
    p.add_argument("--J", help="subinterval 'a,b' of the curve's domain")
    p.add_argument("--out", help="write the JSON (or CSV) artifact here")
    p.add_argument("--config", help="JSON file with defaults for any flag")
    p.add_argument("--threads", type=int)
    p.add_argument("--budget", type=float)


def build_parser():
    ap = _Parser(prog="nearcurve", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"nearcurve {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="N_theta(Q, delta)")
    _common(p)
    p.add_argument("--algorithm", choices=("fast", "naive"), default="fast")

    p = sub.add_parser("points", help="list the counted points (CSV)")
    _common(p)

    for name in ("verify-upper", "verify-upper-lip", "verify-lower", "fit"):
        p = sub.add_parser(name, help="grid check of a counting bound")
        _common(p, grid=True)
        p.add_argument("--force", action="store_true", help="run on a degenerate curve anyway")
        p.add_argument("--phi", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--k1", type=float)
        p.add_argument("--k2", type=float)
        p.add_argument("--Q0", type=float)
        p.add_argument("--calibration", help="CalibrationRecord JSON supplying k1, k2, Q0")

    p = sub.add_parser("covering", help="measure of the union of balls around counted points")
    _common(p)
    p.add_argument("--C1", type=float)
    p.add_argument("--calibration")

    p = sub.add_parser("calibrate", help="search covering constants on a grid")
    _common(p, grid=True)
    p.add_argument("--c0", type=float)
    p.add_argument("--shifts", help="';'-separated shifts; defaults to the canonical ten")

    p = sub.add_parser("witness", help="build a lattice witness near x")
    _common(p)
    p.add_argument("--x", type=float, required=False)
    p.add_argument("--c0", type=float)
    p.add_argument("--C1", type=float)

    p = sub.add_parser("series", help="classify the series for psi")
    p.add_argument("--psi")
    p.add_argument("--s", type=float)
    p.add_argument("--mode", choices=("planar", "curve"))
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("dim", help="(2 - lambda)/(1 + lambda), or the box-count diagnostic")
    p.add_argument("--psi")
    p.add_argument("--lam", type=float, help="lower order directly")
    p.add_argument("--boxdim", action="store_true")
    p.add_argument("--curve")
    p.add_argument("--theta")
    p.add_argument("--Q", help="Q_max for --boxdim")
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("scan", help="run a JSON-configured grid scan")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="CSV path (JSON summary goes next to it)")
    p.add_argument("--threads", type=int)
    return ap


def _resolve(args):
    """Flags override config values; returns the effective settings."""
    eff = {}
    if getattr(args, "config", None) and args.command != "scan":
        with open(args.config) as fh:
            eff.update(json.load(fh))
    for k, v in vars(args).items():
        if v is not None and k not in ("config",):
            eff[k] = v
    return eff


def _curve(eff):
    return make_curve(eff.get("curve", "parabola@[0,1]"), lip_exponent=eff.get("phi", 1.0) or 1.0)


def _shift(eff):
    th = eff.get("theta", "0,0")
    return Shift(*_pair(th)) if not isinstance(th, Shift) else th


def _J(eff):
    return _pair(eff["J"]) if eff.get("J") is not None else None


def _one(eff, key, default=None):
    if key not in eff:
        if default is None:
            raise DomainError(f"--{key} is required")
        return default
    vals = _floats(eff[key])
    if len(vals) != 1:
        raise DomainError(f"--{key} takes a single value here")
    return vals[0]


def _query(eff):
    return CountQuery(_curve(eff), _shift(eff), _one(eff, "Q"), _one(eff, "delta"), _J(eff))


def _emit(eff, payload, line):
    if eff.get("out"):
        write_json(eff["out"], payload, eff)
    print(line)


def _cmd_count(eff):
    q = _query(eff)
    t = time.perf_counter()
    fn = count_fast if eff.get("algorithm", "fast") == "fast" else count_naive
    n = fn(q, threads=int(eff.get("threads", 1)))
    ms = (time.perf_counter() - t) * 1e3
    _emit(eff, {"query": {"curve": q.curve.spec, "theta": q.shift.as_tuple(), "Q": q.Q,
                          "delta": q.delta, "J": q.J},
                "count": n, "elapsed_ms": ms, "algorithm": eff.get("algorithm", "fast")}, str(n))


def _cmd_points(eff):
    query = _query(eff)
    budget = int(eff.get("budget", 10**7))
    qs, ps, rs = enumerate_arrays(query, int(eff.get("threads", 1)), budget)
    rows = [{"q": int(a), "p1": int(b), "residual": float(c)} for a, b, c in zip(qs, ps, rs)]
    if eff.get("out"):
        write_csv(eff["out"], rows, eff, fields=("q", "p1", "residual"))
    print(len(rows))


def _grid(eff):
    Qs = _floats(eff["Q"]) if "Q" in eff else DEFAULT_GRID_Q
    ds = _floats(eff["delta"]) if "delta" in eff else DEFAULT_GRID_DELTA
    return make_grid(Qs, ds)


def _lower_constants(eff):
    if eff.get("calibration"):
        rec = CalibrationRecord.from_json(eff["calibration"])
        eff.setdefault("k1", rec.k1)
        eff.setdefault("k2", rec.k2)
        eff.setdefault("Q0", rec.Q0)
        eff.setdefault("C1", rec.C1)
    return eff


def _bound_payload(rep):
    return {"report": {"kind": rep.kind, "curve": rep.curve, "shift": rep.shift,
                       "sup_ratio": rep.sup_ratio, "inf_ratio": rep.inf_ratio, "checks": rep.checks,
                       "params": rep.params, "cells": list(rep.rows())}}


def _cmd_bounds(eff):
    curve, shift, grid, J = _curve(eff), _shift(eff), _grid(eff), _J(eff)
    th = int(eff.get("threads", 1))
    cmd = eff["command"]
    if cmd == "verify-upper":
        rep = verify_upper(curve, shift, grid, J=J, force=bool(eff.get("force")), threads=th)
        line = f"sup_ratio={rep.sup_ratio:.6g} passed={rep.passed}"
    elif cmd == "verify-upper-lip":
        rep = verify_upper_lip(curve, shift, grid, eff.get("phi"), eff.get("epsilon", 0.05), J=J,
                               force=bool(eff.get("force")), threads=th)
        line = f"sup_ratio={rep.sup_ratio:.6g} passed={rep.passed}"
    else:
        eff = _lower_constants(eff)
        if "k1" not in eff or "k2" not in eff:
            raise DomainError("need --k1 and --k2, or --calibration")
        rep = verify_lower(curve, shift, grid, eff["k1"], eff["k2"], eff.get("Q0", 0.0), J=J, threads=th)
        line = f"inf_ratio={rep.inf_ratio:.6g} passed={rep.passed}"
        if cmd == "fit":
            aQ, ad = fit_report(rep)
            _emit(eff, dict(_bound_payload(rep), alpha_Q=aQ, alpha_delta=ad),
                  f"alpha_Q={aQ:.4f} alpha_delta={ad:.4f}")
            return
    _emit(eff, _bound_payload(rep), line)
    rep.raise_if_failed()


def _cmd_covering(eff):
    eff = _lower_constants(eff)
    if "C1" not in eff:
        raise DomainError("need --C1 or --calibration")
    curve = _curve(eff)
    rep = union_measure(curve, _shift(eff), _one(eff, "Q"), _one(eff, "delta"), _J(eff), eff["C1"],
                        int(eff.get("threads", 1)))
    payload = {"report": {k: getattr(rep, k) for k in ("Q", "delta", "J", "C1", "shift", "n_points",
                                                        "measure", "ratio", "checks")}}
    payload["report"]["intervals"] = len(rep.merged)
    _emit(eff, payload, f"ratio={rep.ratio:.6g} measure={rep.measure:.6g} points={rep.n_points}")


def _cmd_calibrate(eff):
    curve = _curve(eff)
    if eff.get("shifts"):
        shifts = [_pair(s) for s in str(eff["shifts"]).split(";") if s.strip()]
    else:
        shifts = list(CANONICAL_SHIFTS)
    Qs = _floats(eff["Q"]) if "Q" in eff else [2.0**k for k in range(5, 11)]
    ds = _floats(eff["delta"]) if "delta" in eff else [2.0**-k for k in range(2, 9)]
    kw = {"c0": eff["c0"]} if "c0" in eff else {}
    rec = calibrate(curve, shifts, _J(eff), Qs, ds, threads=int(eff.get("threads", 1)), **kw)
    if eff.get("out"):
        rec.to_json(eff["out"])
    print(f"k1={rec.k1:g} k2={rec.k2:g} C1={rec.C1:g} Q0={rec.Q0:g} c0={rec.c0:g}")


def _cmd_witness(eff):
    curve = _curve(eff)
    J = _J(eff) or curve.domain
    x = _one(eff, "x", (J[0] + J[1]) / 2)
    c0 = _one(eff, "c0", 0.16)
    rep = construct_witness(curve, _shift(eff), J, x, _one(eff, "Q"), _one(eff, "delta"), c0,
                            eff.get("C1"))
    payload = {"witness": {k: getattr(rep, k) for k in rep.__dataclass_fields__}}
    _emit(eff, payload, f"q={rep.witness[0]} p1={rep.witness[1]} p2={rep.witness[2]} "
                        f"residual={rep.residual:.3g}")


def _cmd_series(eff):
    if "psi" not in eff or "s" not in eff:
        raise DomainError("need --psi and --s")
    v = series_classify(parse_psi(eff["psi"]), float(eff["s"]), eff.get("mode", "curve"))
    _emit(eff, {"verdict": v.verdict, "mode": v.mode, "s": v.s, "evidence": v.evidence}, v.verdict)


def _cmd_dim(eff):
    if eff.get("boxdim"):
        if "psi" not in eff:
            raise DomainError("--boxdim needs --psi pow:v")
        psi = parse_psi(eff["psi"])
        Qmax = int(_one(eff, "Q", 2**14))
        d = boxdim_diagnostic(_curve(eff), _shift(eff), psi.v, Qmax)
        _emit(eff, {"diagnostic": vars(d)}, f"slope={d.slope:.4f} target={d.target:.4f} (diagnostic)")
        return
    lam = eff.get("lam")
    if lam is None:
        if "psi" not in eff:
            raise DomainError("need --lam or --psi")
        lam = lower_order(parse_psi(eff["psi"]))
    val = dimension_formula(float(lam))
    _emit(eff, {"lambda": lam, "dimension": val}, f"{val:.12g}")


def _cmd_scan(args):
    cfg = ScanConfig.from_json(args.config, threads=args.threads)
    if args.out:
        cfg.out_csv = args.out
        cfg.out_json = args.out.rsplit(".", 1)[0] + ".json"
    summary, _ = run_scan(cfg)
    print(json.dumps({"passed": summary["passed"], "verdicts": summary["verdicts"]}, sort_keys=True))
    if summary["passed"] or not summary["verdicts"]:
        return 0
    reasons = [v.get("reason", "") for v in summary["verdicts"].values() if not v.get("passed")]
    # refusals and missing inputs are domain problems; anything else is a failed bound
    return 1 if all(r for r in reasons) else 2


COMMANDS = {
    "count": _cmd_count, "points": _cmd_points, "verify-upper": _cmd_bounds,
    "verify-upper-lip": _cmd_bounds, "verify-lower": _cmd_bounds, "fit": _cmd_bounds,
    "covering": _cmd_covering, "calibrate": _cmd_calibrate, "witness": _cmd_witness,
    "series": _cmd_series, "dim": _cmd_dim,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "scan":
            return _cmd_scan(args)
        COMMANDS[args.command](_resolve(args))
        return 0
    except FalsificationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (NearCurveError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
