"""Regenerate the frozen fixtures in this directory.

Run once from the repo root: python3 tests/fixtures/freeze.py
The naive loops are the oracle here; nothing from the fast path is used
for the count fixture.
"""

import json
from pathlib import Path

import numpy as np

from nearcurve.counting import CountQuery, Shift, enumerate_naive
from nearcurve.covering import CANONICAL_SHIFTS, calibrate
from nearcurve.curve import make_curve
from nearcurve.dual_lattice import bdv_parameters, build_body, construct_witness, in_bad_set, successive_minima

HERE = Path(__file__).parent
SHIFT = (0.41421356, 0.57735027)


def dump(name, obj):
    (HERE / name).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def main():
    par = make_curve("parabola@[0,1]")

    q = CountQuery(par, Shift(*SHIFT), 64, 1 / 16)
    qs, ps, _ = enumerate_naive(q)
    dump("count_q64.json", {"curve": "parabola@[0,1]", "theta": SHIFT, "Q": 64, "delta": 1 / 16,
                            "count": len(qs), "points": [[int(a), int(b)] for a, b in zip(qs, ps)]})

    rec = calibrate(par, CANONICAL_SHIFTS, None, [2.0**k for k in range(5, 11)],
                    [2.0**-k for k in range(2, 9)])
    rec.to_json(HERE / "calibration_parabola.json")

    body = build_body(par, 0.5, 256, 1 / 32, 0.16)
    mbody = build_body(par, 0.41421356, 256, 1 / 32, 0.16)
    m = successive_minima(mbody)
    lam, K, T = bdv_parameters(par, 8192, 0.5, 0.16)
    xs = np.linspace(0.125, 0.875, 2000)
    good = [float(x) for x in xs if not in_bad_set(par, x, lam, K, T)]
    xw = min(good, key=lambda x: abs(x - 0.5))
    w = construct_witness(par, Shift(0, 0), (0, 1), xw, 8192, 0.5, 0.16)
    dump("lattice.json", {
        "body": {"x": 0.5, "Q": 256, "delta": 1 / 32, "c0": 0.16, "bounds": list(body.bounds),
                 "rows": [list(r) for r in body.rows], "volume": body.volume},
        "minima": {"x": 0.41421356, "Q": 256, "delta": 1 / 32, "c0": 0.16, "minima": list(m.minima),
                   "vectors": [[int(c) for c in v] for v in m.vectors]},
        "bad_set": {"x": 0.5, "Q": 8192, "delta": 0.5, "c0": 0.16, "bdv": [lam, K, T],
                    "member": bool(in_bad_set(par, 0.5, lam, K, T))},
        "witness": {"x": xw, "Q": 8192, "delta": 0.5, "c0": 0.16, "theta": [0, 0],
                    "witness": [int(c) for c in w.witness], "t": [int(c) for c in w.t]},
    })


if __name__ == "__main__":
    main()
