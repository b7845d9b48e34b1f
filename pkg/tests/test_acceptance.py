"""Acceptance criteria 1-13, one recorded pass/fail line each.

The lines are printed in the terminal summary (see conftest.py). A
criterion that cannot be met is still asserted as stated, so its test fails.
"""

import math
import time
from functools import lru_cache

import numpy as np
import pytest

from nearcurve import (BudgetExceededError, CountQuery, Shift, ScalingLawRegressor, count_fast, count_naive,
                       dimension_formula, make_curve, series_classify, ApproxFunction)
from nearcurve.counting import enumerate_arrays
from nearcurve.covering import CANONICAL_SHIFTS, CalibrationRecord, calibrate, check_record
from nearcurve.dual_lattice import (bdv_parameters, build_body, construct_witness, in_bad_set,
                                    successive_minima)
from nearcurve.harness import ScanConfig, boxdim_diagnostic, run_scan
from nearcurve.kernel_bounds import fejer_eval, fejer_order, smoothed_count, verify_lower, verify_upper
from nearcurve.psi import series_threshold

from conftest import ACCEPTANCE, FIXTURES, IRR

T2_Q = [2.0**k for k in range(6, 13)]
T2_DELTA = [2.0**-k for k in range(1, 9)]
REC = CalibrationRecord.from_json(FIXTURES / "calibration_parabola.json")
CURVES = ["parabola@[0,1]", "cubic@[1,2]", "exp@[0,1]", "circle-arc@[-0.5,0.5]"]


def record(n, ok, detail, soft=False):
    word = "PASS" if ok else ("FAIL (soft, non-gating)" if soft else "FAIL")
    ACCEPTANCE[n] = f"criterion {n:>2}: {word}: {detail}"
    print(ACCEPTANCE[n])


@lru_cache(maxsize=None)
def t2_counts():
    par = make_curve("parabola@[0,1]")
    grid = [(Q, d) for Q in T2_Q for d in T2_DELTA]
    return grid, [count_fast(CountQuery(par, Shift(*IRR), Q, d)) for Q, d in grid]


def test_c01_oracle_equivalence():
    rng = np.random.default_rng(1)
    t = time.perf_counter()
    bad = []
    for i in range(200):
        curve = make_curve(CURVES[i % len(CURVES)])
        Q = float(np.exp(rng.uniform(0, math.log(2000))))
        d = float(2.0 ** rng.uniform(-10, -1))
        th = Shift(*CANONICAL_SHIFTS[int(rng.integers(10))])
        q = CountQuery(curve, th, Q, d)
        a, b = count_fast(q), count_naive(q)
        if a != b:
            bad.append((curve.spec, Q, d, th, a, b))
    el = time.perf_counter() - t
    ok = not bad and el < 60
    record(1, ok, f"{200 - len(bad)}/200 queries equal, {el:.1f} s (limit 60 s)")
    assert ok, bad[:3]


def test_c02_hand_counts():
    a = count_fast(CountQuery(make_curve("line@[0,1]"), Shift(0, 0), 10, 0.1))
    b = count_fast(CountQuery(make_curve("parabola@[0,1]"), Shift(0, 0), 1, 0.25))
    a2 = count_naive(CountQuery(make_curve("line@[0,1]"), Shift(0, 0), 10, 0.1))
    b2 = count_naive(CountQuery(make_curve("parabola@[0,1]"), Shift(0, 0), 1, 0.25))
    ok = a == a2 == 165 and b == b2 == 2
    record(2, ok, f"line Q=10 -> {a}, parabola Q=1 -> {b}")
    assert ok


def test_c03_integer_shift_invariance():
    rng = np.random.default_rng(3)
    bad = 0
    for i in range(50):
        curve = make_curve(CURVES[i % len(CURVES)])
        Q = float(np.exp(rng.uniform(0, math.log(500))))
        d = float(2.0 ** rng.uniform(-10, -1))
        base = count_fast(CountQuery(curve, Shift(0, 0), Q, d))
        for th in ((1, 0), (0, 1), (3, -2)):
            bad += count_fast(CountQuery(curve, Shift(*th), Q, d)) != base
    record(3, bad == 0, f"{150 - bad}/150 shifted counts equal the unshifted count")
    assert bad == 0


def test_c04_upper_bound_surrogate():
    t = time.perf_counter()
    grid, counts = t2_counts()
    rep = verify_upper(make_curve("parabola@[0,1]"), Shift(*IRR), grid, counts=counts)
    top = max(r for (Q, _), r in zip(grid, rep.ratios) if Q > max(T2_Q) / 10)
    bottom = max(r for (Q, _), r in zip(grid, rep.ratios) if Q < 10 * min(T2_Q))
    line = make_curve("line@[0,1]")
    lr = verify_upper(line, Shift(0, 0), [(1024, 2**-4), (1024, 2**-8)], force=True).ratios
    growth = lr[1] / lr[0]
    el = time.perf_counter() - t
    main_ok = rep.sup_ratio <= 10 and top <= 1.5 * bottom
    ok = main_ok and growth >= 4 and el < 300
    record(4, ok, f"sup {rep.sup_ratio:.3f} <= 10: {rep.sup_ratio <= 10}; top decade {top:.3f} vs 1.5 x bottom "
                  f"{1.5 * bottom:.3f}: {top <= 1.5 * bottom}; line control growth {growth:.2f}x (needs >= 4x); "
                  f"{el:.0f} s")
    assert main_ok, "parabola bound surrogate"
    assert growth >= 4, f"line ratio grows only {growth:.2f}x between delta=2^-4 and 2^-8"


def test_c05_lower_bound_surrogate():
    grid, counts = t2_counts()
    par = make_curve("parabola@[0,1]")
    rep = verify_lower(par, Shift(*IRR), grid, REC.k1, REC.k2, REC.Q0, counts=counts)
    dens = [n / (3 * 1.0 * d * Q * Q) for (Q, d), n in zip(grid, counts) if d * Q * Q >= 1e4]
    ok = rep.inf_ratio >= 0.5 and all(0.4 <= r <= 2.5 for r in dens)
    record(5, ok, f"inf N/(dQ^2) = {rep.inf_ratio:.3f} over {sum(rep.admissible)} admissible cells; "
                  f"density ratio in [{min(dens):.3f}, {max(dens):.3f}] on {len(dens)} cells")
    assert ok


def test_c06_covering_surrogate():
    t = time.perf_counter()
    Qs = [2.0**k for k in range(5, 11)]
    ds = [2.0**-k for k in range(2, 9)]
    notes, ok = [], True
    for spec in ("parabola@[0,1]", "cubic@[1,2]", "exp@[0,1]"):
        rec = calibrate(make_curve(spec), CANONICAL_SHIFTS, None, Qs, ds)
        adm = [e for e in rec.evidence if e["admissible"]]
        good = all(e["ratio"] >= 0.5 for e in adm)
        ok &= good and len(adm) > 0
        notes.append(f"{spec} k1={rec.k1:g} k2={rec.k2:g} C1={rec.C1:g} Q0={rec.Q0:g} "
                     f"min ratio {min(e['ratio'] for e in adm):.3f}")
    # frozen record, cells beyond the calibration grid
    reps = check_record(make_curve("parabola@[0,1]"), REC, CANONICAL_SHIFTS, [2048.0], [2**-4, 2**-6, 2**-8])
    held = min(r.ratio for r in reps)
    ok &= held >= 0.5
    notes.append(f"frozen record at Q=2048: min ratio {held:.3f} over {len(reps)} cells")
    record(6, ok, "; ".join(notes) + f"; {time.perf_counter() - t:.0f} s")
    assert ok


def test_c07_minkowski():
    rng = np.random.default_rng(7)
    worst_prod, worst_vol, n = 0.0, 0.0, 0
    for i in range(1000):
        curve = make_curve(CURVES[i % len(CURVES)])
        x = float(rng.uniform(curve.a, curve.b))
        Q = float(np.exp(rng.uniform(math.log(64), math.log(8192))))
        d = float(2.0 ** rng.uniform(math.log2(1 / Q), -1))
        body = build_body(curve, x, Q, d, 0.16)
        want = 8 * curve.c2 / abs(float(curve.d2(x)))
        worst_vol = max(worst_vol, abs(body.volume / want - 1))
        m = successive_minima(body)
        worst_prod = max(worst_prod, m.product)
        n += 1
    ok = worst_prod <= 8 * (1 + 1e-9) and worst_vol <= 1e-9
    record(7, ok, f"{n} bodies, max product {worst_prod:.6f} <= 8, max volume rel. error {worst_vol:.2e}")
    assert ok


def test_c08_witness_soundness():
    par = make_curve("parabola@[0,1]")
    Q, d, c0 = 8192.0, 0.5, 0.16
    th = Shift(*IRR)
    lam, K, T = bdv_parameters(par, Q, d, c0)
    xs = [float(x) for x in np.linspace(0.125, 0.875, 2000)]
    good = [x for x in xs if not in_bad_set(par, x, lam, K, T)][:1000]
    fails, missing = [], 0
    for x in good:
        try:
            w = construct_witness(par, th, (0, 1), x, Q, d, c0)
        except Exception as e:  # any failure counts against the criterion
            fails.append((x, repr(e)))
            continue
        if not all(w.checks.values()):
            fails.append((x, w.checks))
            continue
        xq = (w.p1 + th.theta1) / w.q
        q, p, _ = enumerate_arrays(CountQuery(par, th, Q, d, (max(0.0, xq - 1e-6), min(1.0, xq + 1e-6))))
        missing += (w.q, w.p1) not in set(zip(q.tolist(), p.tolist()))
    ok = len(good) == 1000 and not fails and missing == 0
    record(8, ok, f"{len(good) - len(fails)}/{len(good)} good points give verified witnesses, "
                  f"{missing} missing from enumerate_points (Q={Q:g}, delta={d}, c0={c0})")
    assert ok, fails[:3]


def test_c09_fejer_majorant():
    rng = np.random.default_rng(9)
    d = rng.uniform(1e-4, 0.5, 10**5)
    x = rng.uniform(-1, 1, 10**5) * d + rng.integers(-5, 6, 10**5)
    M = np.floor(1 / (2 * d)).astype(int)
    k = np.array([fejer_eval(int(m), xx) for m, xx in zip(M, x)])
    floor_min = float(k.min())
    rng2 = np.random.default_rng(19)
    viol = 0
    for i in range(50):
        curve = make_curve(CURVES[i % len(CURVES)])
        Q = float(np.exp(rng2.uniform(0, math.log(300))))
        dd = float(2.0 ** rng2.uniform(-10, -1))
        q = CountQuery(curve, Shift(*CANONICAL_SHIFTS[i % 10]), Q, dd)
        viol += math.pi / 2 * smoothed_count(q) < count_naive(q)
    ok_floor = floor_min >= 2 / math.pi
    record(9, ok_floor and viol == 0,
           f"min K_M on |x| <= delta is {floor_min:.4f} vs 2/pi = {2 / math.pi:.4f} "
           f"((2/pi)^2 = {(2 / math.pi) ** 2:.4f}); majorant held on {50 - viol}/50 queries")
    assert viol == 0, "(pi/2) S >= N"
    assert ok_floor, f"K_M dips to {floor_min:.4f} < 2/pi"


def test_c10_series_and_dimension():
    wrong = checked = 0
    for v in np.linspace(0.05, 1.5, 20):
        for s in np.linspace(0.505, 1.0, 20):
            gap = s - series_threshold(v)
            if abs(gap) < 0.02:
                continue
            checked += 1
            want = "converges" if gap > 0 else "diverges"
            wrong += series_classify(ApproxFunction.power(v), s, "curve").verdict != want
    spots = [abs(dimension_formula(0.5) - 1), abs(dimension_formula(0.8) - 2 / 3),
             abs(dimension_formula(0.75) - 5 / 7)]
    ok = wrong == 0 and max(spots) <= 1e-12
    record(10, ok, f"{checked - wrong}/{checked} off-band verdicts match; max spot error {max(spots):.1e}")
    assert ok


def test_c11_scaling_regression():
    grid, counts = t2_counts()
    mask = [REC.k1 / Q <= d <= REC.k2 and Q > REC.Q0 for Q, d in grid]
    X = np.array([[Q, d] for (Q, d), m in zip(grid, mask) if m])
    y = np.array([n for n, m in zip(counts, mask) if m], float)
    est = ScalingLawRegressor().fit(X, y)
    aQ, ad = est.coef_
    ok = 1.9 <= aQ <= 2.1 and 0.9 <= ad <= 1.1
    record(11, ok, f"alpha_Q = {aQ:.4f}, alpha_delta = {ad:.4f} from {est.n_cells_} cells")
    assert ok


def test_c12_performance(tmp_path):
    par = make_curve("parabola@[0,1]")
    t = time.perf_counter()
    try:
        count_fast(CountQuery(par, Shift(0, 0), 1e5, 1e-3))
        fast_el, fast_note = time.perf_counter() - t, ""
    except BudgetExceededError as e:
        fast_el, fast_note = math.inf, f" (refused: {e})"
    t = time.perf_counter()
    count_naive(CountQuery(par, Shift(0, 0), 1e4, 1e-3))
    naive_el = time.perf_counter() - t
    base = dict(curve="parabola@[0,1]", shifts=[list(IRR)], Q=T2_Q, delta=T2_DELTA, modes=["upper"])
    t = time.perf_counter()
    _, rows8 = run_scan(ScanConfig(**base, threads=8))
    scan_el = time.perf_counter() - t
    _, rows1 = run_scan(ScanConfig(**base, threads=1))
    same = rows8 == rows1
    ok = fast_el < 1 and naive_el < 10 and scan_el < 120 and same
    record(12, ok, f"count_fast Q=1e5: {fast_el:.2f} s{fast_note} (limit 1 s); count_naive Q=1e4: "
                   f"{naive_el:.2f} s (limit 10 s); 8-thread scan {scan_el:.1f} s (limit 120 s), "
                   f"identical to serial: {same}")
    assert naive_el < 10 and scan_el < 120 and same
    assert fast_el < 1, "count_fast at Q=1e5"


def test_c13_boxdim_diagnostic():
    par = make_curve("parabola@[0,1]")
    diag = {v: boxdim_diagnostic(par, Shift(0, 0), v, 2**14) for v in (0.5, 0.6, 0.7, 0.8)}
    slopes = [diag[v].slope for v in sorted(diag)]
    close = all(abs(diag[v].slope - dimension_formula(v)) <= 0.2 for v in (0.5, 0.8))
    mono = all(a > b for a, b in zip(slopes, slopes[1:]))
    record(13, close and mono, "slopes " + ", ".join(f"v={v}: {diag[v].slope:.3f} (target {diag[v].target:.3f})"
                                                     for v in sorted(diag)) + f"; decreasing: {mono}", soft=True)
