import numpy as np
import pytest

from nearcurve import (BadPointError, BudgetExceededError, CountQuery, DegenerateCurvatureError, DomainError,
                       Shift, make_curve)
from nearcurve.counting import enumerate_arrays
from nearcurve.dual_lattice import (ConvexBody3, _solve3, bdv_parameters, build_body, construct_witness,
                                    dual_map_eval, estimate_bad_measure, in_bad_set, successive_minima)

from conftest import IRR, load_fixture

LAT = load_fixture("lattice.json")


@pytest.mark.parametrize("spec,x,want", [
    ("parabola@[0,1]", 1.0, (1, -2, 2, -2)),
    ("parabola@[0,1]", 0.0, (0, 0, 0, -2)),
    ("exp@[0,1]", 0.0, (-1, -1, 0, -1)),
])
def test_dual_map(spec, x, want):
    g = dual_map_eval(make_curve(spec), x)
    assert (g.g1, g.g2, g.g1p, g.g2p) == pytest.approx(want)


def test_dual_map_outside(parabola):
    with pytest.raises(DomainError):
        dual_map_eval(parabola, 1.5)


def test_wronskian_identity():
    # g1' g2'' - g2' g1'' = f''^2, with g1'' = f'' + x f''' and g2'' = -f'''
    for spec in ("parabola@[0,1]", "exp@[0,1]", "cubic@[1,2]", "circle-arc@[-0.5,0.5]"):
        c = make_curve(spec)
        for x in np.linspace(c.a, c.b, 7):
            g = dual_map_eval(c, x)
            g1pp = c.d2(x) + x * c.d3(x)
            g2pp = -c.d3(x)
            assert g.g1p * g2pp - g.g2p * g1pp == pytest.approx(c.d2(x) ** 2, rel=1e-12, abs=1e-12)


def test_body_volume_and_bdv(parabola):
    for x, Q, d in [(0.3, 512, 0.1), (0.77, 4096, 2**-6)]:
        b = build_body(parabola, x, Q, d, 0.16)
        assert b.volume == pytest.approx(8.0, rel=1e-9)
        lam, K, T = b.params["bdv"]
        assert lam * K * T == pytest.approx(2 * 0.16, rel=1e-12)


def test_body_fixture(parabola):
    fx = LAT["body"]
    b = build_body(parabola, fx["x"], fx["Q"], fx["delta"], fx["c0"])
    assert list(b.bounds) == pytest.approx(fx["bounds"], rel=1e-15)
    assert [list(r) for r in b.rows] == fx["rows"]


def test_body_refusals(line, parabola):
    with pytest.raises(DegenerateCurvatureError):
        build_body(line, 0.5, 100, 0.1, 0.16)
    with pytest.raises(DomainError):
        build_body(parabola, 0.5, 100, 0.1, 1.5)


@pytest.mark.parametrize("bound,want", [(1.0, 1.0), (2.0, 0.5)])
def test_minima_identity_body(bound, want):
    body = ConvexBody3(((1, 0, 0), (0, 1, 0), (0, 0, 1)), (bound,) * 3)
    m = successive_minima(body)
    assert m.minima == pytest.approx((want,) * 3)
    assert m.volume == pytest.approx(8 * bound**3)
    assert m.product == pytest.approx(8.0)


def test_minima_fixture(parabola):
    fx = LAT["minima"]
    m = successive_minima(build_body(parabola, fx["x"], fx["Q"], fx["delta"], fx["c0"]))
    assert m.minima == pytest.approx(fx["minima"], rel=1e-12)
    assert m.minkowski_ok
    (a, b, c), (d, e, f), (g, h, i) = m.vectors
    assert a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g) != 0
    body = build_body(parabola, fx["x"], fx["Q"], fx["delta"], fx["c0"])
    for v, lam in zip(m.vectors, m.minima):
        assert body.norm(v)[0] == pytest.approx(lam, rel=1e-9)


def test_minima_budget(parabola):
    with pytest.raises(BudgetExceededError):
        successive_minima(build_body(parabola, 0.5, 256, 1 / 32, 0.16), budget=10**4)


def test_bad_set_examples(parabola):
    assert in_bad_set(parabola, 0.3, 1.0, 0.5, 1.0)
    with pytest.raises(DomainError):
        in_bad_set(parabola, 0.3, 0.1, 0.5, 0.5)
    fx = LAT["bad_set"]
    assert in_bad_set(parabola, fx["x"], *fx["bdv"]) is fx["member"]


def test_bad_measure(parabola):
    est, _ = estimate_bad_measure(parabola, (0, 1), 1.0, 1.0, 1.0)
    assert est == 1.0
    est, _ = estimate_bad_measure(parabola, (0.1, 0.9), 1e-6, 1e-3, 1.0)
    assert est == 0.0
    est, bound = estimate_bad_measure(parabola, (0, 1), *bdv_parameters(parabola, 8192, 0.5, 0.16))
    assert est <= bound
    with pytest.raises(DomainError):
        estimate_bad_measure(parabola, (0, 1), 0.5, 1, 1, grid_n=10)


def test_solve3():
    A = [[2, 1, 0], [1, 3, 1], [0, 1, 4]]
    x = _solve3(A, [1, 2, 3])
    assert np.allclose(np.array(A) @ x, [1, 2, 3])
    with pytest.raises(Exception):
        _solve3([[1, 2, 3], [2, 4, 6], [0, 0, 1]], [1, 1, 1])


def test_witness_fixture(parabola):
    fx = LAT["witness"]
    w = construct_witness(parabola, Shift(0, 0), (0, 1), fx["x"], fx["Q"], fx["delta"], fx["c0"])
    assert list(w.witness) == fx["witness"] and list(w.t) == fx["t"]
    assert all(w.checks.values())
    assert fx["Q"] <= w.q <= 2 * fx["Q"] and w.residual < fx["delta"]
    assert all(abs(e - t) < 1 for e, t in zip(w.eta, w.t))


def test_witness_cross_module(parabola):
    fx = LAT["witness"]
    th = Shift(*IRR)
    w = construct_witness(parabola, th, (0, 1), fx["x"], fx["Q"], fx["delta"], fx["c0"])
    xq = (w.p1 + th.theta1) / w.q
    q, p, _ = enumerate_arrays(CountQuery(parabola, th, fx["Q"], fx["delta"], (xq - 1e-5, xq + 1e-5)))
    assert (w.q, w.p1) in set(zip(q.tolist(), p.tolist()))


def test_witness_gates(parabola):
    with pytest.raises(BadPointError):
        construct_witness(parabola, Shift(0, 0), (0, 1), 0.5, 8192, 0.5, 0.16)
    with pytest.raises(DomainError):
        construct_witness(parabola, Shift(0, 0), (0, 1), 0.95, 8192, 0.5, 0.16)
