"""Planar curves given as graphs of C^3 functions on a compact interval."""

from __future__ import annotations

import math
import re
from functools import lru_cache
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .exceptions import DegenerateCurvatureError, DomainError, SpecError

MAX_PIECES = 64

# default intervals when a builtin spec omits one
DEFAULT_INTERVALS = {
    "parabola": (0.0, 1.0),
    "line": (0.0, 1.0),
    "cubic": (1.0, 2.0),
    "exp": (0.0, 1.0),
    "circle-arc": (-0.5, 0.5),
}


class _Poly:
    """Horner evaluation of a real polynomial, lowest coefficient first."""

    def __init__(self, coeffs):
        coeffs = [float(c) for c in coeffs]
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs.pop()
        self.coeffs = tuple(coeffs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.coeffs[-1])
        for c in reversed(self.coeffs[:-1]):
            out = out * x + c
        return out

    def deriv(self):
        if len(self.coeffs) == 1:
            return _Poly([0.0])
        return _Poly(P.polyder(np.array(self.coeffs)))

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __repr__(self):
        return f"_Poly({list(self.coeffs)})"


class _Exp:
    def __call__(self, x):
        return np.exp(np.asarray(x, dtype=float))


class _Circle:
    """Upper unit semicircle sqrt(1 - x^2) and its derivatives."""

    def __init__(self, order):
        self.order = order

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        w = 1.0 - x * x
        if self.order == 0:
            return np.sqrt(w)
        if self.order == 1:
            return -x / np.sqrt(w)
        if self.order == 2:
            return -1.0 / (w * np.sqrt(w))
        return -3.0 * x / (w * w * np.sqrt(w))


def _inv_parabola(y, increasing):
    r = np.sqrt(np.maximum(np.asarray(y, dtype=float), 0.0))
    return r if increasing else -r


def _inv_line(y, increasing):
    return np.asarray(y, dtype=float)


def _inv_cubic(y, increasing):
    return np.cbrt(np.asarray(y, dtype=float))


def _inv_exp(y, increasing):
    return np.log(np.maximum(np.asarray(y, dtype=float), np.finfo(float).tiny))


def _inv_circle(y, increasing):
    y = np.clip(np.asarray(y, dtype=float), -1.0, 1.0)
    r = np.sqrt(np.maximum(1.0 - y * y, 0.0))
    return -r if increasing else r


@dataclass(frozen=True)
class PlanarCurve:
    """Graph of f over the closed interval [a, b].

    ``c1``/``c2`` are certified bounds c1 <= |f''| <= c2; both are ``None``
    for degenerate curves (f'' vanishing somewhere on the interval).
    ``inverse(y, increasing)`` is an optional closed-form inverse on a
    monotone piece; counting falls back to bisection without it.
    """

    name: str
    a: float
    b: float
    f: Callable
    d1: Callable
    d2: Callable
    d3: Callable
    c1: Optional[float] = None
    c2: Optional[float] = None
    lip_exponent: Optional[float] = 1.0
    inverse: Optional[Callable] = field(default=None, repr=False, compare=False)

    @property
    def domain(self):
        return (self.a, self.b)

    @property
    def degenerate(self):
        return self.c1 is None

    @property
    def spec(self):
        return f"{self.name}@[{self.a!r},{self.b!r}]"

    def contains(self, x):
        return self.a <= x <= self.b

    def restricted(self, lo, hi):
        """Same curve on a subinterval, with curvature bounds recomputed."""
        if not (self.a <= lo < hi <= self.b):
            raise DomainError(f"[{lo}, {hi}] is not a subinterval of [{self.a}, {self.b}]")
        sub = replace(self, a=float(lo), b=float(hi), c1=None, c2=None)
        try:
            c1, c2 = curvature_bounds(sub)
        except DegenerateCurvatureError:
            return sub
        return replace(sub, c1=c1, c2=c2)


@dataclass(frozen=True)
class MonotonePiece:
    lo: float
    hi: float
    direction: str  # "increasing", "decreasing" or "constant"
    f_range: tuple

    @property
    def increasing(self):
        return self.direction == "increasing"


_INTERVAL_RE = re.compile(r"^\s*\[\s*([^,\]]+)\s*,\s*([^\]]+)\]\s*$")


def _parse_interval(text):
    m = _INTERVAL_RE.match(text)
    if not m:
        raise SpecError(f"malformed interval {text!r}; expected [a,b]")
    try:
        a, b = float(m.group(1)), float(m.group(2))
    except ValueError as exc:
        raise SpecError(f"malformed interval {text!r}") from exc
    return a, b


def _split_spec(spec):
    spec = spec.strip()
    for sep in ("@", " on "):
        if sep in spec:
            head, tail = spec.split(sep, 1)
            return head.strip(), _parse_interval(tail)
    return spec, None


def _builtin_parts(name):
    if name == "parabola":
        p = _Poly([0, 0, 1])
        return p, _inv_parabola
    if name == "line":
        return _Poly([0, 1]), _inv_line
    if name == "cubic":
        return _Poly([0, 0, 0, 1]), _inv_cubic
    if name.startswith("poly:"):
        body = name[len("poly:"):].strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise SpecError(f"malformed polynomial spec {name!r}")
        try:
            coeffs = [float(c) for c in body[1:-1].split(",") if c.strip()]
        except ValueError as exc:
            raise SpecError(f"malformed polynomial coefficients in {name!r}") from exc
        if not coeffs:
            raise SpecError("polynomial needs at least one coefficient")
        p = _Poly(coeffs)
        inv = None
        if p.degree == 1 and p.coeffs[1] != 0.0:
            c0, c1 = p.coeffs
            inv = lambda y, increasing, c0=c0, c1=c1: (np.asarray(y, dtype=float) - c0) / c1  # noqa: E731
        elif p.coeffs == (0.0, 0.0, 1.0):
            inv = _inv_parabola
        elif p.coeffs == (0.0, 0.0, 0.0, 1.0):
            inv = _inv_cubic
        return p, inv
    return None, None


def make_curve(spec: str, lip_exponent: Optional[float] = 1.0) -> PlanarCurve:
    """Build a curve from ``name@[a,b]`` or ``poly:[c0,c1,...]@[a,b]``.

    Builtins: parabola (x^2), line (x), cubic (x^3), exp (e^x) and
    circle-arc (sqrt(1-x^2)). Curvature bounds are attached when f'' does
    not vanish on the interval; otherwise the curve is flagged degenerate.
    """
    name, interval = _split_spec(spec)
    if interval is None:
        if name not in DEFAULT_INTERVALS:
            raise SpecError(f"curve spec {spec!r} needs an interval, e.g. {name}@[0,1]")
        interval = DEFAULT_INTERVALS[name]
    a, b = interval
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"interval [{a}, {b}] is unbounded")
    if not a < b:
        raise DomainError(f"interval [{a}, {b}] is empty")

    poly, inverse = _builtin_parts(name)
    if poly is not None:
        d1 = poly.deriv()
        d2 = d1.deriv()
        d3 = d2.deriv()
        f = poly
        label = name if not name.startswith("poly:") else "poly:[" + ",".join(repr(c) for c in poly.coeffs) + "]"
    elif name == "exp":
        f = d1 = d2 = d3 = _Exp()
        inverse = _inv_exp
        label = name
    elif name == "circle-arc":
        if a <= -1.0 or b >= 1.0:
            raise DomainError("circle-arc needs an interval inside (-1, 1)")
        f, d1, d2, d3 = (_Circle(k) for k in range(4))
        inverse = _inv_circle
        label = name
    else:
        raise SpecError(f"unknown curve {name!r}; builtins are {sorted(DEFAULT_INTERVALS)} or poly:[...]")

    grid = np.linspace(a, b, 1001)
    for g in (f, d1, d2, d3):
        if not np.all(np.isfinite(g(grid))):
            raise DomainError(f"curve {spec!r} is not finite on [{a}, {b}]")

    curve = PlanarCurve(label, float(a), float(b), f, d1, d2, d3,
                        lip_exponent=lip_exponent, inverse=inverse)
    try:
        c1, c2 = curvature_bounds(curve)
    except DegenerateCurvatureError:
        return curve
    return replace(curve, c1=c1, c2=c2)


def curvature_bounds(curve: PlanarCurve, tol: float = 5e-7):
    """Certified (c1, c2) with c1 <= |f''| <= c2 on the curve's interval.

    Grid extrema of |f''| are widened by max|f'''| * h / 2, the largest
    amount |f''| can move between a point and its nearest grid node.
    """
    a, b = curve.a, curve.b
    coarse = np.linspace(a, b, 4097)
    m3 = float(np.max(np.abs(curve.d3(coarse))))
    # safety factor on the sampled |f'''| maximum
    m3 *= 1.01
    n = 4097
    if m3 > 0.0:
        n = int(min(4_000_001, max(4097, math.ceil(m3 * (b - a) / (2.0 * tol)) + 1)))
    x = np.linspace(a, b, n)
    d2 = curve.d2(x)
    if np.any(d2 == 0.0) or (np.any(d2 > 0) and np.any(d2 < 0)):
        raise DegenerateCurvatureError(f"f'' vanishes or changes sign on [{a}, {b}]")
    h = (b - a) / (n - 1)
    widen = m3 * h / 2.0
    absd2 = np.abs(d2)
    c1 = float(absd2.min()) - widen
    c2 = float(absd2.max()) + widen
    if c1 <= 0.0:
        raise DegenerateCurvatureError(f"|f''| is not bounded away from zero on [{a}, {b}]")
    return c1, c2


def check_derivatives(curve: PlanarCurve, n: int = 1000, rtol: float = 1e-6) -> bool:
    """Compare d1/d2/d3 with central differences of the lower derivative."""
    a, b = curve.a, curve.b
    h = 1e-5 * max(1.0, abs(a), abs(b))
    x = np.linspace(a + h, b - h, n)
    pairs = ((curve.f, curve.d1), (curve.d1, curve.d2), (curve.d2, curve.d3))
    for g, dg in pairs:
        fd = (g(x + h) - g(x - h)) / (2.0 * h)
        exact = dg(x)
        if np.any(np.abs(fd - exact) > rtol * np.maximum(1.0, np.abs(exact))):
            return False
    return True


@lru_cache(maxsize=256)
def monotone_pieces(curve: PlanarCurve, n_grid: int = 4097) -> list:
    """Split the interval at sign changes of f' into strictly monotone pieces."""
    a, b = curve.a, curve.b
    x = np.linspace(a, b, n_grid)
    d1 = curve.d1(x)
    if np.all(d1 == 0.0):
        fa = float(curve.f(np.array([a]))[0])
        return [MonotonePiece(a, b, "constant", (fa, fa))]

    scalar = lambda t: float(curve.d1(np.array([t]))[0])  # noqa: E731
    cuts = []
    sign = np.sign(d1)
    nz = np.flatnonzero(sign != 0)
    for i, j in zip(nz[:-1], nz[1:]):
        if sign[i] == sign[j]:
            continue
        if j == i + 1:
            root = brentq(scalar, x[i], x[j], xtol=1e-15, rtol=4 * np.finfo(float).eps)
        else:
            # exact zeros on the grid between opposite signs
            root = float(x[(i + j) // 2])
        cuts.append(root)
        if len(cuts) >= MAX_PIECES:
            raise DomainError(f"f' changes sign more than {MAX_PIECES - 1} times; refusing pathological curve")

    bounds = [a, *cuts, b]
    pieces = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        xs = np.linspace(lo, hi, 33)
        direction = "increasing" if np.mean(curve.d1(xs)) > 0 else "decreasing"
        flo, fhi = (float(v) for v in curve.f(np.array([lo, hi])))
        pieces.append(MonotonePiece(lo, hi, direction, (min(flo, fhi), max(flo, fhi))))
    return pieces


def invert_on_piece(curve: PlanarCurve, piece: MonotonePiece, y, max_iter: int = 80):
    """Solve f(x) = y on a monotone piece, clipping to the piece.

    Values of ``y`` outside the piece's range map to the matching endpoint.
    Without a closed-form inverse this runs Newton steps from a tabulated
    guess, falling back to bisection whenever a step leaves the bracket.
    """
    y = np.asarray(y, dtype=float)
    inc = piece.increasing
    if curve.inverse is not None:
        x = curve.inverse(y, inc)
        return np.clip(x, piece.lo, piece.hi)
    xt, ft = _inverse_table(curve, piece)
    yc = np.clip(y, ft[0], ft[-1]).ravel()
    j = np.clip(np.searchsorted(ft, yc), 1, len(ft) - 1)
    lo, hi = xt[j - 1], xt[j]
    if not inc:
        lo, hi = hi, lo
    # invariant: sgn * (f(lo) - y) <= 0 <= sgn * (f(hi) - y)
    x = np.interp(yc, ft, xt)
    sgn = 1.0 if inc else -1.0
    eps = 1e-13  # window ends only need to sit far inside the adjudication margin

    def newton(xa, ya, la, ha):
        g = sgn * (curve.f(xa) - ya)
        below = g < 0
        la = np.where(below, xa, la)
        ha = np.where(below, ha, xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xa - g / (sgn * curve.d1(xa))
        inside = (step - la) * (step - ha) < 0
        nxt = np.where(inside, step, 0.5 * (la + ha))
        nxt = np.where(g == 0, xa, nxt)
        tol = eps * np.maximum(1.0, np.abs(xa))
        done = (np.abs(nxt - xa) <= tol) | (np.abs(ha - la) <= tol)
        return nxt, la, ha, done

    # two full-width steps settle almost everything from the table guess
    for _ in range(2):
        x, lo, hi, done = newton(x, yc, lo, hi)
    act = np.flatnonzero(~done)
    for _ in range(max_iter):
        if len(act) == 0:
            break
        nxt, la, ha, done = newton(x[act], yc[act], lo[act], hi[act])
        x[act], lo[act], hi[act] = nxt, la, ha
        act = act[~done]
    return np.clip(x, piece.lo, piece.hi).reshape(y.shape)


@lru_cache(maxsize=256)
def _inverse_table(curve, piece, n=4097):
    xt = np.linspace(piece.lo, piece.hi, n)
    ft = curve.f(xt)
    if not piece.increasing:
        xt, ft = xt[::-1].copy(), ft[::-1].copy()
    # float evaluation can wobble near flat ends; keep the table sorted
    ft = np.maximum.accumulate(ft)
    return xt, ft
