"""Lattice side of the covering argument, made executable.

At a point x the dual map g(x) = (x f'(x) - f(x), -f'(x)) defines three
linear forms in (q, p1, p2). A parallelepiped cut out by those forms has
successive minima that we find by exhaustive enumeration (it is only
three-dimensional), and three short independent vectors from it are
combined into an integer triple (q, p1, p2) with (p1 + theta1)/q close to x
and q f((p1 + theta1)/q) close to p2 + theta2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .counting import Shift, _chunks_by_work, _expand, in_interval, within_band
from .curve import PlanarCurve
from .exceptions import (BadPointError, BudgetExceededError, DegenerateCurvatureError, DomainError,
                         WitnessConstructionError)

ENUM_BUDGET = 10**8
_BLOCK = 1 << 21
_REL = 1e-9


@dataclass(frozen=True)
class DualEval:
    x: float
    g1: float
    g2: float
    g1p: float
    g2p: float


def dual_map_eval(curve: PlanarCurve, x: float) -> DualEval:
    if not curve.contains(x):
        raise DomainError(f"x={x} lies outside [{curve.a}, {curve.b}]")
    f, d1, d2 = float(curve.f(x)), float(curve.d1(x)), float(curve.d2(x))
    ev = DualEval(x, x * d1 - f, -d1, x * d2, -d2)
    if abs(ev.g2p + d2) > 1e-12 * max(1.0, abs(d2)):
        raise WitnessConstructionError("g2' disagrees with -f''", "g2p=-f''")
    return ev


@dataclass(frozen=True)
class ConvexBody3:
    """{v in R^3 : |rows[i] . v| <= bounds[i]} for i = 0, 1, 2."""

    rows: tuple
    bounds: tuple
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = np.asarray(self.rows, dtype=float)
        b = np.asarray(self.bounds, dtype=float)
        if A.shape != (3, 3) or b.shape != (3,):
            raise DomainError("a body needs three rows of length three and three bounds")
        if np.any(~(b > 0)) or not np.all(np.isfinite(b)):
            raise DomainError(f"bounds must be positive and finite, got {self.bounds}")
        if abs(np.linalg.det(A)) <= 1e-14 * np.prod(np.linalg.norm(A, axis=1)):
            raise DomainError("rows are linearly dependent; the body is unbounded")

    @property
    def matrix(self):
        return np.asarray(self.rows, dtype=float)

    @property
    def volume(self):
        return 8.0 * float(np.prod(self.bounds)) / abs(float(np.linalg.det(self.matrix)))

    def norm(self, v):
        """Smallest dilate of the body containing v (rows of v are vectors)."""
        v = np.atleast_2d(np.asarray(v, dtype=float))
        return np.max(np.abs(v @ self.matrix.T) / np.asarray(self.bounds), axis=1)

    def contains(self, v, scale=1.0, rel=_REL):
        return self.norm(v) <= scale * (1 + rel)


def build_body(curve: PlanarCurve, x: float, Q: float, delta: float, c0: float) -> ConvexBody3:
    """Body with |G| <= c0^3 delta, |G'| <= c2/(c0^6 Q delta), |q| <= c0^3 Q."""
    if curve.degenerate:
        raise DegenerateCurvatureError(f"{curve.spec} has no curvature lower bound")
    if not 0 < c0 < 1:
        raise DomainError(f"c0 must lie in (0, 1), got {c0}")
    if Q < 1 or not 0 < delta <= 0.5:
        raise DomainError(f"need Q >= 1 and 0 < delta <= 1/2, got Q={Q}, delta={delta}")
    g = dual_map_eval(curve, x)
    lam, K, T = c0**3 * delta, curve.c2 / (c0**6 * Q * delta), c0**3 * Q
    rows = ((g.g1, g.g2, 1.0), (g.g1p, g.g2p, 0.0), (1.0, 0.0, 0.0))
    params = {"x": x, "Q": Q, "delta": delta, "c0": c0, "c2": curve.c2,
              "bdv": (lam, K, c0**4 * Q), "dual": g}
    return ConvexBody3(rows, (lam, K, T), params)


def bdv_parameters(curve: PlanarCurve, Q, delta, c0):
    """(lambda, K, T) of the exceptional set; lambda K T = c2 c0."""
    return c0**3 * delta, curve.c2 / (c0**6 * Q * delta), c0**4 * Q


@dataclass
class MinimaReport:
    minima: tuple
    vectors: tuple
    volume: float
    product: float

    @property
    def minkowski_ok(self):
        return self.product <= 8.0 * (1 + _REL)


def _lll(B, delta=0.99):
    """LLL-reduce the columns of B; returns the unimodular U with B U reduced."""
    B = np.array(B, dtype=float)
    n = B.shape[1]
    U = np.eye(n, dtype=np.int64)

    def gso(B):
        Bs = np.zeros_like(B)
        mu = np.zeros((n, n))
        for i in range(n):
            Bs[:, i] = B[:, i]
            for j in range(i):
                mu[i, j] = B[:, i] @ Bs[:, j] / (Bs[:, j] @ Bs[:, j])
                Bs[:, i] -= mu[i, j] * Bs[:, j]
        return Bs, mu

    k = 1
    for _ in range(10000):
        if k >= n:
            break
        Bs, mu = gso(B)
        for j in range(k - 1, -1, -1):
            r = int(np.rint(mu[k, j]))
            if r:
                B[:, k] -= r * B[:, j]
                U[:, k] -= r * U[:, j]
                Bs, mu = gso(B)
        if Bs[:, k] @ Bs[:, k] >= (delta - mu[k, k - 1] ** 2) * (Bs[:, k - 1] @ Bs[:, k - 1]):
            k += 1
        else:
            B[:, [k - 1, k]] = B[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            k = max(k - 1, 1)
    return U


def _slab(a, c, Rb):
    """Integer range of t with |a + c t| <= Rb (c != 0), vectorised over a."""
    lo = (-Rb - a) / c
    hi = (Rb - a) / c
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    pad = 1e-9 * (1 + np.abs(lo) + np.abs(hi))
    return np.ceil(lo - pad).astype(np.int64), np.floor(hi + pad).astype(np.int64)


def _scan(body: ConvexBody3, R: float, budget: int, U):
    """Yield chunks (V, norms) of nonzero integer v with norm <= R, one of each +-v.

    Enumeration runs over w with v = U w, where U is a unimodular change of
    basis; the box for w comes from the inverse of the transformed rows.
    """
    Mb = body.matrix / np.asarray(body.bounds)[:, None]
    C = Mb @ U  # |C w|_inf <= R
    # C can lose digits to cancellation; bound that error so slabs never cut
    # off a vector the exact norm test below would accept
    errC = 8 * np.finfo(float).eps * (np.abs(Mb) @ np.abs(U))
    box = R * np.abs(np.linalg.inv(C)).sum(axis=1)
    # the widest coordinate is the one solved per pair, not looped over
    order = np.argsort(box, kind="stable")
    C, U, box, errC = C[:, order], U[:, order], box[order], errC[:, order]
    box = np.floor(box * (1 + 1e-6) + 1e-9).astype(np.int64)
    Rs = R * (1 + 1e-9) + errC @ (box + 1)
    total = int(box[0] + 1) * int(2 * box[1] + 1)
    if total > budget:
        raise BudgetExceededError(f"enumeration needs {total:.3g} pairs at dilate {R:.3g}")
    w0 = np.arange(0, box[0] + 1, dtype=np.int64)
    w1 = np.arange(-box[1], box[1] + 1, dtype=np.int64)
    step = max(1, _BLOCK // len(w1))
    triples = 0
    for s in range(0, len(w0), step):
        a0 = np.repeat(w0[s:s + step], len(w1))
        a1 = np.tile(w1, len(w0[s:s + step]))
        lo = np.full(len(a0), -box[2], dtype=np.int64)
        hi = np.full(len(a0), box[2], dtype=np.int64)
        for i in range(3):
            if C[i, 2] != 0:
                l, h = _slab(C[i, 0] * a0 + C[i, 1] * a1, C[i, 2], Rs[i])
                lo, hi = np.maximum(lo, l), np.minimum(hi, h)
        n2 = np.maximum(hi - lo + 1, 0)
        triples += int(n2.sum())
        if triples > budget:
            raise BudgetExceededError(f"enumeration needs over {budget:.3g} triples at dilate {R:.3g}")
        for sl in _chunks_by_work(a0, n2):
            owner, a2 = _expand(lo[sl], n2[sl])
            W = np.column_stack([a0[sl][owner], a1[sl][owner], a2])
            lead = np.where(W[:, 0] != 0, W[:, 0], np.where(W[:, 1] != 0, W[:, 1], W[:, 2]))
            V = W[lead > 0] @ U.T
            nv = body.norm(V)
            keep = nv <= R * (1 + _REL)
            yield V[keep], nv[keep]


def _shortest(body, R, budget, U, admissible):
    """Shortest admissible vector within dilate R, or None."""
    best, best_n = None, np.inf
    for V, nv in _scan(body, R, budget, U):
        ok = admissible(V)
        if ok.any():
            # ties broken by the smaller coefficient sum, then lexicographically
            idx = np.flatnonzero(ok)
            keys = np.lexsort((V[idx, 2], V[idx, 1], V[idx, 0], np.abs(V[idx]).sum(axis=1), nv[idx]))
            k = idx[keys[0]]
            if nv[k] < best_n:
                best, best_n = V[k], float(nv[k])
    return best, best_n


def _minimum_beyond(body, R0, R_cap, budget, U, admissible):
    R = R0
    while True:
        v, n = _shortest(body, R, budget, U, admissible)
        if v is not None:
            return v, n
        if R >= R_cap:
            raise DomainError("enumeration failed to find independent vectors")
        R = min(2.0 * R, R_cap)


def successive_minima(body: ConvexBody3, budget: int = ENUM_BUDGET) -> MinimaReport:
    """lambda_1 <= lambda_2 <= lambda_3 by enumeration at growing dilates.

    Greedy: the shortest vector, then the shortest one off its line, then
    the shortest one off their plane.
    """
    U = _lll(body.matrix / np.asarray(body.bounds)[:, None])
    R_cap = float(body.norm(U.T).max())  # the reduced basis itself is independent
    vol = body.volume
    # a body of volume 8 R^3 V >= 8 holds a nonzero lattice point
    R = min(2.0 * vol ** (-1.0 / 3.0) * (1 + 1e-9), R_cap)
    v1, n1 = _minimum_beyond(body, R, R_cap, budget, U, lambda V: np.ones(len(V), bool))
    v2, n2 = _minimum_beyond(body, max(n1, 1e-300), R_cap, budget, U,
                             lambda V: np.any(np.cross(V, v1) != 0, axis=1))
    normal = np.cross(v1, v2)
    v3, n3 = _minimum_beyond(body, max(n2, 1e-300), R_cap, budget, U, lambda V: V @ normal != 0)
    mins = (n1, n2, n3)
    prod = n1 * n2 * n3 * vol
    vecs = tuple(tuple(int(c) for c in v) for v in (v1, v2, v3))
    rep = MinimaReport(mins, vecs, vol, prod)
    if not rep.minkowski_ok:
        raise WitnessConstructionError(f"lambda1 lambda2 lambda3 V = {prod:.6g} exceeds 8", "minkowski")
    return rep


# -- exceptional set ---------------------------------------------------------------

def _check_bdv(lam, K, T):
    if not (0 < lam <= 1 and T >= 1 and K > 0 and lam * K * T <= 1 + 1e-12):
        raise DomainError(f"need 0 < lambda <= 1, T >= 1, K > 0, lambda K T <= 1; "
                          f"got lambda={lam:.4g}, K={K:.4g}, T={T:.4g}")


def in_bad_set(curve: PlanarCurve, x: float, lam: float, K: float, T: float,
               budget: int = ENUM_BUDGET) -> bool:
    """Is there a nonzero integer (q, p1, p2) with |G| <= lam, |G'| <= K, |q| <= T at x?"""
    _check_bdv(lam, K, T)
    if lam >= 1:
        return True  # (0, 0, 1)
    g = dual_map_eval(curve, x)
    q = np.arange(0, int(math.floor(T + 1e-12)) + 1, dtype=np.int64)
    if g.g2p == 0:
        raise DegenerateCurvatureError(f"f'' vanishes at x={x}")
    lo, hi = _slab(g.g1p * q, g.g2p, K)
    lo = np.where(q == 0, np.maximum(lo, 1), lo)  # (0, -p1) duplicates (0, p1)
    n = np.maximum(hi - lo + 1, 0)
    if int(n.sum()) > budget:
        raise BudgetExceededError(f"bad-set test needs {int(n.sum()):.3g} pairs")
    owner, p1 = _expand(lo, n)
    s = q[owner] * g.g1 + p1 * g.g2
    return bool(np.any(np.abs(s - np.rint(s)) <= lam))


def estimate_bad_measure(curve: PlanarCurve, J, lam, K, T, grid_n: int = 1000, C: float = 10.0):
    """(sampled |B| on J, the bound C max(lam^1/3, (lam K T)^1/9) |J|)."""
    if grid_n < 1000:
        raise DomainError("grid_n must be at least 1000")
    _check_bdv(lam, K, T)
    lo, hi = float(J[0]), float(J[1])
    xs = np.linspace(lo, hi, grid_n)
    hits = sum(in_bad_set(curve, float(x), lam, K, T) for x in xs)
    width = hi - lo
    bound = C * max(lam ** (1 / 3), (lam * K * T) ** (1 / 9)) * width
    return hits / grid_n * width, bound


# -- witness -----------------------------------------------------------------------

@dataclass
class WitnessReport:
    witness: tuple
    eta: tuple
    t: tuple
    base_vectors: tuple
    G: tuple
    Gp: tuple
    residual: float
    x_distance: float
    x: float
    Q: float
    delta: float
    c0: float
    C1: float
    minima: tuple
    radii: dict
    checks: dict

    @property
    def q(self):
        return self.witness[0]

    @property
    def p1(self):
        return self.witness[1]


def _solve3(M, rhs):
    """Gaussian elimination with partial pivoting and a conditioning gate."""
    A = np.array(M, dtype=float)
    y = np.array(rhs, dtype=float)
    scale = np.prod(np.linalg.norm(A, axis=1))
    det = 1.0
    for k in range(3):
        piv = k + int(np.argmax(np.abs(A[k:, k])))
        if piv != k:
            A[[k, piv]] = A[[piv, k]]
            y[[k, piv]] = y[[piv, k]]
            det = -det
        det *= A[k, k]
        if A[k, k] == 0:
            break
        for i in range(k + 1, 3):
            m = A[i, k] / A[k, k]
            A[i, k:] -= m * A[k, k:]
            y[i] -= m * y[k]
    if not abs(det) > 1e-10 * scale:
        raise WitnessConstructionError(f"system is ill-conditioned (det={det:.3g})", "det!=0")
    eta = np.zeros(3)
    for k in (2, 1, 0):
        eta[k] = (y[k] - A[k, k + 1:] @ eta[k + 1:]) / A[k, k]
    return eta


def proof_C1(curve: PlanarCurve, c0: float) -> float:
    """3 c2 / (c1 c0^8)."""
    return 3.0 * curve.c2 / (curve.c1 * c0**8)


def construct_witness(curve: PlanarCurve, shift: Shift, J, x: float, Q: float, delta: float,
                      c0: float, C1: Optional[float] = None, budget: int = ENUM_BUDGET) -> WitnessReport:
    """Integer (q, p1, p2) near x built from three short lattice vectors."""
    lo, hi = float(J[0]), float(J[1])
    mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
    if not abs(x - mid) <= 0.75 * half:
        raise DomainError(f"x={x} lies outside (3/4)J")
    body = build_body(curve, x, Q, delta, c0)
    lam, K, T = bdv_parameters(curve, Q, delta, c0)
    if in_bad_set(curve, x, lam, K, T, budget):
        raise BadPointError(f"x={x} is in the exceptional set for Q={Q}, delta={delta}, c0={c0}")
    C1 = proof_C1(curve, c0) if C1 is None else C1
    mins = successive_minima(body, budget)
    if mins.minima[0] < c0 * (1 - _REL):
        raise WitnessConstructionError(f"lambda1={mins.minima[0]:.6g} < c0 at a good point", "lambda1>=c0")
    if mins.minima[2] > c0**-2 * (1 + _REL):
        raise WitnessConstructionError(f"lambda3={mins.minima[2]:.6g} > c0^-2", "lambda3<=c0^-2")

    g = body.params["dual"]
    base = []
    for v in mins.vectors:
        v = np.asarray(v, dtype=np.int64)
        base.append(-v if v[0] < 0 else v)  # sign is free; keep q^(i) >= 0
    base = np.asarray(base)
    G = base[:, 0] * g.g1 + base[:, 1] * g.g2 + base[:, 2]
    Gp = base[:, 0] * g.g1p + base[:, 1] * g.g2p
    tol = 1 + _REL
    small = (np.all(np.abs(G) <= c0 * delta * tol)
             and np.all(np.abs(Gp) <= curve.c2 / (c0**8 * Q * delta) * tol)
             and np.all((base[:, 0] >= 0) & (base[:, 0] <= c0 * Q * tol)))
    if not small:
        raise WitnessConstructionError("base vectors do not satisfy the shrunken system", "short-vectors")

    th1, th2 = shift.theta1, shift.theta2
    d1, d2 = float(curve.d1(x)), float(curve.d2(x))
    eta = _solve3([G, Gp, base[:, 0].astype(float)], [th1 * d1 - th2, th1 * d2, 2.0 * Q])
    t = np.where(base[:, 0] >= 0, np.floor(eta), np.ceil(eta)).astype(np.int64)
    a = t @ base
    q, p1, p2 = (int(c) for c in a)

    xq = (p1 + th1) / q if q else float("nan")
    fx = float(curve.f(xq)) if q and curve.contains(xq) else float("nan")
    u = q * fx - th2
    residual = abs(u - p2)
    x_distance = abs(x - xq)
    bound = C1 / (Q * Q * delta)
    checks = {
        "Q<=q<=2Q": bool(Q <= q <= 2 * Q),
        "x_distance<=C1/(Q^2 delta)": bool(x_distance <= bound),
        "(p1+theta1)/q in J": bool(q > 0 and in_interval(xq, lo, hi)),
        "residual<delta": bool(residual < delta and within_band(u, delta)),
        "|eta-t|<1": bool(np.all(np.abs(eta - t) < 1)),
    }
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        raise WitnessConstructionError(
            f"postcondition {failed[0]} failed at x={x} (q={q}, p1={p1}, residual={residual:.3g})", failed[0])
    return WitnessReport(
        witness=(q, p1, p2), eta=tuple(float(e) for e in eta), t=tuple(int(v) for v in t),
        base_vectors=tuple(tuple(int(c) for c in v) for v in base),
        G=tuple(float(v) for v in G), Gp=tuple(float(v) for v in Gp),
        residual=float(residual), x_distance=float(x_distance), x=float(x), Q=float(Q),
        delta=float(delta), c0=float(c0), C1=float(C1), minima=mins.minima,
        radii={"body_q": c0**3 * Q, "bad_set_q": c0**4 * Q}, checks=checks)
