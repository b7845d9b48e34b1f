"""Exact counts of shifted rational points near a curve.

Two independent algorithms compute the same number:

* ``count_naive`` walks every candidate numerator ``p1`` for every
  denominator ``q`` and tests the residual directly.
* ``count_fast`` walks integer levels ``m`` of ``q f(x)`` on each monotone
  piece, inverts f to get the x-window of each level, and counts the
  numerators inside by floor arithmetic.

Both route every borderline decision through :func:`within_band` and
:func:`in_interval`, so float ties cannot make them disagree.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .curve import PlanarCurve, invert_on_piece, monotone_pieces
from .exceptions import BudgetExceededError, DomainError

GUARD = 1e-12
CANDIDATE_BUDGET = 10**10
POINT_BUDGET = 10**7
_CHUNK = 1 << 21
# fraction of a numerator step inside which a window end is re-checked directly
_ADJUDICATE = 0.02


@dataclass(frozen=True)
class Shift:
    theta1: float = 0.0
    theta2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.theta1) and math.isfinite(self.theta2)):
            raise DomainError("shift components must be finite")

    def normalized(self) -> "Shift":
        """Copy with both components reduced into [0, 1)."""
        return Shift(self.theta1 - math.floor(self.theta1), self.theta2 - math.floor(self.theta2))

    @classmethod
    def parse(cls, text: str) -> "Shift":
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != 2:
            raise DomainError(f"shift {text!r} must be 'theta1,theta2'")
        return cls(float(parts[0]), float(parts[1]))

    def as_tuple(self):
        return (self.theta1, self.theta2)


@dataclass(frozen=True)
class CountQuery:
    curve: PlanarCurve
    shift: Shift
    Q: float
    delta: float
    J: Optional[tuple] = None

    def __post_init__(self):
        if not (math.isfinite(self.Q) and self.Q >= 1):
            raise DomainError(f"Q must be >= 1, got {self.Q}")
        if not (0 < self.delta <= 0.5):
            raise DomainError(f"delta must lie in (0, 1/2], got {self.delta}")
        J = self.J if self.J is not None else self.curve.domain
        lo, hi = float(J[0]), float(J[1])
        if not (self.curve.a <= lo <= hi <= self.curve.b):
            raise DomainError(f"J=[{lo}, {hi}] is not inside I=[{self.curve.a}, {self.curve.b}]")
        object.__setattr__(self, "J", (lo, hi))

    @property
    def q_range(self):
        """Denominators Q < q <= 2Q."""
        return math.floor(self.Q) + 1, math.floor(2 * self.Q)

    def with_(self, **kw) -> "CountQuery":
        args = dict(curve=self.curve, shift=self.shift, Q=self.Q, delta=self.delta, J=self.J)
        args.update(kw)
        return CountQuery(**args)


@dataclass(frozen=True, order=True)
class CountedPoint:
    q: int
    p1: int
    residual: float = field(compare=False)


def dist_to_nearest_int(x):
    """||x||, the distance to the nearest integer."""
    arr = np.asarray(x, dtype=float)
    d = np.abs(arr - np.rint(arr))
    return float(d) if d.ndim == 0 else d


def within_band(u, delta):
    """Shared comparator for ||u|| < delta; ties within GUARD count as outside."""
    r = np.abs(u - np.rint(u))
    return (r < delta) & ~(np.abs(r - delta) <= GUARD)


def in_interval(x, lo, hi):
    """Closed-interval membership with the same GUARD tolerance."""
    return (x >= lo - GUARD) & (x <= hi + GUARD)


def residual_u(curve: PlanarCurve, q, p, theta: Shift):
    """q f((p + theta1)/q) - theta2, evaluated the same way everywhere."""
    q = np.asarray(q, dtype=float)
    x = (np.asarray(p, dtype=float) + theta.theta1) / q
    return q * curve.f(x) - theta.theta2


def _xs(q, p, theta1):
    return (np.asarray(p, dtype=float) + theta1) / np.asarray(q, dtype=float)


def candidate_range(q, theta1, lo, hi):
    """First and last p with (p + theta1)/q in [lo, hi] under :func:`in_interval`."""
    q = np.asarray(q, dtype=np.int64)
    qf = q.astype(float)
    start = np.ceil(qf * (lo - GUARD) - theta1).astype(np.int64) - 2
    for _ in range(5):
        bad = ~in_interval(_xs(q, start, theta1), lo, hi) & (_xs(q, start, theta1) < lo)
        start = start + bad
    stop = np.floor(qf * (hi + GUARD) - theta1).astype(np.int64) + 2
    for _ in range(5):
        bad = ~in_interval(_xs(q, stop, theta1), lo, hi) & (_xs(q, stop, theta1) > hi)
        stop = stop - bad
    return start, stop


def _first_at_least(q, theta1, s):
    """Smallest p with (p + theta1)/q >= s in float arithmetic."""
    qf = np.asarray(q, dtype=float)
    k = np.ceil(qf * s - theta1).astype(np.int64) - 2
    for _ in range(5):
        k = k + (_xs(q, k, theta1) < s)
    return k


def _denominators(query: CountQuery):
    q0, q1 = query.q_range
    return np.arange(q0, q1 + 1, dtype=np.int64)


def _partition(qs, parts):
    """Split sorted denominators into contiguous blocks of similar total work."""
    if parts <= 1 or len(qs) < 2 * parts:
        return [qs]
    w = np.cumsum(qs.astype(float))
    cuts = np.searchsorted(w, w[-1] * np.arange(1, parts) / parts)
    return [b for b in np.split(qs, cuts) if len(b)]


def _chunks_by_work(qs, work):
    """Yield slices of ``qs`` whose summed ``work`` stays near _CHUNK."""
    csum = np.cumsum(work)
    start = 0
    n = len(qs)
    while start < n:
        base = csum[start - 1] if start else 0
        stop = int(np.searchsorted(csum, base + _CHUNK, side="right"))
        stop = max(stop, start + 1)
        yield slice(start, min(stop, n))
        start = stop


def _expand(starts, counts):
    """Concatenate arange(start, start + count) for each pair."""
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    owner = np.repeat(np.arange(len(counts)), counts)
    offsets = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
    return owner, starts[owner] + offsets


def _run_blocks(fn, qs, threads):
    blocks = _partition(qs, threads)
    if len(blocks) == 1:
        return [fn(blocks[0])]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


# -- naive ------------------------------------------------------------------

def _naive_candidates(query, qs):
    theta = query.shift.normalized()
    lo, hi = query.J
    start, stop = candidate_range(qs, theta.theta1, lo, hi)
    counts = np.maximum(stop - start + 1, 0)
    return theta, start, counts


def _check_candidate_budget(query):
    q0, q1 = query.q_range
    width = query.J[1] - query.J[0]
    est = (q1 - q0 + 1) * ((q0 + q1) / 2.0 * width + 3)
    if est > CANDIDATE_BUDGET:
        raise BudgetExceededError(
            f"about {est:.3g} candidates exceeds the budget of {CANDIDATE_BUDGET:.0e}; use count_fast")


def _naive_block(query, qs, collect):
    theta, start, counts = _naive_candidates(query, qs)
    total = 0
    found = []
    for sl in _chunks_by_work(qs, counts):
        owner, p = _expand(start[sl], counts[sl])
        if len(p) == 0:
            continue
        q = qs[sl][owner]
        u = residual_u(query.curve, q, p, theta)
        ok = within_band(u, query.delta)
        total += int(ok.sum())
        if collect:
            found.append((q[ok], p[ok], dist_to_nearest_int(u[ok])))
    return total, found


def count_naive(query: CountQuery, threads: int = 1) -> int:
    """N_theta(Q, delta) on J by testing every candidate pair (q, p1)."""
    _check_candidate_budget(query)
    qs = _denominators(query)
    return sum(r[0] for r in _run_blocks(lambda b: _naive_block(query, b, False), qs, threads))


def enumerate_naive(query: CountQuery):
    """Points found by the direct double loop, as sorted (q, p1, residual) arrays."""
    _check_candidate_budget(query)
    _, found = _naive_block(query, _denominators(query), True)
    q, p, r = _sorted_arrays(found)
    return q, p - math.floor(query.shift.theta1), r


# -- level inversion ----------------------------------------------------------

def _piece_ranges(query, qs, theta, pieces):
    lo, hi = query.J
    A, B = candidate_range(qs, theta.theta1, lo, hi)
    cuts = [_first_at_least(qs, theta.theta1, pc.lo) for pc in pieces[1:]]
    out = []
    for i, pc in enumerate(pieces):
        P0 = A if i == 0 else np.maximum(A, cuts[i - 1])
        P1 = B if i == len(pieces) - 1 else np.minimum(B, cuts[i] - 1)
        out.append((pc, P0, P1))
    return out


def _levels_block(query, qs, collect):
    curve = query.curve
    theta = query.shift.normalized()
    delta = query.delta
    dprime = delta - GUARD
    pieces = monotone_pieces(curve)
    total = 0
    found = []
    corrections = []

    for piece, P0, P1 in _piece_ranges(query, qs, theta, pieces):
        live = P1 >= P0
        if not np.any(live):
            continue
        q_live, P0, P1 = qs[live], P0[live], P1[live]

        if piece.direction == "constant":
            # no inversion possible; every candidate shares one value of f
            n = P1 - P0 + 1
            for sl in _chunks_by_work(q_live, n):
                owner, p = _expand(P0[sl], n[sl])
                q = q_live[sl][owner]
                u = residual_u(curve, q, p, theta)
                ok = within_band(u, delta)
                total += int(ok.sum())
                if collect:
                    found.append((q[ok], p[ok], dist_to_nearest_int(u[ok])))
            continue

        u0 = residual_u(curve, q_live, P0, theta)
        u1 = residual_u(curve, q_live, P1, theta)
        m_lo = np.floor(np.minimum(u0, u1) - dprime).astype(np.int64)
        m_hi = np.ceil(np.maximum(u0, u1) + dprime).astype(np.int64)
        nlev = m_hi - m_lo + 1

        for sl in _chunks_by_work(q_live, nlev):
            owner, m = _expand(m_lo[sl], nlev[sl])
            q = q_live[sl][owner]
            p_first = P0[sl][owner]
            p_last = P1[sl][owner]
            qf = q.astype(float)
            mf = m.astype(float)
            y_lo = (mf + theta.theta2 - dprime) / qf
            y_hi = (mf + theta.theta2 + dprime) / qf
            if piece.increasing:
                xa = invert_on_piece(curve, piece, y_lo)
                xb = invert_on_piece(curve, piece, y_hi)
            else:
                xa = invert_on_piece(curve, piece, y_hi)
                xb = invert_on_piece(curve, piece, y_lo)
            pa = qf * xa - theta.theta1
            pb = qf * xb - theta.theta1
            lo = np.maximum(np.floor(pa).astype(np.int64) + 1, p_first)
            hi = np.minimum(np.ceil(pb).astype(np.int64) - 1, p_last)
            n = np.maximum(hi - lo + 1, 0)
            total += int(n.sum())

            fix = _adjudicate(curve, theta, delta, q, m, pa, pb, lo, hi, p_first, p_last)
            if fix is not None:
                total += int(fix[3].sum())
                if collect:
                    corrections.append(fix)
            if collect:
                nz = n > 0
                own, p = _expand(lo[nz], n[nz])
                found.append((q[nz][own], p, None))

    if not collect:
        return total, None
    return total, _apply_corrections(curve, theta, found, corrections)


def _adjudicate(curve, theta, delta, q, m, pa, pb, lo, hi, p_first, p_last):
    """Re-check candidates sitting within _ADJUDICATE of a window end.

    Returns (level index, q, p, correction) arrays, where correction is
    +1/-1 when direct evaluation disagrees with the floor arithmetic.
    """
    ka = np.rint(pa)
    kb = np.rint(pb)
    near_a = np.abs(ka - pa) < _ADJUDICATE
    near_b = (np.abs(kb - pb) < _ADJUDICATE) & ~(near_a & (ka == kb))
    ia = np.flatnonzero(near_a)
    ib = np.flatnonzero(near_b)
    if len(ia) + len(ib) == 0:
        return None
    idx = np.concatenate([ia, ib])
    k = np.concatenate([ka[ia], kb[ib]]).astype(np.int64)
    keep = (k >= p_first[idx]) & (k <= p_last[idx])
    idx, k = idx[keep], k[keep]
    if len(idx) == 0:
        return None
    predicted = (k >= lo[idx]) & (k <= hi[idx])
    u = residual_u(curve, q[idx], k, theta)
    actual = within_band(u, delta) & (np.rint(u).astype(np.int64) == m[idx])
    corr = actual.astype(np.int64) - predicted.astype(np.int64)
    nz = corr != 0
    if not np.any(nz):
        return None
    return idx[nz], q[idx][nz], k[nz], corr[nz]


def _key(q, p):
    return q.astype(np.int64) * (1 << 40) + (p.astype(np.int64) + (1 << 39))


def _apply_corrections(curve, theta, found, corrections):
    qs = [f[0] for f in found]
    ps = [f[1] for f in found]
    q = np.concatenate(qs) if qs else np.empty(0, dtype=np.int64)
    p = np.concatenate(ps) if ps else np.empty(0, dtype=np.int64)
    if corrections:
        cq = np.concatenate([c[1] for c in corrections])
        cp = np.concatenate([c[2] for c in corrections])
        cc = np.concatenate([c[3] for c in corrections])
        drop = cc < 0
        if np.any(drop):
            mask = ~np.isin(_key(q, p), _key(cq[drop], cp[drop]))
            q, p = q[mask], p[mask]
        q = np.concatenate([q, cq[~drop]])
        p = np.concatenate([p, cp[~drop]])
    u = residual_u(curve, q, p, theta)
    return [(q, p, dist_to_nearest_int(u) if len(u) else np.empty(0))]


def _check_level_budget(query):
    q0, q1 = query.q_range
    lo, hi = query.J
    xs = np.linspace(lo, hi, 257)
    span = float(np.ptp(query.curve.f(xs))) if hi > lo else 0.0
    est = (q1 - q0 + 1) * (q1 * span + 4 * 64)
    if est > CANDIDATE_BUDGET:
        raise BudgetExceededError(f"about {est:.3g} levels exceeds the budget of {CANDIDATE_BUDGET:.0e}")


def count_fast(query: CountQuery, threads: int = 1) -> int:
    """N_theta(Q, delta) on J by inverting f level by level."""
    _check_level_budget(query)
    qs = _denominators(query)
    return sum(r[0] for r in _run_blocks(lambda b: _levels_block(query, b, False), qs, threads))


def _sorted_arrays(found):
    if not found:
        z = np.empty(0, dtype=np.int64)
        return z, z.copy(), np.empty(0)
    q = np.concatenate([f[0] for f in found]).astype(np.int64)
    p = np.concatenate([f[1] for f in found]).astype(np.int64)
    r = np.concatenate([f[2] for f in found]).astype(float)
    order = np.lexsort((p, q))
    return q[order], p[order], r[order]


def enumerate_arrays(query: CountQuery, threads: int = 1, budget: int = POINT_BUDGET):
    """All points of A_theta(Q, delta, J) as sorted (q, p1, residual) arrays."""
    _check_level_budget(query)
    lo, hi = query.J
    q0, q1 = query.q_range
    expected = 2 * query.delta * (q1 - q0 + 1) * (q0 + q1) / 2.0 * (hi - lo)
    if expected > 1.5 * budget:
        raise BudgetExceededError(f"about {expected:.3g} points exceeds the budget of {budget:.0e}")
    qs = _denominators(query)
    parts = _run_blocks(lambda b: _levels_block(query, b, True)[1], qs, threads)
    q, p, r = _sorted_arrays([a for part in parts for a in part])
    if len(q) > budget:
        raise BudgetExceededError(f"{len(q)} points exceeds the budget of {budget:.0e}")
    # report numerators against the shift as given, not its reduction mod 1
    return q, p - math.floor(query.shift.theta1), r


def enumerate_points(query: CountQuery, threads: int = 1, budget: int = POINT_BUDGET) -> list:
    """Sorted list of :class:`CountedPoint`; its length equals ``count_fast``."""
    q, p, r = enumerate_arrays(query, threads, budget)
    return [CountedPoint(int(a), int(b), float(c)) for a, b, c in zip(q, p, r)]


def point_x(q, p1, shift: Shift):
    """Abscissa (p1 + theta1)/q of a counted point."""
    return _xs(q, p1, shift.theta1)
