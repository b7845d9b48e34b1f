"""Approximating functions, their lower order, and the two series tests.

A spec is ``pow:v`` for t^-v or ``powlog:v,a`` for t^-v * log(t+2)^a.
Anything else can be wrapped with :meth:`ApproxFunction.custom`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import DomainError, SpecError

CONVERGES, DIVERGES, UNDECIDED = "converges", "diverges", "undecided"
MODES = ("planar", "curve")
_CONDENSE_TERMS = 30
_EXP_TOL = 1e-12


@dataclass(frozen=True)
class ApproxFunction:
    family: str  # "pow", "powlog" or "custom"
    v: float = 0.0
    a: float = 0.0
    func: Optional[Callable] = field(default=None, compare=False, repr=False)
    claimed_monotone: bool = True
    label: str = ""

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "custom":
            return np.asarray(self.func(t), dtype=float)
        out = t ** (-self.v)
        if self.family == "powlog":
            out = out * np.log(t + 2.0) ** self.a
        return out

    def log_eval(self, t):
        """log psi(t); stays finite where psi itself would underflow."""
        t = np.asarray(t, dtype=float)
        if self.family == "custom":
            return np.log(self(t))
        out = -self.v * np.log(t)
        if self.family == "powlog":
            out = out + self.a * np.log(np.log(t + 2.0))
        return out

    @property
    def spec(self):
        if self.family == "pow":
            return f"pow:{self.v!r}"
        if self.family == "powlog":
            return f"powlog:{self.v!r},{self.a!r}"
        return self.label or "custom"

    @classmethod
    def power(cls, v):
        return cls("pow", v=float(v))

    @classmethod
    def power_log(cls, v, a):
        return cls("powlog", v=float(v), a=float(a))

    @classmethod
    def custom(cls, func, label="custom", claimed_monotone=True):
        return cls("custom", func=func, label=label, claimed_monotone=claimed_monotone)

    def times_power(self, w) -> "ApproxFunction":
        """psi(t) * t^-w."""
        if self.family == "custom":
            base = self.func
            return ApproxFunction.custom(lambda t: base(t) * np.asarray(t, float) ** (-w),
                                         label=f"{self.label}*t^-{w}")
        return replace_v(self, self.v + w)


def replace_v(psi: ApproxFunction, v):
    return ApproxFunction(psi.family, v=float(v), a=psi.a, claimed_monotone=psi.claimed_monotone)


def parse_psi(spec: str) -> ApproxFunction:
    text = spec.strip().replace(" ", "")
    kind, _, rest = text.partition(":")
    try:
        nums = [float(s) for s in rest.split(",") if s]
    except ValueError:
        raise SpecError(f"bad psi spec {spec!r}") from None
    if kind == "pow" and len(nums) == 1:
        psi = ApproxFunction.power(nums[0])
    elif kind == "powlog" and len(nums) == 2:
        psi = ApproxFunction.power_log(*nums)
    else:
        raise SpecError(f"bad psi spec {spec!r}; expected pow:v or powlog:v,a")
    validate(psi)
    return psi


def validate(psi: ApproxFunction, k_max: int = 20) -> ApproxFunction:
    """Positivity, monotonicity on dyadic t, and decay to zero."""
    t = 2.0 ** np.arange(0, k_max + 1)
    vals, nxt = psi.log_eval(t), psi.log_eval(t + 1)
    if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(nxt)):
        raise DomainError(f"{psi.spec} is not positive and finite on the dyadic test set")
    if psi.claimed_monotone and np.any(nxt > vals + 1e-12):
        bad = int(t[np.argmax(nxt > vals + 1e-12)])
        raise DomainError(f"{psi.spec} increases between t={bad} and t={bad + 1}")
    if not psi.log_eval(2.0**k_max) < psi.log_eval(2.0**4):
        raise DomainError(f"{psi.spec} does not decay: psi(2^{k_max}) >= psi(16)")
    return psi


def lower_order(psi: ApproxFunction, t_max: int = 2**20) -> float:
    """liminf of -log psi(t)/log t.

    Exact for the tagged families (a log factor does not move it); for a
    custom psi, the minimum over dyadic t in [2^8, t_max] is returned.
    """
    if t_max < 2**10:
        raise DomainError(f"t_max must be at least 2^10, got {t_max}")
    if psi.family in ("pow", "powlog"):
        return psi.v
    t = 2.0 ** np.arange(8, int(math.floor(math.log2(t_max))) + 1)
    vals = psi(t)
    if np.any(~(vals > 0)):
        raise DomainError(f"{psi.spec} is not positive at some dyadic sample")
    return float(np.min(-np.log(vals) / np.log(t)))


@dataclass(frozen=True)
class SeriesVerdict:
    verdict: str
    mode: str
    s: float
    evidence: str
    trace: tuple = ()


def _series_shape(mode, s):
    """Term t^alpha * psi(t)^beta of each series."""
    if mode == "planar":
        if not 0 < s <= 2:
            raise DomainError(f"planar mode needs s in (0, 2], got {s}")
        return 2.0 - s, s
    if mode == "curve":
        if not 0.5 < s <= 1:
            raise DomainError(f"curve mode needs s in (1/2, 1], got {s}")
        return 1.0 - s, s + 1.0
    raise DomainError(f"mode must be one of {MODES}, got {mode!r}")


def series_classify(psi: ApproxFunction, s: float, mode: str = "curve") -> SeriesVerdict:
    alpha, beta = _series_shape(mode, s)
    if psi.family in ("pow", "powlog"):
        e = alpha - psi.v * beta  # the term is t^e * log(t+2)^(a*beta)
        g = psi.a * beta if psi.family == "powlog" else 0.0
        if abs(e + 1) > _EXP_TOL:
            verdict = CONVERGES if e < -1 else DIVERGES
            rule = f"p-series with exponent {e:.6g}"
        else:
            verdict = CONVERGES if g < -1 else DIVERGES
            rule = f"exponent -1, Bertrand series with log power {g:.6g}"
        return SeriesVerdict(verdict, mode, s, rule)
    return _condensed(psi, s, mode, alpha, beta)


def _condensed(psi, s, mode, alpha, beta):
    # Cauchy condensation: sum a(t) behaves like sum 2^k a(2^k)
    k = np.arange(_CONDENSE_TERMS + 1, dtype=float)
    t = 2.0**k
    logb = k * math.log(2.0) + alpha * np.log(t) + beta * psi.log_eval(t)
    trace = tuple(float(x) for x in np.exp(np.clip(logb, -700, 700)))
    steps = np.diff(logb)[-10:]
    if np.all(steps <= math.log(0.9)):
        return SeriesVerdict(CONVERGES, mode, s, "condensed terms shrink geometrically", trace)
    if np.all(steps >= 0):
        return SeriesVerdict(DIVERGES, mode, s, "condensed terms do not decrease", trace)
    return SeriesVerdict(UNDECIDED, mode, s, "condensed terms decay too slowly to call", trace)


def dimension_formula(lam: float) -> float:
    """(2 - lambda)/(1 + lambda) for lambda in [1/2, 1)."""
    if not 0.5 <= lam < 1:
        raise DomainError(f"lambda must lie in [1/2, 1), got {lam}")
    return (2.0 - lam) / (1.0 + lam)


def series_threshold(v: float) -> float:
    """Critical s for the curve series with psi = t^-v."""
    return (2.0 - v) / (1.0 + v)
