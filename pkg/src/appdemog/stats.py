"""Two-sample Welch t-test and the special functions it needs.

The regularized incomplete beta function is evaluated with the modified
Lentz continued fraction, switching to the symmetric tail so the fraction
always converges fast; the t-distribution tail probability follows from it
directly. No external stats library is involved, so the test suite can
check the whole chain against an independent high-precision oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataFormatError, NumericalError

_TINY = 1e-300
_EPS = 1e-16
_MAX_CF_ITER = 400


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise NumericalError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise DataFormatError(f"betainc requires a, b > 0, got a={a}, b={b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = a * math.log(x) + b * math.log1p(-x) - log_beta(a, b)
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """P(T > t) for a Student t variable with df degrees of freedom."""
    if df <= 0:
        raise DataFormatError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * betainc(0.5 * df, 0.5, x)
    return tail if t >= 0 else 1.0 - tail


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value_one_sided: float
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float

    def to_dict(self) -> dict:
        return {
            "t_statistic": self.t_statistic,
            "degrees_of_freedom": self.degrees_of_freedom,
            "p_value_one_sided": self.p_value_one_sided,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
        }


def welch_t_test(group_a: Sequence[float], group_b: Sequence[float]) -> TTestResult:
    """Unequal-variance two-sample t-test.

    The alternative is mean(a) > mean(b): the one-sided p-value is the upper
    tail P(T >= t) with Welch-Satterthwaite degrees of freedom. With zero
    variance in both groups the statistic degenerates to +/-inf (p of 0 or
    1 by mean comparison), or to t=0, p=0.5 when the means also agree.
    """
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or len(a) < 2 or len(b) < 2:
        raise DataFormatError("welch_t_test needs two 1-D groups of size >= 2")
    na, nb = len(a), len(b)
    ma, mb = float(a.mean()), float(b.mean())
    va = float(a.var(ddof=1))
    vb = float(b.var(ddof=1))
    sa, sb = va / na, vb / nb
    se2 = sa + sb
    if se2 == 0.0:
        if ma > mb:
            return TTestResult(math.inf, math.inf, 0.0, na, nb, ma, mb)
        if ma < mb:
            return TTestResult(-math.inf, math.inf, 1.0, na, nb, ma, mb)
        return TTestResult(0.0, math.inf, 0.5, na, nb, ma, mb)
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / (sa * sa / (na - 1) + sb * sb / (nb - 1))
    return TTestResult(t, df, t_sf(t, df), na, nb, ma, mb)


def proportion_se(p: float, n: int) -> float:
    """Standard error sqrt(p(1-p)/n) of a sample proportion."""
    if n <= 0:
        raise DataFormatError(f"n must be positive, got {n}")
    return math.sqrt(p * (1.0 - p) / n)
