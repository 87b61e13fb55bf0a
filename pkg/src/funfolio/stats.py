"""Statistical evaluation: realized objectives, paired t, Ljung-Box, IR.

CDF kernels come from scipy.special (regularized incomplete beta/gamma),
which keeps the implementations here down to the test statistics
themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import ObjectiveSpec
from .errors import (
    ConstantSeriesError,
    DegenerateVarianceError,
    ValidationError,
    ZeroVarianceError,
)
from .objectives import eval_F

__all__ = [
    "TestResult",
    "realized_objective",
    "paired_t_test",
    "ljung_box",
    "information_ratio",
]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    df: float

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValidationError(f"p-value {self.p_value} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "df": self.df, "p_value": self.p_value}


def realized_objective(objective: ObjectiveSpec, returns) -> float:
    """F of the sample mean and sample (1/n) second moment of realized returns."""
    r = np.asarray(returns, dtype=np.float64)
    if r.ndim != 1 or r.shape[0] < 2:
        raise ValidationError("need a 1-D return series of length >= 2")
    m1 = float(r.mean())
    m2 = float((r * r).mean())
    return eval_F(objective, m1, m2)


def paired_t_test(x, y, alternative: str = "greater") -> TestResult:
    """One-sided paired t-test on d = x - y.

    t = mean(d) / (sd(d)/sqrt(L)) with the n-1 sd convention, df = L - 1,
    p = upper tail of Student-t for alternative 'greater'.
    """
    if alternative != "greater":
        raise ValidationError(f"unsupported alternative {alternative!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] < 2:
        raise ValidationError("x and y must be equal-length 1-D sequences, length >= 2")
    d = x - y
    L = d.shape[0]
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise ZeroVarianceError("all paired differences are identical")
    t = float(d.mean()) / (sd / math.sqrt(L))
    df = L - 1
    p = float(special.stdtr(df, -t))  # upper tail by symmetry
    return TestResult(statistic=t, p_value=p, df=float(df))


def ljung_box(series, h: int) -> TestResult:
    """Ljung-Box portmanteau test of zero autocorrelation at lags 1..h.

    Q = n (n + 2) sum_k rho_k^2 / (n - k), p from the chi-square(h) upper
    tail.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.shape[0]
    if not (isinstance(h, (int, np.integer)) and h >= 1):
        raise ValidationError(f"h must be an integer >= 1, got {h}")
    if n <= h:
        raise ValidationError(f"need series length > h, got n={n}, h={h}")
    if np.all(x == x[0]):
        raise ConstantSeriesError("autocorrelations undefined for a constant series")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        raise ConstantSeriesError("autocorrelations undefined for a constant series")
    q = 0.0
    for k in range(1, h + 1):
        rho = float(xc[:-k] @ xc[k:]) / denom
        q += rho * rho / (n - k)
    q *= n * (n + 2.0)
    p = float(special.chdtrc(h, q))
    return TestResult(statistic=q, p_value=p, df=float(h))


def information_ratio(excess_returns) -> float:
    """Sample mean over sample standard deviation (n-1 convention)."""
    e = np.asarray(excess_returns, dtype=np.float64)
    if e.ndim != 1 or e.shape[0] < 2:
        raise ValidationError("need a 1-D excess-return series of length >= 2")
    sd = float(e.std(ddof=1))
    if sd == 0.0:
        raise DegenerateVarianceError("excess returns have zero sample variance")
    return float(e.mean()) / sd
