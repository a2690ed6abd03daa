"""Forecast-quality metrics, descriptive statistics, and the t significance test.

Metrics follow the report conventions of the experiment harness: predictions
and targets arrive in original volatility units, multi-output data is
flattened before averaging, and MAPE is in percent.  The t-test p-value is
computed from the regularized incomplete beta function evaluated by a
continued fraction, so the package carries no statistics dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from volcast.errors import (
    ConstantVector,
    DegenerateVariance,
    EmptyInput,
    LengthMismatch,
    TooFew,
    ZeroActual,
)

MLFF_LABEL = "Multi-Layer Feed Forward Network"
CFFN_LABEL = "Cascade Feed Forward Network"
ARCH_LABELS = {"MLFF": MLFF_LABEL, "CFFN": CFFN_LABEL}


@dataclass(frozen=True)
class Metrics:
    mse: float
    r: float
    mape: float


@dataclass(frozen=True)
class DescriptiveStats:
    minimum: float
    maximum: float
    average: float
    standard_deviation: float


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value_two_tailed: float
    paired: bool


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.size != p.size:
        raise LengthMismatch(f"actual has {a.size} values, predicted has {p.size}")
    if a.size == 0:
        raise EmptyInput("need at least one value")
    return a, p


def mse(actual, predicted) -> float:
    """Mean squared difference; multi-output data is flattened first."""
    a, p = _pair(actual, predicted)
    d = a - p
    return float(np.mean(d * d))


def pearson_r(actual, predicted) -> float:
    """Product-moment correlation between actual and predicted values.

    Evaluated in centered form, algebraically equal to the raw-sum
    expression [N*sum(xy) - sum(x)sum(y)] / sqrt([N*sum(x^2) - sum(x)^2]
    [N*sum(y^2) - sum(y)^2]) but without its catastrophic cancellation.
    """
    a, p = _pair(actual, predicted)
    n = a.size
    if n < 2:
        raise TooFew("correlation needs at least 2 values")
    da = a - a.mean()
    dp = p - p.mean()
    var_a = float(da @ da)
    var_p = float(dp @ dp)
    if var_a <= 0.0 or var_p <= 0.0:
        raise ConstantVector("correlation undefined for a constant vector")
    return float(da @ dp) / math.sqrt(var_a * var_p)


def mape(actual, predicted) -> float:
    """Mean absolute percentage error: mean(|(act - pred) / act|) * 100."""
    a, p = _pair(actual, predicted)
    zero = np.nonzero(a == 0.0)[0]
    if zero.size:
        raise ZeroActual(int(zero[0]))
    return float(np.mean(np.abs((a - p) / a))) * 100.0


def compute_metrics(actual, predicted) -> Metrics:
    return Metrics(mse=mse(actual, predicted),
                   r=pearson_r(actual, predicted),
                   mape=mape(actual, predicted))


def descriptive_stats(values) -> DescriptiveStats:
    """Min / max / mean / sample standard deviation (n-1 divisor).

    Values are sorted before summation, so permutations of the same vector
    produce bit-identical statistics.
    """
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size < 2:
        raise TooFew(f"need at least 2 values, got {v.size}")
    return DescriptiveStats(
        minimum=float(v[0]),
        maximum=float(v[-1]),
        average=float(v.mean()),
        standard_deviation=float(v.std(ddof=1)),
    )


# --------------------------------------------------------------------------
# Student t significance test


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) to better than 1e-10 absolute for moderate a, b."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_p_value_two_tailed(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def t_test_mse(mse_arch_a, mse_arch_b, paired: bool = True) -> TTestResult:
    """Two-tailed t comparison of matched per-configuration MSE samples.

    Paired form needs matched ordering (same algorithm x hidden-size per
    index).  All-zero differences are reported as t = 0, p = 1; zero-variance
    differences with a nonzero mean are refused as DegenerateVariance rather
    than reported as an infinitely significant result.  The unpaired form is
    Welch's, with its fractional degrees of freedom.
    """
    a = np.asarray(mse_arch_a, dtype=np.float64).ravel()
    b = np.asarray(mse_arch_b, dtype=np.float64).ravel()
    if paired:
        if a.size != b.size:
            raise LengthMismatch(f"paired test needs equal lengths, got {a.size} and {b.size}")
        if a.size < 2:
            raise TooFew("paired test needs at least 2 pairs")
        d = a - b
        sd = float(d.std(ddof=1))
        mean = float(d.mean())
        n = d.size
        if sd == 0.0:
            if mean == 0.0:
                return TTestResult(0.0, float(n - 1), 1.0, True)
            raise DegenerateVariance("all pairwise differences identical and nonzero")
        t = mean / (sd / math.sqrt(n))
        df = float(n - 1)
    else:
        if a.size < 2 or b.size < 2:
            raise TooFew("Welch test needs at least 2 values per sample")
        va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
        na, nb = a.size, b.size
        se2 = va / na + vb / nb
        if se2 == 0.0:
            if float(a.mean()) == float(b.mean()):
                return TTestResult(0.0, float(na + nb - 2), 1.0, False)
            raise DegenerateVariance("both samples constant with different means")
        t = (float(a.mean()) - float(b.mean())) / math.sqrt(se2)
        df = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return TTestResult(t, df, t_p_value_two_tailed(t, df), paired)


def is_significant(result: TTestResult, alpha: float = 0.05) -> bool:
    return result.p_value_two_tailed < alpha


def significance_verdict(result: TTestResult, alpha: float = 0.05) -> str:
    word = "significant" if is_significant(result, alpha) else "no significant"
    return (f"t = {result.t_statistic:.4f}, df = {result.degrees_of_freedom:g}, "
            f"p = {result.p_value_two_tailed:.4f} (two tailed) -> "
            f"{word} difference at alpha = {alpha:g}")


def stats_table_csv(metric_name: str, by_architecture: dict[str, DescriptiveStats]) -> str:
    """One metric's table as CSV: rows Min/Max/Average/StdDev, one column per architecture."""
    archs = list(by_architecture)
    lines = [metric_name + "," + ",".join(ARCH_LABELS.get(a, a) for a in archs)]
    rows = (("Min", "minimum"), ("Max", "maximum"),
            ("Average", "average"), ("Standard Deviation", "standard_deviation"))
    for label, attr in rows:
        cells = [f"{getattr(by_architecture[a], attr):.4f}" for a in archs]
        lines.append(label + "," + ",".join(cells))
    return "\n".join(lines) + "\n"
