"""
Shapiro-Wilk normality test with Royston's approximations (coefficients from normal order
statistic scores corrected by polynomials in 1/sqrt(n), p-value from a normalizing transform of
ln(1 - W) whose mean and log-sd are polynomials in n or ln n). Valid for 3 <= n <= 5000.
"""
import logging
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.stats import norm

from lstm_anomaly_rules.dto.reports import TestReport
from lstm_anomaly_rules.errors import DataError

logger = logging.getLogger(__name__)

TEST_NAME = "shapiro_wilk"
METHOD = "royston"
MIN_SIZE = 3
MAX_SIZE = 5000

# polynomial coefficients, highest power first (np.polyval order)
C1 = np.array([-2.706056, 4.434685, -2.071190, -0.147981, 0.221157, 0.0])
C2 = np.array([-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0])
C3 = np.array([-0.0006714, 0.025054, -0.39978, 0.5440])
C4 = np.array([-0.0020322, 0.062767, -0.77857, 1.3822])
C5 = np.array([0.0038915, -0.083751, -0.31082, -1.5861])
C6 = np.array([0.0030302, -0.082676, -0.4803])
G = np.array([0.459, -2.273])

SMALL_P = 1e-19


@lru_cache(maxsize=64)
def coefficients(n: int) -> np.ndarray:
    """
    Weights for the upper half of the order statistics, largest first; the lower half carries
    the same weights with opposite sign.
    """
    if n == 3:
        a = np.array([np.sqrt(0.5)])
        a.flags.writeable = False
        return a

    half = n // 2
    m = norm.ppf((np.arange(1, half + 1) - 0.375) / (n + 0.25))
    summ2 = 2.0 * np.sum(m ** 2)
    rsn = 1.0 / np.sqrt(n)
    a1 = np.polyval(C1, rsn) - m[0] / np.sqrt(summ2)

    a = -m.copy()
    if n > 5:
        a2 = -m[1] / np.sqrt(summ2) + np.polyval(C2, rsn)
        fac = np.sqrt((summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2) / (1.0 - 2.0 * a1 ** 2 - 2.0 * a2 ** 2))
        a[2:] = -m[2:] / fac
        a[1] = a2
    else:
        fac = np.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1 ** 2))
        a[1:] = -m[1:] / fac
    a[0] = a1
    a.flags.writeable = False
    return a


def w_statistic(sample: Sequence[float]) -> float:
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    a = coefficients(n)
    half = a.size
    spread = x[::-1][:half] - x[:half]
    centred = x - x.mean()
    ssq = float(np.dot(centred, centred))
    return min(float(np.dot(a, spread)) ** 2 / ssq, 1.0)


def w_p_value(w: float, n: int) -> float:
    if n == 3:
        # exact distribution
        return float(np.clip(6.0 / np.pi * (np.arcsin(np.sqrt(w)) - np.pi / 3.0), 0.0, 1.0))

    w1 = 1.0 - w
    if w1 <= 0.0:
        return 1.0
    y = np.log(w1)
    if n <= 11:
        gamma = np.polyval(G, n)
        if y >= gamma:
            return SMALL_P
        y = -np.log(gamma - y)
        m = np.polyval(C3, n)
        s = np.exp(np.polyval(C4, n))
    else:
        ln_n = np.log(n)
        m = np.polyval(C5, ln_n)
        s = np.exp(np.polyval(C6, ln_n))
    return float(norm.sf((y - m) / s))


def shapiro_wilk(sample: Sequence[float], alpha: float = 0.001, series_name: str = "") -> TestReport:
    x = np.asarray(sample, dtype=float).ravel()
    n = x.size
    if not MIN_SIZE <= n <= MAX_SIZE:
        raise DataError(f"Shapiro-Wilk needs {MIN_SIZE} <= n <= {MAX_SIZE}, got n={n}")
    if not np.all(np.isfinite(x)):
        raise DataError("Shapiro-Wilk sample contains non-finite values")
    if np.ptp(x) == 0.0:
        raise DataError("Shapiro-Wilk sample has zero variance")

    w = w_statistic(x)
    p = w_p_value(w, n)
    logger.info("Shapiro-Wilk n=%d W=%.6f p=%.3g", n, w, p)
    return TestReport(
        test_name=TEST_NAME,
        statistic=w,
        p_value=p,
        alpha=alpha,
        method=METHOD,
        n=n,
        series_name=series_name,
    )
