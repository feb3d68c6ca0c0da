"""
Anderson-Darling goodness of fit of peaks-over-threshold excesses to their fitted GPD.

Both GPD parameters are estimated from the same excesses, so the p-value comes from the
estimated-parameter critical values (asymptotic table indexed by the shape) when the fitted shape
lies inside the table, and from a parametric bootstrap that refits every resample otherwise.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np
from scipy.stats import genpareto

from lstm_anomaly_rules.detectors.evt import GAMMA_EPS, MIN_EXCESSES, fit_gpd
from lstm_anomaly_rules.dto.reports import TestReport
from lstm_anomaly_rules.errors import AnomalyRulesError, DataError, NumericalError

logger = logging.getLogger(__name__)

TEST_NAME = "anderson_darling_gpd"
DEFAULT_BOOTSTRAP = 999

# Upper-tail levels and A^2 critical values for the GPD with estimated shape and scale. Rows
# are indexed by k = -gamma.
SIGNIFICANCE_LEVELS = np.array([0.5, 0.25, 0.1, 0.05, 0.025, 0.01, 0.005])
TABLE_K = np.array([-0.5, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
CRITICAL_VALUES = np.array(
    [
        [0.356, 0.499, 0.685, 0.830, 0.978, 1.180, 1.336],
        [0.376, 0.534, 0.741, 0.903, 1.069, 1.296, 1.471],
        [0.386, 0.550, 0.766, 0.935, 1.110, 1.348, 1.532],
        [0.397, 0.569, 0.796, 0.974, 1.158, 1.409, 1.603],
        [0.410, 0.591, 0.831, 1.020, 1.215, 1.481, 1.687],
        [0.426, 0.617, 0.873, 1.074, 1.283, 1.567, 1.788],
        [0.445, 0.649, 0.924, 1.142, 1.367, 1.675, 1.914],
        [0.468, 0.688, 0.988, 1.225, 1.471, 1.809, 2.071],
        [0.496, 0.735, 1.066, 1.329, 1.603, 1.979, 2.273],
    ]
)


def check_support(excesses: np.ndarray, gamma_hat: float, sigma_hat: float):
    if sigma_hat <= 0.0:
        raise DataError(f"sigma_hat must be positive, got {sigma_hat}")
    if np.any(excesses <= 0.0):
        raise DataError("excesses must be strictly positive")
    if gamma_hat < -GAMMA_EPS:
        upper = -sigma_hat / gamma_hat
        if np.any(excesses >= upper):
            raise DataError(
                f"excess {excesses.max():.6g} outside the fitted support (0, {upper:.6g})"
            )


def a2_statistic(excesses: Sequence[float], gamma_hat: float, sigma_hat: float) -> float:
    """A^2 = -n - (1/n) * sum((2i - 1) * (ln F(z_i) + ln(1 - F(z_{n+1-i}))))"""
    z = np.sort(np.asarray(excesses, dtype=float))
    n = z.size
    c = 0.0 if abs(gamma_hat) < GAMMA_EPS else gamma_hat
    log_cdf = genpareto.logcdf(z, c, scale=sigma_hat)
    log_sf = genpareto.logsf(z, c, scale=sigma_hat)
    weights = 2.0 * np.arange(1, n + 1) - 1.0
    return float(-n - np.sum(weights * (log_cdf + log_sf[::-1])) / n)


def in_table(gamma_hat: float) -> bool:
    return TABLE_K[0] <= -gamma_hat <= TABLE_K[-1]


def table_p_value(a2: float, gamma_hat: float) -> float:
    """
    Interpolates the critical values in k, then log(level) against the critical values; outside
    the tabulated levels the nearest segment is extended and the result clipped to [0, 1].
    """
    k = -gamma_hat
    critical = np.array([np.interp(k, TABLE_K, CRITICAL_VALUES[:, j]) for j in range(len(SIGNIFICANCE_LEVELS))])
    log_levels = np.log(SIGNIFICANCE_LEVELS)

    if a2 <= critical[0]:
        lo, hi = 0, 1
    elif a2 >= critical[-1]:
        lo, hi = -2, -1
    else:
        hi = int(np.searchsorted(critical, a2))
        lo = hi - 1
    slope = (log_levels[hi] - log_levels[lo]) / (critical[hi] - critical[lo])
    log_p = log_levels[lo] + slope * (a2 - critical[lo])
    return float(np.clip(np.exp(log_p), 0.0, 1.0))


def _resample_a2(child: np.random.SeedSequence, n: int, gamma_hat: float, sigma_hat: float) -> Optional[float]:
    rng = np.random.default_rng(child)
    c = 0.0 if abs(gamma_hat) < GAMMA_EPS else gamma_hat
    sample = genpareto.rvs(c, scale=sigma_hat, size=n, random_state=rng)
    try:
        gamma_b, sigma_b = fit_gpd(sample)
        check_support(sample, gamma_b, sigma_b)
        return a2_statistic(sample, gamma_b, sigma_b)
    except AnomalyRulesError:
        return None


def bootstrap_p_value(
    a2: float,
    n: int,
    gamma_hat: float,
    sigma_hat: float,
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    max_workers: Optional[int] = None,
) -> float:
    """
    Parametric bootstrap: resample n excesses from the fitted GPD, refit, recompute A^2.
    p = (1 + #{A^2_b >= A^2}) / (1 + B). Each resample draws from its own spawned seed, so the
    result does not depend on the number of workers.
    """
    children = np.random.SeedSequence(seed).spawn(n_bootstrap)
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        replicates = list(
            executor.map(lambda child: _resample_a2(child, n, gamma_hat, sigma_hat), children)
        )

    valid = np.array([r for r in replicates if r is not None])
    failed = n_bootstrap - valid.size
    if failed:
        logger.warning("%d of %d bootstrap refits failed and were dropped", failed, n_bootstrap)
    if valid.size == 0:
        raise NumericalError("every bootstrap refit failed", stage="test-ad")
    return float((1 + np.sum(valid >= a2)) / (1 + valid.size))


def anderson_darling_gpd(
    excesses: Sequence[float],
    gamma_hat: float,
    sigma_hat: float,
    alpha: float = 0.001,
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
    max_workers: Optional[int] = None,
    force_bootstrap: bool = False,
    series_name: str = "",
) -> TestReport:
    y = np.asarray(excesses, dtype=float).ravel()
    if y.size < MIN_EXCESSES:
        raise DataError(f"Anderson-Darling needs at least {MIN_EXCESSES} excesses, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise DataError("excesses contain non-finite values")
    check_support(y, gamma_hat, sigma_hat)
    if n_bootstrap < 1:
        raise DataError(f"n_bootstrap must be positive, got {n_bootstrap}")

    a2 = a2_statistic(y, gamma_hat, sigma_hat)
    if in_table(gamma_hat) and not force_bootstrap:
        method, p = "table", table_p_value(a2, gamma_hat)
    else:
        method = "bootstrap"
        p = bootstrap_p_value(a2, y.size, gamma_hat, sigma_hat, n_bootstrap, seed, max_workers)
    logger.info("Anderson-Darling n=%d A2=%.4f p=%.3g (%s)", y.size, a2, p, method)
    return TestReport(
        test_name=TEST_NAME,
        statistic=a2,
        p_value=p,
        alpha=alpha,
        method=method,
        n=int(y.size),
        series_name=series_name,
    )
