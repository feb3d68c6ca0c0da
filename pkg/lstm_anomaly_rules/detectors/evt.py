"""
Peaks-over-threshold detection rule.

Excesses over a high empirical quantile ``t`` of the error stream are modelled by a Generalized
Pareto Distribution fitted by maximum likelihood. For a risk level ``q`` the detection threshold
is the GPD quantile::

    tau_e = t + (sigma / gamma) * ((q * n / N_t) ** -gamma - 1)

and an error is flagged when it exceeds ``tau_e``, i.e. when its tail probability is below ``q``.
Formulas switch to their exponential (gamma -> 0) limits when |gamma| < GAMMA_EPS.
"""
import logging
from typing import Iterable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from lstm_anomaly_rules.dto.fits import DetectionResult, GpdFit
from lstm_anomaly_rules.dto.series import ErrorSeries
from lstm_anomaly_rules.errors import DataError, GpdFitError
from lstm_anomaly_rules.evaluation.matching import label_events
from lstm_anomaly_rules.series.core import empirical_quantile

logger = logging.getLogger(__name__)

DETECTOR_NAME = "evt"
GAMMA_EPS = 1e-8
DEFAULT_LEVEL = 0.98
DEFAULT_Q_GRID = (1e-3, 1e-4, 1e-5)
MIN_OBSERVATIONS = 50
MIN_EXCESSES = 10
MAX_LOG_THETA = 250.0
Q_RANGE = (1e-5, 1e-3)


class TailProbability(NamedTuple):
    probability: float
    below_threshold: bool


def initial_threshold(
    errors: ErrorSeries, level: float = DEFAULT_LEVEL, min_observations: int = MIN_OBSERVATIONS
) -> float:
    if not 0.0 < level < 1.0:
        raise DataError(f"quantile level {level} outside (0, 1)")
    if len(errors) < min_observations:
        raise DataError(
            f"need at least {min_observations} errors to set an initial threshold, got {len(errors)}"
        )
    return float(empirical_quantile(errors.errors, level))


def excesses_over(errors: ErrorSeries, t: float) -> np.ndarray:
    """Strict exceedances only; values tied with ``t`` carry no excess."""
    return errors.errors[errors.errors > t] - t


def gpd_log_likelihood(excesses: np.ndarray, gamma: float, sigma: float) -> float:
    n = excesses.size
    if sigma <= 0:
        return -np.inf
    if abs(gamma) < GAMMA_EPS:
        return float(-n * np.log(sigma) - excesses.sum() / sigma)
    z = gamma * excesses / sigma
    if np.any(z <= -1.0):
        return -np.inf
    return float(-n * np.log(sigma) - (1.0 + 1.0 / gamma) * np.log1p(z).sum())


def _grimshaw_w(excesses: np.ndarray, theta: float) -> float:
    # u(theta) * v(theta) - 1, expanded around 1 to keep precision for small |theta|
    u_minus_1 = np.mean(np.log1p(theta * excesses))
    v_minus_1 = -np.mean(theta * excesses / (1.0 + theta * excesses))
    return float(u_minus_1 + v_minus_1 + u_minus_1 * v_minus_1)


def _bracketed_roots(func, grid: np.ndarray) -> list:
    values = np.array([func(x) for x in grid])
    roots = []
    for k in range(len(grid) - 1):
        a, b = values[k], values[k + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0.0:
            roots.append(grid[k])
        elif a * b < 0.0:
            roots.append(brentq(func, grid[k], grid[k + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    return roots


def _positive_grid(y: np.ndarray, n_grid: int, per_decade: int = 20) -> np.ndarray:
    # positive roots lie below 2 (mean - min) / min**2; heavy tails push it far past 1e6
    y_min = float(y.min())
    log_upper = np.log10(2.0 * (y.mean() - y_min)) - 2.0 * np.log10(y_min)
    hi = min(max(log_upper, 0.0) + 0.1, MAX_LOG_THETA)
    lo = min(-6.0, hi - 6.0)
    return np.logspace(lo, hi, max(n_grid, int(per_decade * (hi - lo))))


def fit_gpd(
    excesses: Sequence[float], allow_exponential_fallback: bool = True, n_grid: int = 200
) -> Tuple[float, float]:
    """
    Maximum-likelihood GPD fit by Grimshaw's reduction.

    With ``theta = gamma / sigma`` the likelihood equations reduce to the single equation
    ``w(theta) = u(theta) v(theta) - 1 = 0`` where ``u = 1 + mean(log(1 + theta y))`` and
    ``v = mean(1 / (1 + theta y))``; then ``gamma = u - 1`` and ``sigma = gamma / theta``. Roots
    are bracketed on log-spaced grids over ``(-1 / max(y), 0)`` and ``(0, 2 (mean(y) - min(y)) / min(y)**2)``
    on excesses scaled to unit mean, refined with Brent's method, and compared by likelihood together
    with the exponential limit ``gamma = 0, sigma = mean(y)``.

    :return: (gamma_hat, sigma_hat)
    """
    y = np.asarray(excesses, dtype=float)
    if y.size < MIN_EXCESSES:
        raise DataError(f"need at least {MIN_EXCESSES} excesses to fit a GPD, got {y.size}")
    if np.any(~np.isfinite(y)) or np.any(y <= 0.0):
        raise DataError("GPD excesses must be finite and strictly positive")
    if np.ptp(y) == 0.0:
        raise DataError("GPD excesses have zero spread")

    # Work on excesses scaled to unit mean; gamma is scale free and sigma scales back.
    scale = float(y.mean())
    y = y / scale
    y_max = float(y.max())

    # theta * y_max spans (-1, 0): dense near 0 and near the support boundary -1
    s = np.concatenate([np.logspace(-6, 0, n_grid), 1.0 - np.logspace(-12, -1, n_grid)])
    s = np.unique(s[(s > 0.0) & (s < 1.0)])
    left = -s[::-1] / y_max
    right = _positive_grid(y, n_grid)

    func = lambda theta: _grimshaw_w(y, theta)  # noqa: E731
    roots = _bracketed_roots(func, left) + _bracketed_roots(func, right)

    gamma_best, sigma_best = 0.0, 1.0
    ll_best = gpd_log_likelihood(y, 0.0, 1.0)
    for theta in roots:
        gamma = float(np.mean(np.log1p(theta * y)))
        sigma = gamma / theta
        ll = gpd_log_likelihood(y, gamma, sigma)
        if ll > ll_best:
            gamma_best, sigma_best, ll_best = gamma, sigma, ll

    if not roots:
        if not allow_exponential_fallback:
            raise GpdFitError("no root of the Grimshaw equation found", stage="detect-evt")
        logger.warning("no Grimshaw root for %d excesses; using the exponential fit", y.size)

    if abs(gamma_best) < GAMMA_EPS:
        gamma_best = 0.0
    return gamma_best, float(sigma_best * scale)


def evt_threshold(t: float, gamma_hat: float, sigma_hat: float, q: float, n: int, N_t: int) -> float:
    if not 0.0 < q < 1.0:
        raise DataError(f"risk level q={q} outside (0, 1)")
    if not n >= N_t >= 1:
        raise DataError(f"need n >= N_t >= 1, got n={n}, N_t={N_t}")
    if sigma_hat <= 0:
        raise DataError("sigma_hat must be positive")

    log_ratio = np.log(q * n / N_t)
    if abs(gamma_hat) < GAMMA_EPS:
        return float(t - sigma_hat * log_ratio)
    return float(t + sigma_hat * np.expm1(-gamma_hat * log_ratio) / gamma_hat)


def tail_probabilities(fit: GpdFit, x: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorised ``P(X > x)`` under the fitted tail
    :return: probabilities and a mask of inputs below ``t`` (which get the bound N_t / n)
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    below = x < fit.t
    z = np.where(below, 0.0, x - fit.t) / fit.sigma_hat
    rate = fit.peak_rate

    if abs(fit.gamma_hat) < GAMMA_EPS:
        return rate * np.exp(-z), below

    base = 1.0 + fit.gamma_hat * z
    outside = base <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        prob = rate * np.exp(-np.log1p(fit.gamma_hat * z) / fit.gamma_hat)
    return np.where(outside, 0.0, prob), below


def tail_probability(fit: GpdFit, x: float) -> TailProbability:
    prob, below = tail_probabilities(fit, x)
    return TailProbability(float(prob[0]), bool(below[0]))


def fit_pot(errors: ErrorSeries, level: float = DEFAULT_LEVEL, q: Optional[float] = None) -> GpdFit:
    """Initial threshold, excesses and GPD fit in one go; sets ``tau_e`` when ``q`` is given."""
    t = initial_threshold(errors, level)
    y = excesses_over(errors, t)
    if y.size == 0:
        raise DataError(f"no error exceeds the initial threshold t={t}")
    gamma_hat, sigma_hat = fit_gpd(y)

    fit = GpdFit(t=t, gamma_hat=gamma_hat, sigma_hat=sigma_hat, n=len(errors), N_t=int(y.size))
    logger.info(
        "POT fit: t=%.6g gamma=%.4f sigma=%.6g n=%d N_t=%d", t, gamma_hat, sigma_hat, fit.n, fit.N_t
    )
    if q is not None:
        fit = with_risk_level(fit, q)
    return fit


def with_risk_level(fit: GpdFit, q: float) -> GpdFit:
    tau_e = evt_threshold(fit.t, fit.gamma_hat, fit.sigma_hat, q, fit.n, fit.N_t)
    return fit.model_copy(update={"q": q, "tau_e": tau_e})


def calibrate_q(
    init_errors: ErrorSeries,
    init_labels: Iterable[int],
    q_grid: Sequence[float] = DEFAULT_Q_GRID,
    level: float = DEFAULT_LEVEL,
) -> float:
    """
    Smallest q on the grid whose threshold lets every labeled anomaly of the initialization
    stream through (each run of consecutive labels needs one error above tau_e). Falls back to
    the largest q with a warning.

    :raises DataError: empty grid or a q outside ``Q_RANGE``, no labeled anomaly in the stream
    """
    low, high = Q_RANGE
    if not q_grid or any(not low <= q <= high for q in q_grid):
        raise DataError(f"q_grid {list(q_grid)} must be non-empty and within [{low:g}, {high:g}]")
    present = init_errors.labels_within(init_labels)
    if not present:
        raise DataError("initialization stream has no labeled anomaly to calibrate q on")

    fit = fit_pot(init_errors, level)
    lookup = dict(zip(init_errors.indices.tolist(), init_errors.errors.tolist()))
    peaks = [
        max(lookup[i] for i in range(start, end + 1) if i in lookup)
        for start, end in label_events(present)
    ]

    for q in sorted(q_grid):
        tau_e = with_risk_level(fit, q).tau_e
        if all(peak > tau_e for peak in peaks):
            logger.info("calibrated q=%g (tau_e=%.6g)", q, tau_e)
            return float(q)

    q = float(max(q_grid))
    logger.warning(
        "no q in %s lets all %d labeled anomalies exceed tau_e; falling back to q=%g",
        list(q_grid),
        len(peaks),
        q,
    )
    return q


def detect_evt(fit: GpdFit, errors: ErrorSeries) -> DetectionResult:
    if not fit.complete:
        raise DataError("GPD fit has no risk level; set q before detecting")
    prob, _ = tail_probabilities(fit, errors.errors)
    return DetectionResult(
        detector=DETECTOR_NAME,
        indices=errors.indices,
        scores=prob,
        flagged=(errors.errors > fit.tau_e).astype(np.int64),
        threshold=fit.q,
    )
