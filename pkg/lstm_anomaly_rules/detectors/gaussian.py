import logging
from typing import Iterable, Tuple, Union

import numpy as np

from lstm_anomaly_rules.dto.fits import DetectionResult, GaussianFit
from lstm_anomaly_rules.dto.reports import MatchSpec, MetricsReport
from lstm_anomaly_rules.dto.series import ErrorSeries
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.evaluation.matching import match_detections
from lstm_anomaly_rules.evaluation.metrics import compute_metrics

logger = logging.getLogger(__name__)

DETECTOR_NAME = "gaussian"


def fit_gaussian(errors: ErrorSeries) -> GaussianFit:
    """Maximum-likelihood normal fit: sample mean and the biased (1/n) variance."""
    if len(errors) < 2:
        raise DataError(f"gaussian fit needs at least 2 errors, got {len(errors)}")
    sigma2 = float(np.var(errors.errors))
    if sigma2 <= 0.0:
        raise DataError("zero variance: all training errors are identical")
    return GaussianFit(mu=float(np.mean(errors.errors)), sigma2=sigma2)


def log_pd(fit: GaussianFit, x: Union[float, np.ndarray]):
    x = np.asarray(x, dtype=float)
    scores = -0.5 * np.log(2.0 * np.pi * fit.sigma2) - (x - fit.mu) ** 2 / (2.0 * fit.sigma2)
    return float(scores) if scores.ndim == 0 else scores


def _candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive distinct scores plus one sentinel beyond each end."""
    distinct = np.unique(scores)
    midpoints = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate([[distinct[0] - 1.0], midpoints, [distinct[-1] + 1.0]])


def tune_tau_g(
    fit: GaussianFit,
    val_errors: ErrorSeries,
    val_labels: Iterable[int],
    matcher: MatchSpec = MatchSpec(),
) -> Tuple[GaussianFit, MetricsReport]:
    """
    Pick the log-PD threshold maximising validation F1.

    Ties go to fewer false positives, then to the lower threshold.
    """
    labels = val_errors.labels_within(val_labels)
    if not labels:
        raise DataError("validation set contains no labeled anomaly to tune tau_g on")
    if len(val_errors) == 0:
        raise DataError("validation error stream is empty")

    scores = log_pd(fit, val_errors.errors)
    best_key, best = None, None
    for tau in _candidate_thresholds(np.atleast_1d(scores)):
        flags = val_errors.indices[scores < tau]
        report = compute_metrics(
            match_detections(flags, labels, matcher),
            detector_name=DETECTOR_NAME,
            regulator="tau_g",
            regulator_value=float(tau),
        )
        key = (-report.f1, report.counts.false_positives, tau)
        if best_key is None or key < best_key:
            best_key, best = key, (float(tau), report)

    tau_g, report = best
    logger.info(
        "tau_g=%.4f with validation P=%.3f R=%.3f F1=%.3f",
        tau_g,
        report.precision,
        report.recall,
        report.f1,
    )
    return fit.model_copy(update={"tau_g": tau_g}), report


def detect_gaussian(fit: GaussianFit, errors: ErrorSeries) -> DetectionResult:
    if fit.tau_g is None:
        raise DataError("gaussian fit has no tau_g; tune it on validation errors first")
    scores = np.atleast_1d(log_pd(fit, errors.errors))
    return DetectionResult(
        detector=DETECTOR_NAME,
        indices=errors.indices,
        scores=scores,
        flagged=(scores < fit.tau_g).astype(np.int64),
        threshold=fit.tau_g,
    )
