import numpy as np

from lstm_anomaly_rules.dto.fits import DetectionResult, TukeyFit
from lstm_anomaly_rules.dto.series import ErrorSeries
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.series.core import empirical_quantile

DETECTOR_NAME = "tukey"
FAR_OUT = 3.0
INNER = 1.5


def fit_tukey(errors: ErrorSeries, fence_multiplier: float = FAR_OUT) -> TukeyFit:
    """Upper fence Q3 + m * (Q3 - Q1) over the whole (train + validation + test) error stream."""
    if len(errors) < 4:
        raise DataError(f"need at least 4 errors for quartiles, got {len(errors)}")
    q1, q3 = (float(v) for v in empirical_quantile(errors.errors, [0.25, 0.75]))
    return TukeyFit(
        q1=q1,
        q3=q3,
        tau_t=q3 + fence_multiplier * (q3 - q1),
        fence_multiplier=fence_multiplier,
    )


def detect_tukey(fit: TukeyFit, errors: ErrorSeries) -> DetectionResult:
    # errors are absolute deviations, so only the upper fence applies
    return DetectionResult(
        detector=DETECTOR_NAME,
        indices=errors.indices,
        scores=errors.errors,
        flagged=(errors.errors > fit.tau_t).astype(np.int64),
        threshold=fit.tau_t,
    )
