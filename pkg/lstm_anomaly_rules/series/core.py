import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lstm_anomaly_rules.dto.series import (
    ErrorSeries,
    SplitBoundaries,
    SplitSpec,
    TimeSeries,
    WindowSet,
)
from lstm_anomaly_rules.errors import DataError

logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray]


def split_boundaries(n: int, spec: SplitSpec) -> SplitBoundaries:
    """
    Integer-floor split sizes for train and validation; the remainder goes to test
    :param n: series length
    :param spec: split fractions
    :return: half-open parent-index ranges of the three segments
    """
    n_train = int(np.floor(n * spec.train_fraction))
    n_val = int(np.floor(n * spec.validation_fraction))
    return SplitBoundaries(
        n=n,
        train=[0, n_train],
        validation=[n_train, n_train + n_val],
        test=[n_train + n_val, n],
    )


def split(series: TimeSeries, spec: SplitSpec) -> Tuple[TimeSeries, TimeSeries, TimeSeries]:
    if len(series) < 3:
        raise DataError(f"series of length {len(series)} is too short to split")

    bounds = split_boundaries(len(series), spec)
    train, validation, test = (
        series.segment(*bounds.train),
        series.segment(*bounds.validation),
        series.segment(*bounds.test),
    )

    if train.label_set:
        first = min(train.label_set) + train.offset
        raise DataError(
            f"anomaly in training segment at index {first}: move the split or re-label the data"
        )

    return train, validation, test


def concat_segments(segments: Sequence[TimeSeries]) -> TimeSeries:
    if not segments:
        raise DataError("nothing to concatenate")

    labels = None
    if any(s.labels is not None for s in segments):
        base = segments[0].offset
        labels = frozenset(
            i + s.offset - base for s in segments for i in s.label_set
        )

    return TimeSeries(
        name=segments[0].name,
        timestamps=np.concatenate([s.timestamps for s in segments]),
        values=np.concatenate([s.values for s in segments]),
        labels=labels,
        offset=segments[0].offset,
    )


def make_windows(series: TimeSeries, l_b: int, l_a: int, stride: int = 1) -> WindowSet:
    if l_b < 1 or l_a < 1 or stride < 1:
        raise DataError("look-back, look-ahead and stride must be positive")
    if len(series) < l_b + l_a:
        raise DataError(
            f"series of length {len(series)} is shorter than look-back + look-ahead ({l_b + l_a})"
        )

    # Every view row is one contiguous (input, target) pair.
    pairs = sliding_window_view(series.values, l_b + l_a)[::stride]
    origins = series.offset + l_b + np.arange(0, len(series) - l_b - l_a + 1, stride)

    return WindowSet(
        inputs=pairs[:, :l_b],
        targets=pairs[:, l_b:],
        origin_indices=origins,
    )


def absolute_errors(
    actual: ArrayLike,
    predicted: ArrayLike,
    horizon_index: int = 0,
    indices: Optional[ArrayLike] = None,
) -> ErrorSeries:
    """
    |actual - predicted| at one forecast horizon.

    Accepts aligned 1-d sequences, or 2-d ``(windows, l_a)`` target/prediction blocks from
    which column ``horizon_index`` is taken. ``indices`` are the parent-series positions of the
    selected values and default to ``0..n-1``.
    """
    actual = np.asarray(actual.values if isinstance(actual, TimeSeries) else actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)

    if actual.shape != predicted.shape:
        raise DataError(f"length mismatch: {actual.shape} actual vs {predicted.shape} predicted")
    if horizon_index < 0:
        raise DataError("horizon_index must be non-negative")

    if actual.ndim == 2:
        if horizon_index >= actual.shape[1]:
            raise DataError(
                f"horizon_index {horizon_index} outside look-ahead {actual.shape[1]}"
            )
        actual = actual[:, horizon_index]
        predicted = predicted[:, horizon_index]

    if indices is None:
        indices = np.arange(actual.size)

    return ErrorSeries(indices=indices, errors=np.abs(actual - predicted))


def empirical_quantile(values: ArrayLike, level: Union[float, Sequence[float]]):
    """Quantile by linear interpolation between closest order statistics."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DataError("quantile of an empty sample")
    return np.quantile(values, level, method="linear")
