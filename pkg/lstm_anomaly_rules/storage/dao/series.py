import json
import logging
import os
from typing import Optional

import numpy as np
import pandas as pd

from lstm_anomaly_rules.dto.series import CsvSchema, SplitManifest, TimeSeries
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.storage.artifact_client import ArtifactClient

logger = logging.getLogger(__name__)

SERIES_ARTIFACT = "series.csv"
SPLIT_ARTIFACT = "split.json"

MISSING_VALUES = {"", "nan", "na", "n/a", "null", "none", "inf", "+inf", "-inf", "infinity", "-infinity"}
INTEGER_TICK = r"[+-]?\d+"


def _parse_timestamps(column: pd.Series) -> np.ndarray:
    """Integer ticks stay as they are; anything else is parsed as ISO-8601 into UTC nanoseconds."""
    stripped = column.str.strip()
    if stripped.str.fullmatch(INTEGER_TICK).all():
        return stripped.astype(np.int64).to_numpy()
    try:
        parsed = pd.to_datetime(stripped, format="ISO8601", utc=True)
    except (ValueError, TypeError) as e:
        raise DataError(f"unparseable timestamp: {e}")
    return parsed.dt.tz_convert(None).dt.as_unit("ns").astype(np.int64).to_numpy()


def _parse_labels(column: pd.Series) -> np.ndarray:
    stripped = column.str.strip().replace("", "0")
    bad = ~stripped.isin({"0", "1", "0.0", "1.0"})
    if bad.any():
        raise DataError(f"label column must hold 0/1, found {stripped[bad].iloc[0]!r}")
    return stripped.astype(float).astype(np.int64).to_numpy()


class SeriesDAO:
    def __init__(self, output_dir: str, client: ArtifactClient = None):
        if not client:
            self.artifact_client: ArtifactClient = ArtifactClient(output_dir=output_dir)
        else:
            self.artifact_client = client

    @staticmethod
    def load_csv(path: str, schema: CsvSchema = CsvSchema(), name: Optional[str] = None) -> TimeSeries:
        """
        Read a univariate series. Rows whose value is missing, NaN or infinite are dropped and
        counted, as are repeated timestamps (the first occurrence is kept). Unparseable values
        or timestamps raise DataError.
        """
        if not os.path.isfile(path):
            raise DataError(f"dataset file not found: {path}")
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except pd.errors.EmptyDataError:
            raise DataError(f"dataset file is empty: {path}")

        for column in (schema.timestamp, schema.value):
            if column not in frame.columns:
                raise DataError(f"column {column!r} missing from {path} (found {list(frame.columns)})")

        raw_values = frame[schema.value].str.strip()
        values = pd.to_numeric(raw_values, errors="coerce")
        missing = raw_values.str.lower().isin(MISSING_VALUES)
        unparseable = values.isna() & ~missing
        if unparseable.any():
            row = int(np.flatnonzero(unparseable.to_numpy())[0])
            raise DataError(f"unparseable value {raw_values.iloc[row]!r} in row {row + 1} of {path}")

        keep = np.isfinite(values.to_numpy(dtype=float))
        rejected = int((~keep).sum())
        frame = frame[keep]
        values = values[keep].to_numpy(dtype=float)
        if len(frame) == 0:
            raise DataError(f"no valid rows in {path}")

        timestamps = _parse_timestamps(frame[schema.timestamp])
        labels = None
        if schema.label and schema.label in frame.columns:
            labels = _parse_labels(frame[schema.label])

        order = np.argsort(timestamps, kind="stable")
        if np.any(np.diff(order) < 0):
            logger.warning("%s is not in timestamp order; rows were sorted", path)
        timestamps, values = timestamps[order], values[order]
        if labels is not None:
            labels = labels[order]

        first = np.concatenate([[True], np.diff(timestamps) > 0])
        duplicates = int((~first).sum())
        if duplicates:
            logger.warning("dropped %d rows with repeated timestamps from %s", duplicates, path)
        rejected += duplicates
        if rejected:
            logger.warning("rejected %d rows of %s", rejected, path)

        timestamps, values = timestamps[first], values[first]
        label_set = None
        if labels is not None:
            label_set = frozenset(np.flatnonzero(labels[first]).tolist())

        return TimeSeries(
            name=name or os.path.splitext(os.path.basename(path))[0],
            timestamps=timestamps,
            values=values,
            labels=label_set,
            rejected_rows=rejected,
        )

    @staticmethod
    def load_label_windows(path: str, series: TimeSeries, key: Optional[str] = None) -> TimeSeries:
        """
        Add labels from a JSON file of anomaly windows. The file holds either a list or a mapping
        from series key to list; every entry is a ``[start, end]`` pair (inclusive) or a single
        timestamp. Timestamps may be ISO-8601 strings or integer ticks.
        """
        if not os.path.isfile(path):
            raise DataError(f"label file not found: {path}")
        with open(path) as f:
            try:
                payload = json.load(f)
            except json.JSONDecodeError as e:
                raise DataError(f"label file {path} is not valid JSON: {e}")

        if isinstance(payload, dict):
            matches = [k for k in payload if k == key or (key is None and series.name in k)]
            if len(matches) != 1:
                raise DataError(
                    f"cannot pick the label entry for {key or series.name!r} in {path}, "
                    f"candidates: {matches or sorted(payload)}"
                )
            payload = payload[matches[0]]
        if not isinstance(payload, list):
            raise DataError(f"label file {path} must hold a list of windows")

        def to_tick(value) -> int:
            if isinstance(value, int):
                return value
            return int(_parse_timestamps(pd.Series([str(value)]))[0])

        labels = set(series.label_set)
        for entry in payload:
            start, end = (entry, entry) if not isinstance(entry, list) else entry
            start, end = to_tick(start), to_tick(end)
            inside = np.flatnonzero((series.timestamps >= start) & (series.timestamps <= end))
            labels.update(inside.tolist())

        logger.info("%d labeled indices from %d windows in %s", len(labels), len(payload), path)
        return series.model_copy(update={"labels": frozenset(labels)})

    def save_series(self, series: TimeSeries):
        labels = np.zeros(len(series), dtype=np.int64)
        labels[sorted(series.label_set)] = 1
        self.artifact_client.insert_table(
            SERIES_ARTIFACT,
            pd.DataFrame({"timestamp": series.timestamps, "value": series.values, "label": labels}),
        )

    def get_series(self, name: str) -> TimeSeries:
        frame = self.artifact_client.get_table(SERIES_ARTIFACT)
        return TimeSeries(
            name=name,
            timestamps=frame["timestamp"].to_numpy(dtype=np.int64),
            values=frame["value"].to_numpy(dtype=float),
            labels=frozenset(np.flatnonzero(frame["label"].to_numpy()).tolist()),
        )

    def save_split(self, manifest: SplitManifest):
        self.artifact_client.insert_document(SPLIT_ARTIFACT, manifest)

    def get_split(self) -> SplitManifest:
        return SplitManifest(**self.artifact_client.get_document(SPLIT_ARTIFACT))
