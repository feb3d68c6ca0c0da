import logging
import os

import numpy as np
import pandas as pd

from lstm_anomaly_rules.dto.series import ErrorSeries, WindowSet
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.storage.artifact_client import ArtifactClient

logger = logging.getLogger(__name__)

ERRORS_ARTIFACT = "errors.csv"
PREDICTIONS_ARTIFACT = "predictions.csv"


class ErrorDAO:
    def __init__(self, output_dir: str, client: ArtifactClient = None):
        if not client:
            self.artifact_client: ArtifactClient = ArtifactClient(output_dir=output_dir)
        else:
            self.artifact_client = client

    @staticmethod
    def load_external_errors(path: str) -> ErrorSeries:
        """
        Two-column CSV of (index, error), with or without an ``index,error`` header
        :raises DataError: missing or empty file, unparseable or negative errors
        """
        if not os.path.isfile(path):
            raise DataError(f"errors file not found: {path}")
        try:
            frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False)
        except pd.errors.EmptyDataError:
            raise DataError(f"errors file is empty: {path}")

        if frame.shape[1] != 2:
            raise DataError(f"errors file {path} must have exactly two columns, found {frame.shape[1]}")
        first = frame.iloc[0].str.strip().str.lower().tolist()
        if first == ["index", "error"]:
            frame = frame.iloc[1:]
        if len(frame) == 0:
            raise DataError(f"errors file holds no rows: {path}")

        indices = pd.to_numeric(frame[0].str.strip(), errors="coerce")
        try:
            # astype(float) parses with correct rounding, so written errors read back bit-exact
            errors = frame[1].str.strip().astype(float).to_numpy()
        except ValueError:
            raise DataError(f"errors file {path} holds non-numeric errors")
        if indices.isna().any() or np.isnan(errors).any():
            raise DataError(f"errors file {path} holds non-numeric entries")
        if np.any(errors < 0):
            row = int(np.flatnonzero(errors < 0)[0])
            raise DataError(f"negative error {errors[row]} in row {row + 1} of {path}")
        if not np.all(np.isfinite(errors)):
            raise DataError(f"errors file {path} holds non-finite errors")

        try:
            return ErrorSeries(indices=indices.to_numpy(), errors=errors)
        except ValueError as e:
            raise DataError(f"invalid errors file {path}: {e}")

    def save_errors(self, errors: ErrorSeries):
        self.artifact_client.insert_table(
            ERRORS_ARTIFACT, pd.DataFrame({"index": errors.indices, "error": errors.errors})
        )

    def get_errors(self) -> ErrorSeries:
        frame = self.artifact_client.get_table(ERRORS_ARTIFACT)
        return ErrorSeries(
            indices=frame["index"].to_numpy(dtype=np.int64),
            errors=frame["error"].to_numpy(dtype=float),
        )

    def save_predictions(self, windows: WindowSet, predictions: np.ndarray, horizon_index: int):
        self.artifact_client.insert_table(
            PREDICTIONS_ARTIFACT,
            pd.DataFrame(
                {
                    "index": windows.origin_indices + horizon_index,
                    "actual": windows.targets[:, horizon_index],
                    "predicted": predictions[:, horizon_index],
                }
            ),
        )

    def get_predictions(self) -> pd.DataFrame:
        return self.artifact_client.get_table(PREDICTIONS_ARTIFACT)

    def has_predictions(self) -> bool:
        return self.artifact_client.exists(PREDICTIONS_ARTIFACT)
