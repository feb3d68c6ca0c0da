from typing import Dict, List, Type, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from lstm_anomaly_rules.dto.fits import DetectionResult, GaussianFit, GpdFit, TukeyFit
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.storage.artifact_client import ArtifactClient

Fit = Union[GaussianFit, GpdFit, TukeyFit]

FIT_TYPES: Dict[str, Type[BaseModel]] = {
    "gaussian": GaussianFit,
    "evt": GpdFit,
    "tukey": TukeyFit,
}


def fit_artifact(rule: str) -> str:
    return f"{rule}_fit.json"


def detections_artifact(rule: str) -> str:
    return f"{rule}_detections.csv"


class DetectionDAO:
    def __init__(self, output_dir: str, client: ArtifactClient = None):
        if not client:
            self.artifact_client: ArtifactClient = ArtifactClient(output_dir=output_dir)
        else:
            self.artifact_client = client

    @staticmethod
    def fit_type(rule: str) -> Type[BaseModel]:
        try:
            return FIT_TYPES[rule]
        except KeyError:
            raise DataError(f"unknown detection rule {rule!r}, choose one of {sorted(FIT_TYPES)}")

    def save_fit(self, rule: str, fit: Fit):
        self.fit_type(rule)
        self.artifact_client.insert_document(fit_artifact(rule), fit)

    def get_fit(self, rule: str) -> Fit:
        return self.fit_type(rule)(**self.artifact_client.get_document(fit_artifact(rule)))

    def save_detections(self, result: DetectionResult):
        self.artifact_client.insert_table(
            detections_artifact(result.detector),
            pd.DataFrame({"index": result.indices, "score": result.scores, "flagged": result.flagged}),
        )

    def get_detections(self, rule: str) -> DetectionResult:
        """The threshold is read back from the fit artifact."""
        frame = self.artifact_client.get_table(detections_artifact(rule))
        fit = self.get_fit(rule)
        threshold = {"gaussian": "tau_g", "evt": "q", "tukey": "tau_t"}[rule]
        return DetectionResult(
            detector=rule,
            indices=frame["index"].to_numpy(dtype=np.int64),
            scores=frame["score"].to_numpy(dtype=float),
            flagged=frame["flagged"].to_numpy(dtype=np.int64),
            threshold=getattr(fit, threshold),
        )

    def available_rules(self) -> List[str]:
        return [rule for rule in FIT_TYPES if self.artifact_client.exists(detections_artifact(rule))]
