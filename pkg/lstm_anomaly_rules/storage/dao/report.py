from typing import List

import pandas as pd

from lstm_anomaly_rules.dto.reports import MetricsReport, TestReport
from lstm_anomaly_rules.storage.artifact_client import ArtifactClient

STAT_TESTS_ARTIFACT = "stat_tests.json"
METRICS_ARTIFACT = "metrics.json"
METRICS_TABLE_ARTIFACT = "metrics.txt"
PLOT_DATA_ARTIFACT = "plot_data.csv"


class ReportDAO:
    def __init__(self, output_dir: str, client: ArtifactClient = None):
        if not client:
            self.artifact_client: ArtifactClient = ArtifactClient(output_dir=output_dir)
        else:
            self.artifact_client = client

    def save_test_reports(self, reports: List[TestReport]):
        """Replaces earlier reports of the same test and keeps the others."""
        names = {r.test_name for r in reports}
        kept = [r for r in self.get_test_reports() if r.test_name not in names]
        merged = sorted(kept + list(reports), key=lambda r: r.test_name)
        self.artifact_client.insert_documents(STAT_TESTS_ARTIFACT, merged)

    def get_test_reports(self) -> List[TestReport]:
        if not self.artifact_client.exists(STAT_TESTS_ARTIFACT):
            return []
        return [TestReport(**r) for r in self.artifact_client.get_document(STAT_TESTS_ARTIFACT)]

    def save_metrics(self, reports: List[MetricsReport], table: str):
        self.artifact_client.insert_documents(METRICS_ARTIFACT, reports)
        self.artifact_client.insert_text(METRICS_TABLE_ARTIFACT, table)

    def get_metrics(self) -> List[MetricsReport]:
        return [MetricsReport(**r) for r in self.artifact_client.get_document(METRICS_ARTIFACT)]

    def save_plot_data(self, frame: pd.DataFrame):
        self.artifact_client.insert_table(PLOT_DATA_ARTIFACT, frame)
