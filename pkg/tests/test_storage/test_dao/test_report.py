import os
import tempfile
import unittest

from lstm_anomaly_rules.dto.forecaster import Checkpoint, ForecasterConfig, TrainReport
from lstm_anomaly_rules.dto.reports import ConfusionCounts, TestReport
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.evaluation.metrics import compute_metrics, render_metrics_table
from lstm_anomaly_rules.forecaster.lstm import init_params
from lstm_anomaly_rules.storage.artifact_client import ArtifactClient
from lstm_anomaly_rules.storage.dao.model import MODEL_ARTIFACT, ModelDAO
from lstm_anomaly_rules.storage.dao.report import METRICS_TABLE_ARTIFACT, ReportDAO


class TestReportDAO(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.client = ArtifactClient(output_dir=self.tmp.name)
        self.dao = ReportDAO(output_dir=self.tmp.name, client=self.client)

    def tearDown(self):
        self.tmp.cleanup()

    def test_no_test_reports_yet(self):
        self.assertEqual(self.dao.get_test_reports(), [])

    def test_test_reports_merge_by_name(self):
        sw = TestReport(test_name="shapiro_wilk", statistic=0.91, p_value=1e-8)
        ad = TestReport(test_name="anderson_darling_gpd", statistic=0.4, p_value=0.3)
        self.dao.save_test_reports([sw, ad])

        rerun = TestReport(test_name="shapiro_wilk", statistic=0.99, p_value=0.2)
        self.dao.save_test_reports([rerun])

        self.assertEqual(self.dao.get_test_reports(), [ad, rerun])

    def test_metrics(self):
        reports = [compute_metrics(ConfusionCounts(true_positives=2, false_positives=1), detector_name="tukey")]
        table = render_metrics_table(reports)

        self.dao.save_metrics(reports, table)

        self.assertEqual(self.dao.get_metrics(), reports)
        with open(self.client.locate(METRICS_TABLE_ARTIFACT)) as f:
            self.assertEqual(f.read(), table)


class TestModelDAO(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dao = ModelDAO(output_dir=self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_checkpoint_round_trip(self):
        config = ForecasterConfig(recurrent_layer_sizes=[3], l_b=2, seed=4)
        checkpoint = Checkpoint(config=config, params=init_params(config), seed=4)

        self.dao.save_checkpoint(checkpoint)
        restored = self.dao.get_checkpoint()

        self.assertEqual(restored.config, config)
        self.assertEqual(restored.params.to_vector().tolist(), checkpoint.params.to_vector().tolist())

    def test_unsupported_checkpoint_version(self):
        with open(os.path.join(self.tmp.name, MODEL_ARTIFACT), "w") as f:
            f.write('{"format_version": 0}')

        with self.assertRaises(DataError):
            self.dao.get_checkpoint()

    def test_train_report(self):
        report = TrainReport(epochs_run=2, train_mse_per_epoch=[0.2, 0.1], validation_mse_per_epoch=[0.3, 0.2], best_epoch=2)

        self.dao.save_train_report(report)

        self.assertEqual(self.dao.get_train_report(), report)
