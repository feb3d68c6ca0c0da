import os
import tempfile
import unittest
from unittest.mock import MagicMock, patch

import numpy as np
import pandas as pd

from lstm_anomaly_rules.dto.series import WindowSet
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.storage.dao.errors import ERRORS_ARTIFACT, PREDICTIONS_ARTIFACT, ErrorDAO

DATA_DIR = os.path.join(os.path.dirname(__file__), "../../data")


class TestLoadExternalErrors(unittest.TestCase):
    def write(self, text):
        with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as f:
            f.write(text)
        self.addCleanup(os.unlink, f.name)
        return f.name

    def test_headerless(self):
        errors = ErrorDAO.load_external_errors(os.path.join(DATA_DIR, "external_errors.csv"))

        self.assertEqual(errors.indices.tolist(), [0, 1])
        self.assertEqual(errors.errors.tolist(), [0.5, 1.0])

    def test_with_header(self):
        errors = ErrorDAO.load_external_errors(self.write("index,error\n10,0.25\n11,0.5\n"))
        self.assertEqual(errors.indices.tolist(), [10, 11])

    def test_negative_error(self):
        with self.assertRaises(DataError) as raised:
            ErrorDAO.load_external_errors(os.path.join(DATA_DIR, "negative_errors.csv"))

        self.assertIn("negative error", str(raised.exception))
        self.assertIn("row 3", str(raised.exception))

    def test_rejected_files(self):
        cases = {
            "empty": "",
            "header only": "index,error\n",
            "one column": "0.5\n1.0\n",
            "non-numeric": "0,abc\n",
            "non-finite": "0,inf\n",
            "unordered indices": "1,0.5\n0,0.5\n",
        }
        for case, text in cases.items():
            with self.subTest(case):
                with self.assertRaises(DataError):
                    ErrorDAO.load_external_errors(self.write(text))

    def test_missing_file(self):
        with self.assertRaises(DataError):
            ErrorDAO.load_external_errors(os.path.join(DATA_DIR, "absent.csv"))


class TestErrorDAO(unittest.TestCase):
    @patch("lstm_anomaly_rules.storage.artifact_client.ArtifactClient")
    def test_get_errors(self, mocked_client: MagicMock):
        mocked_client.get_table.return_value = pd.DataFrame({"index": [4, 5], "error": [0.1, 0.2]})

        errors = ErrorDAO(output_dir="test-output", client=mocked_client).get_errors()

        mocked_client.get_table.assert_called_once_with(ERRORS_ARTIFACT)
        self.assertEqual(errors.indices.tolist(), [4, 5])
        self.assertEqual(errors.errors.tolist(), [0.1, 0.2])

    @patch("lstm_anomaly_rules.storage.artifact_client.ArtifactClient")
    def test_save_predictions_at_horizon(self, mocked_client: MagicMock):
        windows = WindowSet(inputs=[[1.0], [2.0]], targets=[[2.0, 3.0], [3.0, 4.0]], origin_indices=[1, 2])
        predictions = np.array([[2.5, 3.5], [2.5, 3.0]])

        ErrorDAO(output_dir="test-output", client=mocked_client).save_predictions(windows, predictions, 1)

        name, frame = mocked_client.insert_table.call_args[0]
        self.assertEqual(name, PREDICTIONS_ARTIFACT)
        self.assertEqual(frame["index"].tolist(), [2, 3])
        self.assertEqual(frame["actual"].tolist(), [3.0, 4.0])
        self.assertEqual(frame["predicted"].tolist(), [3.5, 3.0])
