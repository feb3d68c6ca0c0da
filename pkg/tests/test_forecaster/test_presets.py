import unittest

from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.forecaster.lstm import init_params
from lstm_anomaly_rules.forecaster.presets import PRESETS, get_preset


class TestPresets(unittest.TestCase):
    def test_ecg_architecture(self):
        config = get_preset("ecg")
        params = init_params(config)

        self.assertEqual(config.recurrent_layer_sizes, [60, 30])
        self.assertEqual(params.w_dense.shape, (5, 30))
        self.assertEqual(params.look_back, 8)

    def test_every_preset_trains_hundred_epochs(self):
        for name, config in PRESETS.items():
            with self.subTest(name):
                self.assertEqual(config.max_epochs, 100)
                self.assertEqual(config.batch_size, 64)

    def test_overrides(self):
        config = get_preset("travel_time", max_epochs=3, seed=9)

        self.assertEqual(config.max_epochs, 3)
        self.assertEqual(config.seed, 9)
        self.assertEqual(PRESETS["travel_time"].max_epochs, 100)

    def test_unknown_preset(self):
        with self.assertRaises(DataError):
            get_preset("weather")
