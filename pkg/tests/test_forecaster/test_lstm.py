import math
import unittest
from unittest import mock

import numpy as np

from lstm_anomaly_rules.dto.forecaster import GATES, ForecasterConfig, LayerParams, ModelParams
from lstm_anomaly_rules.errors import DataError
from lstm_anomaly_rules.forecaster.lstm import (
    forward,
    forward_batch,
    gradient_check,
    init_params,
    mse_and_gradient,
    net_from_params,
    predict,
    relative_deviation,
)


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def scalar_params(w, u, b, w_dense, b_dense):
    """One-unit LSTM; ``w``, ``u`` and ``b`` map gate name to input weight, recurrent weight and bias."""
    fields = {f"w_{g}": [[w[g], u[g]]] for g in GATES}
    fields.update({f"b_{g}": [b[g]] for g in GATES})
    return ModelParams(layers=[LayerParams(**fields)], w_dense=[[w_dense]], b_dense=[b_dense])


class TestInitParams(unittest.TestCase):
    def test_shapes(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[20], l_b=1, l_a=1))

        for gate in GATES:
            self.assertEqual(getattr(params.layers[0], f"w_{gate}").shape, (20, 21))
        self.assertEqual(params.w_dense.shape, (1, 20))

    def test_two_layer_dense_shape(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[60, 30], l_b=8, l_a=5))

        self.assertEqual(params.layers[1].w_input.shape, (30, 90))
        self.assertEqual(params.w_dense.shape, (5, 30))

    def test_biases(self):
        layer = init_params(ForecasterConfig(recurrent_layer_sizes=[7])).layers[0]

        np.testing.assert_array_equal(layer.b_forget, np.ones(7))
        for gate in ("input", "output", "candidate"):
            np.testing.assert_array_equal(getattr(layer, f"b_{gate}"), np.zeros(7))

    def test_deterministic(self):
        config = ForecasterConfig(recurrent_layer_sizes=[5, 3], seed=42)
        np.testing.assert_array_equal(init_params(config).to_vector(), init_params(config).to_vector())

    def test_vector_round_trip(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[4, 3], l_a=2))
        restored = params.from_vector(params.to_vector() * 2.0)

        np.testing.assert_array_equal(restored.to_vector(), params.to_vector() * 2.0)


class TestForward(unittest.TestCase):
    def test_zero_weights_give_zero_prediction(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[6], l_b=4, l_a=3))
        params = params.from_vector(np.zeros_like(params.to_vector()))

        np.testing.assert_array_equal(forward(params, [1.0, -2.0, 3.0, 0.5]), np.zeros(3))

    def test_scalar_cell_matches_gate_equations(self):
        w = {"input": 0.5, "forget": -0.3, "output": 0.8, "candidate": 1.2}
        u = {"input": 0.1, "forget": 0.2, "output": -0.4, "candidate": 0.7}
        b = {"input": 0.05, "forget": 1.0, "output": -0.1, "candidate": 0.2}
        params = scalar_params(w, u, b, w_dense=1.5, b_dense=-0.25)
        x = 0.4

        i = sigmoid(w["input"] * x + b["input"])
        o = sigmoid(w["output"] * x + b["output"])
        g = math.tanh(w["candidate"] * x + b["candidate"])
        h = o * math.tanh(i * g)
        expected = 1.5 * h - 0.25

        self.assertAlmostEqual(float(forward(params, [x])[0]), expected, places=12)

    def test_two_steps_use_recurrent_state(self):
        w = {"input": 0.5, "forget": -0.3, "output": 0.8, "candidate": 1.2}
        u = {"input": 0.1, "forget": 0.2, "output": -0.4, "candidate": 0.7}
        b = {"input": 0.05, "forget": 1.0, "output": -0.1, "candidate": 0.2}
        params = scalar_params(w, u, b, w_dense=1.0, b_dense=0.0).model_copy(update={"look_back": 2})

        h, c = 0.0, 0.0
        for x in (0.4, -0.6):
            i = sigmoid(w["input"] * x + u["input"] * h + b["input"])
            f = sigmoid(w["forget"] * x + u["forget"] * h + b["forget"])
            o = sigmoid(w["output"] * x + u["output"] * h + b["output"])
            g = math.tanh(w["candidate"] * x + u["candidate"] * h + b["candidate"])
            c = f * c + i * g
            h = o * math.tanh(c)

        self.assertAlmostEqual(float(forward(params, [0.4, -0.6])[0]), h, places=12)

    def test_output_length_is_look_ahead(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[5], l_b=3, l_a=4))
        self.assertEqual(forward(params, [0.1, 0.2, 0.3]).shape, (4,))

    def test_window_length_mismatch(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[5], l_b=3))
        with self.assertRaises(DataError):
            forward(params, [0.1, 0.2])

    def test_no_dropout_at_inference(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[8], l_b=5, dropout_rate=0.5))
        windows = np.random.default_rng(0).normal(size=(10, 5))

        np.testing.assert_array_equal(predict(params, windows), predict(params, windows))

    def test_dropout_only_with_generator(self):
        net = net_from_params(init_params(ForecasterConfig(recurrent_layer_sizes=[8], l_b=5)))
        windows = np.random.default_rng(0).normal(size=(10, 5))

        plain, _ = forward_batch(net, windows, dropout_rate=0.5)
        dropped, _ = forward_batch(net, windows, dropout_rate=0.5, rng=np.random.default_rng(1))

        np.testing.assert_array_equal(plain, forward_batch(net, windows)[0])
        self.assertFalse(np.allclose(plain, dropped))


class TestGradientCheck(unittest.TestCase):
    def check_depth(self, layers):
        config = ForecasterConfig(recurrent_layer_sizes=layers, l_b=5, l_a=2, seed=3)
        params = init_params(config)
        rng = np.random.default_rng(7)

        deviation = gradient_check(params, rng.normal(size=5), rng.normal(size=2), epsilon=1e-5)

        self.assertGreaterEqual(deviation, 0.0)
        self.assertLess(deviation, 1e-4)

    def test_one_layer(self):
        self.check_depth([6])

    def test_two_layers(self):
        self.check_depth([6, 4])

    def test_zero_loss_gives_zero_gradient(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[4, 3], l_b=3, l_a=2, seed=5))
        net = net_from_params(params)
        inputs = np.array([[0.2, 0.5, 0.9]])
        targets, _ = forward_batch(net, inputs)

        loss, gradient = mse_and_gradient(net, inputs, targets)

        self.assertEqual(loss, 0.0)
        np.testing.assert_array_equal(gradient, np.zeros_like(gradient))

    def test_epsilon_range(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[2]))
        with self.assertRaises(DataError):
            gradient_check(params, [0.1], [0.2], epsilon=0.1)

    def test_relative_deviation(self):
        self.assertAlmostEqual(relative_deviation(2.0, 1.0), 1.0 / 3.0, places=12)
        self.assertEqual(relative_deviation(0.0, 0.0), 0.0)
        # stays relative for tiny gradients
        self.assertAlmostEqual(relative_deviation(1e-9, 0.0), 1e-9 / (1e-9 + 1e-12), places=12)

    def test_wrong_gradient_is_reported(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[4], l_b=5, l_a=2, seed=3))
        rng = np.random.default_rng(7)
        window, target = rng.normal(size=5), rng.normal(size=2)

        def doubled(net, inputs, targets):
            loss, gradient = mse_and_gradient(net, inputs, targets)
            return loss, 2.0 * gradient

        with mock.patch("lstm_anomaly_rules.forecaster.lstm.mse_and_gradient", side_effect=doubled):
            deviation = gradient_check(params, window, target, epsilon=1e-5)

        self.assertAlmostEqual(deviation, 1.0 / 3.0, delta=1e-4)

    def test_vanishing_gradients_are_skipped(self):
        params = init_params(ForecasterConfig(recurrent_layer_sizes=[4], l_b=3, l_a=2, seed=5))
        window = [0.2, 0.5, 0.9]

        with self.assertLogs("lstm_anomaly_rules.forecaster.lstm", level="WARNING"):
            deviation = gradient_check(params, window, forward(params, window))

        self.assertEqual(deviation, 0.0)
