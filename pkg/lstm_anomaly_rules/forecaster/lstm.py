"""
Stacked LSTM forecaster written directly against numpy.

Each timestep feeds one scalar through the recurrent stack; the last layer's output at the final
timestep goes through a linear dense layer producing ``l_a`` values. Gates follow the standard
formulation::

    i = sigmoid(W_i [x, h] + b_i)      f = sigmoid(W_f [x, h] + b_f)
    o = sigmoid(W_o [x, h] + b_o)      g = tanh(W_g [x, h] + b_g)
    c = f * c_prev + i * g             h = o * tanh(c)

Dropout is inverted dropout on every recurrent layer's output sequence and is only active when a
random generator is passed to the forward pass.
"""
import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from lstm_anomaly_rules.dto.forecaster import GATES, ForecasterConfig, LayerParams, ModelParams
from lstm_anomaly_rules.errors import DataError

logger = logging.getLogger(__name__)

INPUT_SIZE = 1
DEVIATION_EPS = 1e-12
# central differences resolve gradients of the scaled-space MSE to about 1e-11; smaller ones are noise
MIN_GRADIENT = 1e-5


class Net(NamedTuple):
    stacked: List[Tuple[np.ndarray, np.ndarray]]
    w_dense: np.ndarray
    b_dense: np.ndarray


def init_params(config: ForecasterConfig) -> ModelParams:
    rng = np.random.default_rng(config.seed)
    layers = []
    input_size = INPUT_SIZE
    for hidden in config.recurrent_layer_sizes:
        scale = 1.0 / np.sqrt(hidden)
        fields = {
            f"w_{gate}": rng.uniform(-scale, scale, size=(hidden, input_size + hidden))
            for gate in GATES
        }
        fields.update({f"b_{gate}": np.zeros(hidden) for gate in GATES})
        fields["b_forget"] = np.ones(hidden)
        layers.append(LayerParams(**fields))
        input_size = hidden

    scale = 1.0 / np.sqrt(input_size)
    return ModelParams(
        layers=layers,
        w_dense=rng.uniform(-scale, scale, size=(config.l_a, input_size)),
        b_dense=np.zeros(config.l_a),
        look_back=config.l_b,
    )


def net_from_params(params: ModelParams) -> Net:
    return Net(
        stacked=[layer.stacked() for layer in params.layers],
        w_dense=params.w_dense,
        b_dense=params.b_dense,
    )


def net_from_vector(vector: np.ndarray, template: ModelParams) -> Net:
    """Views of a flat parameter vector laid out as ``ModelParams.to_vector``."""
    stacked, start = [], 0
    for layer in template.layers:
        hidden, width = layer.w_input.shape
        size = hidden * width
        w = vector[start:start + 4 * size].reshape(4 * hidden, width)
        start += 4 * size
        b = vector[start:start + 4 * hidden]
        start += 4 * hidden
        stacked.append((w, b))
    rows, cols = template.w_dense.shape
    w_dense = vector[start:start + rows * cols].reshape(rows, cols)
    start += rows * cols
    return Net(stacked=stacked, w_dense=w_dense, b_dense=vector[start:start + rows])


def forward_batch(
    net: Net,
    inputs: np.ndarray,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
):
    """
    Forward pass over a ``(batch, l_b)`` block of scaled windows
    :return: ``(batch, l_a)`` predictions and the cache needed by ``backward_batch``
    """
    batch, steps = inputs.shape
    layer_input = inputs[:, :, None]
    caches = []

    for w, b in net.stacked:
        hidden = w.shape[0] // 4
        h = np.zeros((batch, hidden))
        c = np.zeros((batch, hidden))
        outputs = np.empty((batch, steps, hidden))
        trace = []
        for t in range(steps):
            z = np.concatenate([layer_input[:, t, :], h], axis=1)
            a = z @ w.T + b
            i = expit(a[:, :hidden])
            f = expit(a[:, hidden:2 * hidden])
            o = expit(a[:, 2 * hidden:3 * hidden])
            g = np.tanh(a[:, 3 * hidden:])
            c_prev = c
            c = f * c_prev + i * g
            tanh_c = np.tanh(c)
            h = o * tanh_c
            outputs[:, t, :] = h
            trace.append((z, i, f, o, g, c_prev, tanh_c))

        mask = None
        if rng is not None and dropout_rate > 0.0:
            keep = 1.0 - dropout_rate
            mask = (rng.random(outputs.shape) < keep) / keep
            outputs = outputs * mask

        caches.append((trace, mask, layer_input.shape[2], hidden))
        layer_input = outputs

    last = layer_input[:, -1, :]
    return last @ net.w_dense.T + net.b_dense, (caches, last)


def backward_batch(net: Net, cache, d_pred: np.ndarray) -> np.ndarray:
    """
    Back-propagation through time
    :param d_pred: gradient of the loss with respect to the predictions
    :return: gradient as a flat vector in ``ModelParams.to_vector`` order
    """
    caches, last = cache
    batch = d_pred.shape[0]
    steps = len(caches[0][0])

    d_w_dense = d_pred.T @ last
    d_b_dense = d_pred.sum(axis=0)

    top_hidden = caches[-1][3]
    d_out = np.zeros((batch, steps, top_hidden))
    d_out[:, -1, :] = d_pred @ net.w_dense

    layer_grads = [None] * len(caches)
    for depth in reversed(range(len(caches))):
        trace, mask, input_size, hidden = caches[depth]
        w, _ = net.stacked[depth]
        d_h_seq = d_out * mask if mask is not None else d_out

        d_w = np.zeros_like(w)
        d_b = np.zeros(4 * hidden)
        d_in = np.zeros((batch, steps, input_size))
        d_h_next = np.zeros((batch, hidden))
        d_c_next = np.zeros((batch, hidden))

        for t in reversed(range(steps)):
            z, i, f, o, g, c_prev, tanh_c = trace[t]
            d_h = d_h_seq[:, t, :] + d_h_next
            d_o = d_h * tanh_c
            d_c = d_h * o * (1.0 - tanh_c ** 2) + d_c_next
            d_c_next = d_c * f
            d_a = np.concatenate(
                [
                    d_c * g * i * (1.0 - i),
                    d_c * c_prev * f * (1.0 - f),
                    d_o * o * (1.0 - o),
                    d_c * i * (1.0 - g ** 2),
                ],
                axis=1,
            )
            d_w += d_a.T @ z
            d_b += d_a.sum(axis=0)
            d_z = d_a @ w
            d_in[:, t, :] = d_z[:, :input_size]
            d_h_next = d_z[:, input_size:]

        layer_grads[depth] = (d_w, d_b)
        d_out = d_in

    # Stacked gate rows come in GATES order, which is also the to_vector order.
    parts = []
    for d_w, d_b in layer_grads:
        parts.append(d_w.ravel())
        parts.append(d_b)
    parts.extend([d_w_dense.ravel(), d_b_dense])
    return np.concatenate(parts)


def mse_and_gradient(
    net: Net,
    inputs: np.ndarray,
    targets: np.ndarray,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, np.ndarray]:
    predictions, cache = forward_batch(net, inputs, dropout_rate, rng)
    residual = predictions - targets
    loss = float(np.mean(residual ** 2))
    d_pred = 2.0 * residual / residual.size
    return loss, backward_batch(net, cache, d_pred)


def predict_scaled(net: Net, inputs: np.ndarray, chunk: int = 4096) -> np.ndarray:
    outputs = [forward_batch(net, inputs[s:s + chunk])[0] for s in range(0, len(inputs), chunk)]
    return np.concatenate(outputs, axis=0)


def predict(params: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """Raw-valued predictions for a ``(windows, l_b)`` block of raw windows."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != params.look_back:
        raise DataError(f"expected windows of length {params.look_back}, got shape {inputs.shape}")
    scaled = predict_scaled(net_from_params(params), params.scaling.transform(inputs))
    return params.scaling.inverse(scaled)


def forward(params: ModelParams, window: Sequence[float]) -> np.ndarray:
    window = np.asarray(window, dtype=float)
    if window.ndim != 1 or window.size != params.look_back:
        raise DataError(
            f"window of shape {window.shape} does not match look-back {params.look_back}"
        )
    return predict(params, window[None, :])[0]


def relative_deviation(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / (abs(analytic) + abs(numeric) + DEVIATION_EPS)


def gradient_check(
    params: ModelParams,
    window: Sequence[float],
    target: Sequence[float],
    epsilon: float = 1e-5,
    n_samples: int = 64,
    seed: int = 0,
    min_gradient: float = MIN_GRADIENT,
) -> float:
    """
    Compare back-propagated gradients of the scaled-space MSE against central differences.

    The subsample is drawn from parameters whose analytic gradient is at least ``min_gradient``
    in magnitude; pass 0 to sample every parameter.

    :return: max over the subsample of ``relative_deviation(analytic, numeric)``
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise DataError(f"epsilon {epsilon} outside [1e-7, 1e-3]")

    inputs = params.scaling.transform(np.asarray(window, dtype=float))[None, :]
    targets = params.scaling.transform(np.asarray(target, dtype=float))[None, :]

    theta = params.to_vector()
    _, analytic = mse_and_gradient(net_from_vector(theta, params), inputs, targets)

    def loss_at(vector):
        predictions, _ = forward_batch(net_from_vector(vector, params), inputs)
        return float(np.mean((predictions - targets) ** 2))

    eligible = np.flatnonzero(np.abs(analytic) >= min_gradient)
    if eligible.size == 0:
        logger.warning("no gradient reaches %g; nothing to check", min_gradient)
        return 0.0
    rng = np.random.default_rng(seed)
    picked = rng.choice(eligible, size=min(n_samples, eligible.size), replace=False)
    logger.debug("checking %d of %d parameters (%d eligible)", picked.size, theta.size, eligible.size)

    deviation = 0.0
    for k in picked:
        shifted = theta.copy()
        shifted[k] = theta[k] + epsilon
        upper = loss_at(shifted)
        shifted[k] = theta[k] - epsilon
        lower = loss_at(shifted)
        numeric = (upper - lower) / (2.0 * epsilon)
        deviation = max(deviation, relative_deviation(float(analytic[k]), numeric))
    return deviation
