import logging
from typing import Tuple

import numpy as np

from lstm_anomaly_rules.dto.forecaster import ForecasterConfig, MinMaxScaling, ModelParams, TrainReport
from lstm_anomaly_rules.dto.series import ErrorSeries, TimeSeries, WindowSet
from lstm_anomaly_rules.errors import DataError, NumericalError
from lstm_anomaly_rules.forecaster.lstm import (
    init_params,
    mse_and_gradient,
    net_from_vector,
    predict,
    predict_scaled,
)
from lstm_anomaly_rules.series.core import absolute_errors, make_windows

logger = logging.getLogger(__name__)


class Adam:
    def __init__(self, size: int, learning_rate: float, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, gradient: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * gradient
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * gradient ** 2
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return theta - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def _mse(theta: np.ndarray, template: ModelParams, inputs: np.ndarray, targets: np.ndarray) -> float:
    predictions = predict_scaled(net_from_vector(theta, template), inputs)
    return float(np.mean((predictions - targets) ** 2))


def train(
    config: ForecasterConfig, train_windows: WindowSet, val_windows: WindowSet
) -> Tuple[ModelParams, TrainReport]:
    """
    Mini-batch Adam on the scaled-space MSE with early stopping on validation MSE.

    Returns the parameters of the best validation epoch. Raises NumericalError when the loss
    stops being finite.
    """
    if len(train_windows) == 0 or len(val_windows) == 0:
        raise DataError("training and validation window sets must not be empty")
    for windows in (train_windows, val_windows):
        if windows.look_back != config.l_b or windows.look_ahead != config.l_a:
            raise DataError(
                f"windows shaped ({windows.look_back}, {windows.look_ahead}) do not match "
                f"l_b={config.l_b}, l_a={config.l_a}"
            )

    scaling = MinMaxScaling.fit(train_windows.inputs, train_windows.targets)
    x_train = scaling.transform(train_windows.inputs)
    y_train = scaling.transform(train_windows.targets)
    x_val = scaling.transform(val_windows.inputs)
    y_val = scaling.transform(val_windows.targets)

    template = init_params(config).model_copy(update={"scaling": scaling})
    theta = template.to_vector()
    optimizer = Adam(theta.size, config.learning_rate)
    rng = np.random.default_rng(config.seed)

    report = TrainReport(epochs_run=0)
    best_mse, best_theta, wait = np.inf, theta.copy(), 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(x_train))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, gradient = mse_and_gradient(
                net_from_vector(theta, template),
                x_train[batch],
                y_train[batch],
                config.dropout_rate,
                rng,
            )
            if not np.isfinite(loss) or not np.all(np.isfinite(gradient)):
                raise NumericalError(
                    f"training diverged in epoch {epoch}: non-finite loss {loss} "
                    f"(learning rate {config.learning_rate})",
                    stage="train",
                )
            theta = optimizer.step(theta, gradient)

        train_mse = _mse(theta, template, x_train, y_train)
        val_mse = _mse(theta, template, x_val, y_val)
        if not (np.isfinite(train_mse) and np.isfinite(val_mse)):
            raise NumericalError(
                f"training diverged in epoch {epoch}: train MSE {train_mse}, validation MSE {val_mse}",
                stage="train",
            )

        report.epochs_run = epoch
        report.train_mse_per_epoch.append(train_mse)
        report.validation_mse_per_epoch.append(val_mse)
        logger.debug("epoch %d train_mse=%.6g val_mse=%.6g", epoch, train_mse, val_mse)

        if val_mse < best_mse:
            best_mse, best_theta, wait = val_mse, theta.copy(), 0
            report.best_epoch = epoch
        else:
            wait += 1
            if wait >= config.early_stopping_patience:
                report.stopped_early = True
                logger.info(
                    "early stopping after epoch %d, best epoch %d (val_mse=%.6g)",
                    epoch,
                    report.best_epoch,
                    best_mse,
                )
                break

    return template.from_vector(best_theta), report


def predict_windows(params: ModelParams, series: TimeSeries, config: ForecasterConfig):
    windows = make_windows(series, config.l_b, config.l_a)
    return windows, predict(params, windows.inputs)


def predict_errors(params: ModelParams, series: TimeSeries, config: ForecasterConfig) -> ErrorSeries:
    windows, predictions = predict_windows(params, series, config)
    return absolute_errors(
        windows.targets,
        predictions,
        horizon_index=config.horizon_index,
        indices=windows.origin_indices + config.horizon_index,
    )
