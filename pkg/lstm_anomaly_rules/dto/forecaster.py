from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, field_validator, model_validator

from lstm_anomaly_rules.dto.arrays import FloatArray

GATES = ("input", "forget", "output", "candidate")

CHECKPOINT_FORMAT_VERSION = 1


class ForecasterConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    recurrent_layer_sizes: List[PositiveInt] = Field(default_factory=lambda: [20])
    dropout_rate: float = Field(default=0.2, ge=0.0, lt=1.0)
    learning_rate: float = Field(default=0.01, ge=0.0)
    l_b: PositiveInt = 1
    l_a: PositiveInt = 1
    max_epochs: PositiveInt = 100
    batch_size: PositiveInt = 64
    early_stopping_patience: PositiveInt = 10
    seed: int = 0
    horizon_index: int = Field(default=0, ge=0)
    window_stride: PositiveInt = 1

    @field_validator("recurrent_layer_sizes")
    @classmethod
    def at_least_one_layer(cls, sizes: List[int]) -> List[int]:
        if not sizes:
            raise ValueError("at least one recurrent layer is required")
        return sizes

    @model_validator(mode="after")
    def horizon_within_look_ahead(self):
        if self.horizon_index >= self.l_a:
            raise ValueError(f"horizon_index {self.horizon_index} must be below l_a {self.l_a}")
        return self


class MinMaxScaling(BaseModel):
    """Affine map of raw values onto [0, 1] using training statistics."""

    model_config = ConfigDict(frozen=True)

    minimum: float = 0.0
    span: float = Field(default=1.0, gt=0.0)

    @classmethod
    def fit(cls, *arrays: np.ndarray) -> "MinMaxScaling":
        lo = min(float(np.min(a)) for a in arrays)
        hi = max(float(np.max(a)) for a in arrays)
        return cls(minimum=lo, span=(hi - lo) if hi > lo else 1.0)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.minimum) / self.span

    def inverse(self, scaled: np.ndarray) -> np.ndarray:
        return np.asarray(scaled, dtype=float) * self.span + self.minimum


class LayerParams(BaseModel):
    """
    Gate weights of one LSTM layer. Each gate matrix maps ``[x_t, h_{t-1}]`` (input size plus
    hidden size columns) onto ``hidden`` rows.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    w_input: FloatArray
    w_forget: FloatArray
    w_output: FloatArray
    w_candidate: FloatArray
    b_input: FloatArray
    b_forget: FloatArray
    b_output: FloatArray
    b_candidate: FloatArray

    @model_validator(mode="after")
    def check_shapes(self):
        shape = self.w_input.shape
        for gate in GATES:
            w = getattr(self, f"w_{gate}")
            b = getattr(self, f"b_{gate}")
            if w.ndim != 2 or w.shape != shape or b.shape != (shape[0],):
                raise ValueError(f"inconsistent shapes for the {gate} gate")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"non-finite {gate} gate parameters")
        return self

    @property
    def hidden_size(self) -> int:
        return int(self.w_input.shape[0])

    @property
    def input_size(self) -> int:
        return int(self.w_input.shape[1]) - self.hidden_size

    def stacked(self):
        """Gate matrices stacked as ``(4 * hidden, input + hidden)`` in GATES order."""
        w = np.concatenate([getattr(self, f"w_{g}") for g in GATES], axis=0)
        b = np.concatenate([getattr(self, f"b_{g}") for g in GATES])
        return w, b


class ModelParams(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    layers: List[LayerParams]
    w_dense: FloatArray
    b_dense: FloatArray
    look_back: PositiveInt = 1
    scaling: MinMaxScaling = MinMaxScaling()

    @model_validator(mode="after")
    def check_shapes(self):
        if not self.layers:
            raise ValueError("at least one recurrent layer is required")
        for lower, upper in zip(self.layers, self.layers[1:]):
            if upper.input_size != lower.hidden_size:
                raise ValueError("layer input size does not match the previous hidden size")
        if self.w_dense.ndim != 2 or self.w_dense.shape[1] != self.layers[-1].hidden_size:
            raise ValueError("dense weights do not match the last recurrent layer")
        if self.b_dense.shape != (self.w_dense.shape[0],):
            raise ValueError("dense bias does not match dense weights")
        if not (np.all(np.isfinite(self.w_dense)) and np.all(np.isfinite(self.b_dense))):
            raise ValueError("non-finite dense parameters")
        return self

    @property
    def look_ahead(self) -> int:
        return int(self.w_dense.shape[0])

    def arrays(self) -> List[np.ndarray]:
        """All trainable arrays in a fixed order."""
        out = []
        for layer in self.layers:
            out.extend(getattr(layer, f"w_{g}") for g in GATES)
            out.extend(getattr(layer, f"b_{g}") for g in GATES)
        out.extend([self.w_dense, self.b_dense])
        return out

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_vector(self, vector: np.ndarray) -> "ModelParams":
        shapes = [a.shape for a in self.arrays()]
        chunks, start = [], 0
        for shape in shapes:
            size = int(np.prod(shape))
            chunks.append(np.asarray(vector[start:start + size]).reshape(shape))
            start += size
        if start != vector.size:
            raise ValueError(f"vector of size {vector.size} does not match {start} parameters")

        layers, k = [], 0
        for _ in self.layers:
            fields = {f"w_{g}": chunks[k + i] for i, g in enumerate(GATES)}
            fields.update({f"b_{g}": chunks[k + 4 + i] for i, g in enumerate(GATES)})
            layers.append(LayerParams(**fields))
            k += 8
        return ModelParams(
            layers=layers,
            w_dense=chunks[k],
            b_dense=chunks[k + 1],
            look_back=self.look_back,
            scaling=self.scaling,
        )


class TrainReport(BaseModel):
    epochs_run: int = Field(ge=0)
    train_mse_per_epoch: List[float] = Field(default_factory=list)
    validation_mse_per_epoch: List[float] = Field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @field_validator("train_mse_per_epoch", "validation_mse_per_epoch")
    @classmethod
    def non_negative(cls, values: List[float]) -> List[float]:
        if any(v < 0 for v in values):
            raise ValueError("MSE values must be non-negative")
        return values


class Checkpoint(BaseModel):
    format_version: int = CHECKPOINT_FORMAT_VERSION
    config: ForecasterConfig
    params: ModelParams
    seed: int
