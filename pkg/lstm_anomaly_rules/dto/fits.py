from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator

from lstm_anomaly_rules.dto.arrays import FloatArray, IndexArray


class GaussianFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: float
    sigma2: float = Field(gt=0.0)
    tau_g: Optional[float] = None


class GpdFit(BaseModel):
    """Peaks-over-threshold state. ``q`` and ``tau_e`` stay unset until a risk level is chosen."""

    model_config = ConfigDict(frozen=True)

    t: float
    gamma_hat: float
    sigma_hat: float = Field(gt=0.0)
    n: PositiveInt
    N_t: PositiveInt
    q: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    tau_e: Optional[float] = None

    @model_validator(mode="after")
    def check_invariants(self):
        if self.N_t > self.n:
            raise ValueError(f"peak count N_t={self.N_t} exceeds n={self.n}")
        if self.tau_e is not None and self.q is not None and self.q * self.n < self.N_t:
            if self.tau_e < self.t - 1e-9 * max(1.0, abs(self.t)):
                raise ValueError(f"tau_e={self.tau_e} lies below the initial threshold t={self.t}")
        return self

    @property
    def complete(self) -> bool:
        return self.q is not None and self.tau_e is not None

    @property
    def peak_rate(self) -> float:
        return self.N_t / self.n


class TukeyFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    q1: float
    q3: float
    tau_t: float
    fence_multiplier: float = Field(default=3.0, gt=0.0)

    @model_validator(mode="after")
    def check_invariants(self):
        if self.q3 < self.q1:
            raise ValueError("q3 must not be below q1")
        expected = self.q3 + self.fence_multiplier * (self.q3 - self.q1)
        if not np.isclose(self.tau_t, expected, rtol=1e-12, atol=1e-12):
            raise ValueError(f"tau_t={self.tau_t} does not equal q3 + m * (q3 - q1) = {expected}")
        return self


class DetectionResult(BaseModel):
    """
    Per-error scores and flags of one detector over an error stream. ``threshold`` is on the
    score scale (log-PD for gaussian, tail probability level q for evt, raw error for tukey).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    detector: str
    indices: IndexArray
    scores: FloatArray
    flagged: IndexArray
    threshold: float

    @model_validator(mode="after")
    def check_shapes(self):
        if not (self.indices.shape == self.scores.shape == self.flagged.shape):
            raise ValueError("indices, scores and flags must have equal length")
        return self

    @property
    def flagged_indices(self) -> np.ndarray:
        return self.indices[self.flagged.astype(bool)]

    @property
    def flag_set(self):
        return frozenset(self.flagged_indices.tolist())
