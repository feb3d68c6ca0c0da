from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, model_validator

P_VALUE_FLOOR = 1e-300


class MatchSpec(BaseModel):
    """
    How flags are matched to labels. A flag within ``tolerance`` steps of a labeled anomaly
    detects it; with ``event_level`` runs of consecutive labeled indices form one anomaly and
    extra flags inside a detected anomaly are not false positives.
    """

    model_config = ConfigDict(frozen=True)

    tolerance: NonNegativeInt = 0
    event_level: bool = True


class ConfusionCounts(BaseModel):
    model_config = ConfigDict(frozen=True)

    true_positives: NonNegativeInt = 0
    false_positives: NonNegativeInt = 0
    false_negatives: NonNegativeInt = 0


class MetricsReport(BaseModel):
    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    counts: ConfusionCounts
    detector_name: str = ""
    series_name: str = ""
    zero_division: bool = False
    regulator: Optional[str] = None
    regulator_value: Optional[float] = None

    @model_validator(mode="after")
    def check_f1(self):
        p, r = self.precision, self.recall
        expected = 2 * p * r / (p + r) if p + r > 0 else 0.0
        if abs(self.f1 - expected) > 1e-12:
            raise ValueError(f"f1={self.f1} is not the harmonic mean of P={p} and R={r}")
        return self


class TestReport(BaseModel):
    __test__ = False

    test_name: str
    statistic: float
    p_value: float = Field(ge=0.0, le=1.0)
    alpha: float = Field(default=0.001, gt=0.0, lt=1.0)
    reject_null: bool = False
    method: str = ""
    n: int = 0
    series_name: str = ""

    @model_validator(mode="before")
    @classmethod
    def derive_decision(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            p = data.get("p_value")
            if p is not None:
                data["p_value"] = max(float(p), P_VALUE_FLOOR)
                data["reject_null"] = data["p_value"] < data.get("alpha", 0.001)
        return data

    @property
    def p_value_display(self) -> str:
        if self.p_value <= P_VALUE_FLOOR:
            return "< 1e-300"
        return f"{self.p_value:.3g}"
