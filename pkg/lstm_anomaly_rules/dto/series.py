from typing import FrozenSet, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, model_validator
from typing_extensions import Annotated

from lstm_anomaly_rules.dto.arrays import FloatArray, IndexArray

LabelSet = Annotated[FrozenSet[int], PlainSerializer(sorted, return_type=List[int])]


class CsvSchema(BaseModel):
    timestamp: str = "timestamp"
    value: str = "value"
    label: Optional[str] = "label"


class TimeSeries(BaseModel):
    """
    Univariate observation stream with integer tick timestamps.

    Segments cut from a parent series keep ``offset``, the parent index of their first value,
    while ``labels`` always index into the segment's own ``values``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str = "series"
    timestamps: IndexArray
    values: FloatArray
    labels: Optional[LabelSet] = None
    offset: int = Field(default=0, ge=0)
    rejected_rows: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_invariants(self):
        if self.values.ndim != 1 or self.timestamps.shape != self.values.shape:
            raise ValueError("timestamps and values must be 1-d and of equal length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")
        if self.timestamps.size > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must strictly increase")
        if self.labels:
            if min(self.labels) < 0 or max(self.labels) >= len(self.values):
                raise ValueError("label index out of range")
        return self

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def label_set(self) -> FrozenSet[int]:
        return self.labels or frozenset()

    @property
    def parent_labels(self) -> FrozenSet[int]:
        return frozenset(self.offset + i for i in self.label_set)

    def segment(self, start: int, stop: int) -> "TimeSeries":
        labels = None
        if self.labels is not None:
            labels = frozenset(i - start for i in self.labels if start <= i < stop)
        return TimeSeries(
            name=self.name,
            timestamps=self.timestamps[start:stop],
            values=self.values[start:stop],
            labels=labels,
            offset=self.offset + start,
        )


class SplitSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    train_fraction: float = Field(default=0.5, ge=0.0, le=1.0)
    validation_fraction: float = Field(default=0.25, ge=0.0, le=1.0)
    test_fraction: float = Field(default=0.25, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def check_sum(self):
        total = self.train_fraction + self.validation_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {total}")
        return self


class SplitBoundaries(BaseModel):
    """Parent-index boundaries of a chronological split, half-open ``[start, stop)``."""

    n: int
    train: List[int]
    validation: List[int]
    test: List[int]

    @property
    def initialization_stop(self) -> int:
        return self.validation[1]


class WindowSet(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    inputs: FloatArray
    targets: FloatArray
    origin_indices: IndexArray

    @model_validator(mode="after")
    def check_shapes(self):
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("inputs and targets must be 2-d")
        if not (len(self.inputs) == len(self.targets) == len(self.origin_indices)):
            raise ValueError("inputs, targets and origin_indices must have equal length")
        return self

    def __len__(self) -> int:
        return int(self.origin_indices.size)

    @property
    def look_back(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def look_ahead(self) -> int:
        return int(self.targets.shape[1])


class ErrorSeries(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    indices: IndexArray
    errors: FloatArray

    @model_validator(mode="after")
    def check_invariants(self):
        if self.errors.ndim != 1 or self.indices.shape != self.errors.shape:
            raise ValueError("indices and errors must be 1-d and of equal length")
        if not np.all(np.isfinite(self.errors)):
            raise ValueError("errors must be finite")
        if np.any(self.errors < 0):
            raise ValueError("errors must be non-negative")
        if self.indices.size > 1 and np.any(np.diff(self.indices) <= 0):
            raise ValueError("indices must strictly increase")
        return self

    def __len__(self) -> int:
        return int(self.errors.size)

    def restrict(self, start: int, stop: int) -> "ErrorSeries":
        mask = (self.indices >= start) & (self.indices < stop)
        return ErrorSeries(indices=self.indices[mask], errors=self.errors[mask])

    def labels_within(self, labels: Iterable[int]) -> FrozenSet[int]:
        present = set(self.indices.tolist())
        return frozenset(i for i in labels if i in present)

    @classmethod
    def concat(cls, parts: Sequence["ErrorSeries"]) -> "ErrorSeries":
        return cls(
            indices=np.concatenate([p.indices for p in parts]) if parts else [],
            errors=np.concatenate([p.errors for p in parts]) if parts else [],
        )


class SplitManifest(BaseModel):
    """What the split stage records for later stages and for reproducibility."""

    series_name: str
    spec: SplitSpec
    boundaries: SplitBoundaries
    rejected_rows: int = Field(default=0, ge=0)
    label_count: int = Field(default=0, ge=0)
