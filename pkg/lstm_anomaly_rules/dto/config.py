from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, field_validator

from lstm_anomaly_rules.detectors.evt import DEFAULT_Q_GRID, Q_RANGE
from lstm_anomaly_rules.dto.forecaster import ForecasterConfig
from lstm_anomaly_rules.dto.reports import MatchSpec
from lstm_anomaly_rules.dto.series import CsvSchema, SplitSpec
from lstm_anomaly_rules.forecaster.presets import get_preset

RULES = ("gaussian", "evt", "tukey")
Rule = Literal["gaussian", "evt", "tukey"]


class DatasetConfig(BaseModel):
    """
    Where the observations come from. ``external_errors`` replaces the forecaster as the error
    source; ``label_windows`` adds labels from a JSON file of anomaly windows.
    """

    path: Optional[str] = None
    name: Optional[str] = None
    columns: CsvSchema = Field(default_factory=CsvSchema)
    label_windows: Optional[str] = None
    label_key: Optional[str] = None
    external_errors: Optional[str] = None


class DetectorConfig(BaseModel):
    rules: List[Rule] = Field(default_factory=lambda: list(RULES))
    # gaussian: tuned on validation F1 unless fixed here
    tau_g: Optional[float] = None
    # evt: calibrated on the initialization stream unless fixed here
    level: float = Field(default=0.98, gt=0.0, lt=1.0)
    q: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    q_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_Q_GRID), validate_default=True)
    fallback_q: float = Field(default=1e-4, gt=0.0, lt=1.0)
    # tukey
    fence_multiplier: float = Field(default=3.0, gt=0.0)

    @field_validator("rules")
    @classmethod
    def distinct_rules(cls, rules: List[str]) -> List[str]:
        if not rules:
            raise ValueError("select at least one detection rule")
        return [r for r in RULES if r in rules]

    @field_validator("q_grid")
    @classmethod
    def valid_q_grid(cls, grid: List[float]) -> List[float]:
        low, high = Q_RANGE
        if not grid or any(not low <= q <= high for q in grid):
            raise ValueError(f"q_grid needs at least one value, all within [{low:g}, {high:g}]")
        return sorted(grid)


class StatTestConfig(BaseModel):
    tests: List[Literal["sw", "ad"]] = Field(default_factory=lambda: ["sw", "ad"])
    alpha: float = Field(default=0.001, gt=0.0, lt=1.0)
    shapiro_source: Literal["all", "train"] = "all"
    n_bootstrap: PositiveInt = 999
    max_workers: Optional[PositiveInt] = None


class PipelineConfig(BaseModel):
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    split: SplitSpec = Field(default_factory=SplitSpec)
    preset: Optional[str] = None
    forecaster: ForecasterConfig = Field(default_factory=ForecasterConfig)
    detectors: DetectorConfig = Field(default_factory=DetectorConfig)
    stat_tests: StatTestConfig = Field(default_factory=StatTestConfig)
    matching: MatchSpec = Field(default_factory=MatchSpec)
    output_dir: str = "output"
    seed: Optional[int] = None

    @property
    def uses_external_errors(self) -> bool:
        return self.dataset.external_errors is not None

    def resolved_seed(self) -> int:
        return self.seed if self.seed is not None else self.forecaster.seed

    def resolved_forecaster(self) -> ForecasterConfig:
        """Preset architecture (if any) with explicitly set forecaster fields on top."""
        config = self.forecaster
        if self.preset:
            overrides = {key: getattr(config, key) for key in config.model_fields_set}
            config = get_preset(self.preset, **overrides)
        return config.model_copy(update={"seed": self.resolved_seed()})


class BatchConfig(BaseModel):
    """Several pipeline runs, each with its own output directory, executed concurrently."""

    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    max_workers: Optional[PositiveInt] = None
    runs: List[PipelineConfig]

    @field_validator("runs")
    @classmethod
    def distinct_outputs(cls, runs: List[PipelineConfig]) -> List[PipelineConfig]:
        if not runs:
            raise ValueError("a batch needs at least one run")
        outputs = [r.output_dir for r in runs]
        if len(set(outputs)) != len(outputs):
            raise ValueError("every run in a batch needs its own output_dir")
        return runs
