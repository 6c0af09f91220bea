"""
Models for the steti_forecast package.
"""
import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import EPOCH_YEAR, UNKNOWN_LABEL, HyperParams, RecordStatus, TrialStatus

MIN_LIFETIME = 1e-4
LIFETIME_TOLERANCE = 1e-9


class RawMission(BaseModel):
    """One parsed missions.csv row before lifetime and status are derived."""

    model_config = ConfigDict(frozen=True)

    name: str
    launch_date: float
    failure_date: float | None = None
    launch_mass: float
    destination: str = UNKNOWN_LABEL
    contact_type: str = UNKNOWN_LABEL
    country: str = UNKNOWN_LABEL
    total_rd: float | None = None
    defense_rd: float | None = None
    space_rd: float | None = None
    nasa_budget: float | None = None
    row: int = 0


class MissionRecord(BaseModel):
    """One event-lifetime observation."""

    model_config = ConfigDict(frozen=True)

    name: str
    launch_date: float = Field(ge=1900.0, le=2100.0)
    failure_date: float | None = Field(default=None, ge=1900.0, le=2100.0)
    lifetime: float | None = None
    status: RecordStatus
    launch_mass: float = Field(gt=0.0)
    destination: str = UNKNOWN_LABEL
    contact_type: str = UNKNOWN_LABEL
    country: str = UNKNOWN_LABEL
    total_rd: float | None = Field(default=None, ge=0.0)
    defense_rd: float | None = Field(default=None, ge=0.0)
    space_rd: float | None = Field(default=None, ge=0.0)
    nasa_budget: float | None = Field(default=None, ge=0.0)
    # age at the observation date, active records only
    age: float | None = None

    @model_validator(mode="after")
    def _check_status(self) -> "MissionRecord":
        failed = self.failure_date is not None
        if failed != (self.status == RecordStatus.inactive) or failed != (self.lifetime is not None):
            raise ValueError("status, failure_date and lifetime disagree")
        if failed:
            if self.failure_date < self.launch_date:
                raise ValueError(f"failure_date {self.failure_date} precedes launch_date {self.launch_date}")
            if abs(self.lifetime - (self.failure_date - self.launch_date)) > LIFETIME_TOLERANCE:
                raise ValueError("lifetime differs from failure_date - launch_date")
            if not self.lifetime >= MIN_LIFETIME:
                raise ValueError(f"lifetime {self.lifetime} below the minimum {MIN_LIFETIME} years")
        return self

    @property
    def failed(self) -> bool:
        return self.status == RecordStatus.inactive

    def key_date(self, key: str) -> float:
        """Launch or failure date, whichever orders the requested stage."""
        if key == "failure":
            if self.failure_date is None:
                raise ValueError(f"{self.name} has no failure date")
            return self.failure_date
        return self.launch_date


class FundingSeries(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    values: dict[int, float]

    @model_validator(mode="after")
    def _check_years(self) -> "FundingSeries":
        if self.values:
            years = sorted(self.values)
            if years != list(range(years[0], years[-1] + 1)):
                raise ValueError(f"funding series '{self.name}' has gaps between {years[0]} and {years[-1]}")
            if any(not (v >= 0.0) for v in self.values.values()):
                raise ValueError(f"funding series '{self.name}' has negative or missing values")
        return self

    @property
    def years(self) -> list[int]:
        return sorted(self.values)


class Deflator(BaseModel):
    model_config = ConfigDict(frozen=True)

    values: dict[int, float]
    base_year: int

    @model_validator(mode="after")
    def _check_index(self) -> "Deflator":
        if any(not (v > 0.0) for v in self.values.values()):
            raise ValueError("deflator index values must be positive")
        if self.base_year not in self.values:
            raise ValueError(f"base year {self.base_year} missing from deflator")
        return self


class MooresLawParams(BaseModel):
    """Closed-form lifetime trend: l(t) = l_1959 * 2 ** ((t - epoch) / d)."""

    model_config = ConfigDict(frozen=True)

    l_1959: float = Field(gt=0.0)
    d: float
    epoch: float = EPOCH_YEAR

    @model_validator(mode="after")
    def _check_d(self) -> "MooresLawParams":
        if self.d == 0.0 or math.isnan(self.d):
            raise ValueError("doubling time must be non-zero")
        return self


class Trial(BaseModel):
    trial_id: int
    params: HyperParams
    objective: float | None = None
    status: TrialStatus = TrialStatus.complete
    seed: int
    seconds: float = 0.0

    @model_validator(mode="after")
    def _check_objective(self) -> "Trial":
        if self.status == TrialStatus.complete and (self.objective is None or not math.isfinite(self.objective)):
            raise ValueError("completed trials need a finite objective")
        return self


class RegressionModel(BaseModel):
    """Partially log-linear OLS model of log2 lifetime."""

    columns: list[str]
    coefficients: list[float]
    residual_variance: float
    funding_variables: list[str] = Field(default_factory=list)
    window: int = 1
    # categorical feature -> kept non-reference levels, in column order
    dummy_levels: dict[str, list[str]] = Field(default_factory=dict)
    reference_levels: dict[str, str] = Field(default_factory=dict)

    @property
    def intercept(self) -> float:
        return self.coefficients[0]

    def coefficient(self, column: str) -> float:
        return self.coefficients[self.columns.index(column)]


class CandidateEvaluation(BaseModel):
    funding_variables: list[str]
    window: int
    mean_rmse: float
    max_vif: float
    qualified: bool


class CandidateSummary(BaseModel):
    model_no: int
    funding_variables: list[str]
    lowest_mean_rmse: float
    best_window: int


class SearchResult(BaseModel):
    candidates: list[CandidateSummary]
    evaluations: list[CandidateEvaluation]
    selected_variables: list[str]
    selected_window: int
    selected_rmse: float
    vif_table: dict[str, float]


class ScenarioRow(BaseModel):
    axis_value: float | str
    pred_log2_lifetime: float
    pred_lifetime_years: float
    extrapolation_flag: bool = False
    is_baseline: bool = False


class ScenarioResult(BaseModel):
    name: str
    axis: str
    baseline: str
    rows: list[ScenarioRow]


class ComparisonReport(BaseModel):
    names: list[str]
    actual: list[float]
    predictions: dict[str, list[float]]
    rmse: dict[str, float]
    winner: str
