"""
Configuration for the steti_forecast package.
"""
from enum import StrEnum
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import ConfigurationError

MAX_EPOCHS = 5000
PATIENCE = 1000
BATCH_SIZES: tuple[int | str, ...] = (32, 64, 96, "full")
SPLIT_RATIOS = (0.75, 0.85)
EPOCH_YEAR = 1959.0
VIF_THRESHOLD = 5.0
DEFAULT_MAX_TRIALS = 100
FUNDING_COLUMNS = ("total_rd", "defense_rd", "space_rd", "nasa_budget")
CATEGORICAL_COLUMNS = ("destination", "contact_type", "country")
UNKNOWN_LABEL = "unknown"
SEED_LIMIT = 2**32

BatchSize = int | Literal["full"]


class Optimizer(StrEnum):
    adam = "Adam"
    adadelta = "Adadelta"
    rmsprop = "RMSprop"


class Activation(StrEnum):
    linear = "linear"
    sigmoid = "sigmoid"
    tanh = "tanh"
    relu = "relu"


class Phase(StrEnum):
    time_only = "time_only"
    time_plus = "time_plus"


class Stage(StrEnum):
    failure = "failure"
    launch = "launch"


class KeyDate(StrEnum):
    launch = "launch"
    failure = "failure"


class RecordStatus(StrEnum):
    active = "active"
    inactive = "inactive"


class ScenarioAxis(StrEnum):
    launch_mass = "launch_mass"
    country = "country"
    destination = "destination"
    contact_type = "contact_type"


class Spacing(StrEnum):
    log = "log"
    linear = "linear"


class SamplerKind(StrEnum):
    tpe = "tpe"
    random = "random"


class TrialStatus(StrEnum):
    complete = "complete"
    failed = "failed"


class HyperParams(BaseModel):
    """The nine tunable knobs of the search space."""

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(default=1e-3, ge=1e-6, le=1e-2)
    optimizer: Optimizer = Field(default=Optimizer.adam)
    dropout_rate: float = Field(default=0.0, ge=0.0, le=1.0)
    recurrent_dropout_rate: float = Field(default=0.0, ge=0.0, le=1.0)
    lstm_activation: Activation = Field(default=Activation.tanh)
    output_activation: Activation = Field(default=Activation.linear)
    bidirectional: bool = False
    window_size: int = Field(default=5, ge=1, le=10)
    # only meaningful for the time-plus phase
    window_size_funding: int | None = Field(default=5, ge=1, le=10)

    @classmethod
    def default(cls, phase: "Phase | None" = None) -> "HyperParams":
        if phase == Phase.time_only:
            return cls(window_size_funding=None)
        return cls()


class TrainConfig(BaseModel):
    batch_size: BatchSize = "full"
    max_epochs: int = Field(default=MAX_EPOCHS, ge=1)
    patience: int = Field(default=PATIENCE, ge=1)
    hidden_size: int = Field(default=8, ge=1)
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    log_every: int = Field(default=100, ge=1)

    def __init__(self, **data):
        super().__init__(**data)
        self.patience = min(self.patience, self.max_epochs)
        if isinstance(self.batch_size, int) and self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be positive, got {self.batch_size}")


class PhaseConfig(BaseModel):
    phase: Phase = Phase.time_only
    split_ratios: list[float] = Field(default_factory=lambda: list(SPLIT_RATIOS))
    batch_sizes: list[BatchSize] = Field(default_factory=lambda: list(BATCH_SIZES))
    tune: bool = True
    mask_target_lifetime: bool = False

    @model_validator(mode="after")
    def _check_ratios(self) -> "PhaseConfig":
        for ratio in self.split_ratios:
            if not 0.0 < ratio < 1.0:
                raise ValueError(f"split ratio {ratio} outside (0, 1)")
        if not self.split_ratios or not self.batch_sizes:
            raise ValueError("split_ratios and batch_sizes must be non-empty")
        return self

    @property
    def uses_static_inputs(self) -> bool:
        """Funding, categorical and mass inputs are only part of the time-plus phase."""
        return self.phase == Phase.time_plus


class TuneConfig(BaseModel):
    max_trials: int = Field(default=DEFAULT_MAX_TRIALS, ge=1)
    sampler: SamplerKind = SamplerKind.tpe
    n_startup: int = Field(default=10, ge=1)
    n_candidates: int = Field(default=24, ge=1)
    gamma: float = Field(default=0.25, gt=0.0, lt=1.0)
    split_ratio: float = Field(default=SPLIT_RATIOS[0], gt=0.0, lt=1.0)
    max_epochs: int | None = Field(default=None, ge=1)


class BenchmarkConfig(BaseModel):
    vif_threshold: float = Field(default=VIF_THRESHOLD, gt=1.0)
    max_window: int = Field(default=20, ge=1)
    k_folds: int = Field(default=5, ge=2)
    fit_years: tuple[int, int] | None = (1959, 1999)
    funding_variables: list[str] = Field(default_factory=lambda: list(FUNDING_COLUMNS))


class ScenarioSpec(BaseModel):
    name: str
    axis: ScenarioAxis
    # record name; None selects the most recently launched record
    baseline: str | None = None
    values: list[float | str] | None = None
    start: float | None = None
    stop: float | None = None
    count: int | None = Field(default=None, ge=1)
    spacing: Spacing = Spacing.log

    @model_validator(mode="after")
    def _check_sweep(self) -> "ScenarioSpec":
        if self.values is None and self.axis != ScenarioAxis.launch_mass:
            raise ValueError(f"categorical axis '{self.axis}' needs an explicit list of values")
        if self.values is None and None in (self.start, self.stop, self.count):
            raise ValueError("numeric sweeps need values or start/stop/count")
        if self.spacing == Spacing.log and self.values is None and min(self.start, self.stop) <= 0:
            raise ValueError("log spacing needs positive start and stop")
        return self

    def sweep_values(self) -> list[float | str]:
        if self.values is not None:
            if self.axis == ScenarioAxis.launch_mass:
                return [float(v) for v in self.values]
            return [str(v) for v in self.values]
        if self.spacing == Spacing.log:
            grid = np.geomspace(self.start, self.stop, self.count)
        else:
            grid = np.linspace(self.start, self.stop, self.count)
        return [float(v) for v in grid]


class PathsConfig(BaseModel):
    missions: Path = Path("data/missions.csv")
    funding: Path = Path("data/funding.csv")
    deflator: Path | None = Path("data/deflator.csv")
    output_dir: Path = Path("out")


def _default_scenarios() -> list[ScenarioSpec]:
    return [ScenarioSpec(name="launch_mass", axis=ScenarioAxis.launch_mass, start=1.0, stop=50000.0, count=50)]


class RunConfig(BaseModel):
    paths: PathsConfig = Field(default_factory=PathsConfig)
    seed: int = Field(default=0, ge=0, lt=SEED_LIMIT)
    jobs: int = Field(default=1, ge=1)
    observation_date: float | None = None
    deflator_base_year: int | None = None
    epoch: float = EPOCH_YEAR
    phases: list[PhaseConfig] = Field(
        default_factory=lambda: [PhaseConfig(phase=Phase.time_only), PhaseConfig(phase=Phase.time_plus)]
    )
    train: TrainConfig = Field(default_factory=TrainConfig)
    tune: TuneConfig = Field(default_factory=TuneConfig)
    benchmark: BenchmarkConfig = Field(default_factory=BenchmarkConfig)
    scenarios: list[ScenarioSpec] = Field(default_factory=_default_scenarios)

    def phase(self, phase: Phase) -> PhaseConfig:
        for cfg in self.phases:
            if cfg.phase == phase:
                return cfg
        return PhaseConfig(phase=phase)

    def check_paths(self, *names: str) -> None:
        """Raise ConfigurationError unless every named input path exists."""
        for name in names:
            path = getattr(self.paths, name)
            if path is not None and not Path(path).exists():
                raise ConfigurationError(f"paths.{name} does not exist: {path}")


def load_config(path: str | Path | None) -> RunConfig:
    """Load a YAML run configuration; a missing path yields the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigurationError(f"invalid YAML in {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config {path} must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"invalid config {path}: {e}") from e


def spawn_rng(seed: int, *key: int | str) -> np.random.Generator:
    """Deterministic child generator for one subsystem of a seeded run."""
    words = [k if isinstance(k, int) else int.from_bytes(k.encode("utf-8")[:8].ljust(8, b"\0"), "little") for k in key]
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(words)))
