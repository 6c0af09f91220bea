"""
Exceptions for the steti_forecast package.
"""


class StetiError(Exception):
    """Base exception class for steti_forecast errors."""

    module = "steti"

    def __str__(self) -> str:
        return f"{self.module}: {super().__str__()}"


class ConfigurationError(StetiError):
    """Raised when there is an issue with the provided configuration."""

    module = "config"


# -- dataset -----------------------------------------------------------------


class DatasetError(StetiError):
    """Raised when input data cannot be ingested."""

    module = "dataset"


class MissingColumn(DatasetError):
    def __init__(self, column: str, path: str = ""):
        self.column = column
        self.path = path
        super().__init__(f"missing column '{column}'" + (f" in {path}" if path else ""))


class UnparseableValue(DatasetError):
    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}: cannot parse {column}={value!r}")


class InvariantViolation(DatasetError):
    def __init__(self, row: int, reason: str):
        self.row = row
        self.reason = reason
        super().__init__(f"row {row}: {reason}")


class MissingDeflatorYear(DatasetError):
    def __init__(self, year: int):
        self.year = year
        super().__init__(f"deflator has no index for year {year}")


class FailureBeforeLaunch(DatasetError):
    def __init__(self, name: str, launch_date: float, failure_date: float):
        self.name = name
        super().__init__(f"{name}: failure {failure_date} precedes launch {launch_date}")


class MissingFundingYear(DatasetError):
    def __init__(self, year: int, series: str):
        self.year = year
        self.series = series
        super().__init__(f"funding series '{series}' has no value for year {year}")


# -- features ----------------------------------------------------------------


class FeatureError(StetiError):
    """Raised when records cannot be turned into model inputs."""

    module = "features"


class NonPositiveLifetime(FeatureError):
    def __init__(self, lifetime: float):
        self.lifetime = lifetime
        super().__init__(f"log2 target undefined for lifetime {lifetime}")


class SequenceTooShort(FeatureError):
    def __init__(self, length: int, window: int):
        self.length = length
        self.window = window
        super().__init__(f"sequence of length {length} is shorter than window {window}")


class EmptyPartition(FeatureError):
    def __init__(self, counts: tuple[int, int, int]):
        self.counts = counts
        super().__init__(f"time split produced an empty partition (train/val/test = {counts})")


# -- neural network ----------------------------------------------------------


class ModelError(StetiError):
    """Raised by the recurrent network and its training loop."""

    module = "neuralnet"


class DimensionMismatch(ModelError):
    """Raised when input and parameter shapes disagree."""


class VocabularyOverflow(ModelError):
    def __init__(self, index: int, size: int, feature: str = ""):
        self.index = index
        self.size = size
        super().__init__(f"category index {index} outside embedding table of {size} rows {feature}".rstrip())


class DivergedLoss(ModelError):
    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite training loss {loss} at epoch {epoch}")


class CheckpointMismatch(ModelError):
    """Raised when a checkpoint cannot serve the requested inputs."""


# -- fitting -----------------------------------------------------------------


class FitError(StetiError):
    """Raised by the closed-form lifetime trend fit."""

    module = "steti"


class NoConvergence(FitError):
    """Raised when the implicit lifetime solve hits its iteration cap."""


class DegenerateData(FitError):
    """Raised when the failure points cannot identify a trend."""


# -- tuning ------------------------------------------------------------------


class TuningError(StetiError):
    module = "hypertune"


class AllTrialsFailed(TuningError):
    def __init__(self, n_trials: int):
        self.n_trials = n_trials
        super().__init__(f"all {n_trials} trials failed")


# -- benchmark ---------------------------------------------------------------


class BenchmarkError(StetiError):
    module = "benchmark"


class RankDeficient(BenchmarkError):
    def __init__(self, rank: int, columns: int, rows: int):
        self.rank = rank
        super().__init__(f"design matrix with {rows} rows and {columns} columns has rank {rank}")


class NoQualifyingModel(BenchmarkError):
    def __init__(self, threshold: float):
        self.threshold = threshold
        super().__init__(f"every candidate breaches the VIF threshold {threshold}")
