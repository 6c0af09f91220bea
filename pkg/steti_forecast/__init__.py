"""
steti_forecast: spacecraft lifetime forecasting with failure-time/launch-time transfer.
"""

from .toolkit import StetiToolkit
from .config import HyperParams, Phase, RunConfig, Stage, load_config
from .dataset import Dataset, load_dataset
from .models import MissionRecord, MooresLawParams
from .steti.closed_form import fit_steti_closed_form, solve_failure_lifetime
from .exceptions import (
    StetiError,
    ConfigurationError,
    DatasetError,
    FeatureError,
    ModelError,
    FitError,
    TuningError,
    BenchmarkError,
)

__all__ = [
    "StetiToolkit",
    "HyperParams",
    "Phase",
    "RunConfig",
    "Stage",
    "load_config",
    "Dataset",
    "load_dataset",
    "MissionRecord",
    "MooresLawParams",
    "fit_steti_closed_form",
    "solve_failure_lifetime",
    "StetiError",
    "ConfigurationError",
    "DatasetError",
    "FeatureError",
    "ModelError",
    "FitError",
    "TuningError",
    "BenchmarkError",
]
