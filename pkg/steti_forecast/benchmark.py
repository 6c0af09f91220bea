"""
Regression benchmark: a partially log-linear OLS model of log2 lifetime on launch date,
log2 launch mass, log2 trailing moving averages of funding and one-hot categoricals,
with a VIF-constrained search over funding subsets and moving-average windows.
"""
import itertools
import json
import logging
import math
from collections import Counter
from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np
import pandas as pd
import statsmodels.api as sm
from sklearn.model_selection import KFold
from statsmodels.stats.outliers_influence import variance_inflation_factor

from .config import CATEGORICAL_COLUMNS, BenchmarkConfig
from .dataset.transforms import funding_value, sort_records
from .exceptions import DegenerateData, NoQualifyingModel, RankDeficient
from .models import (
    CandidateEvaluation,
    CandidateSummary,
    FundingSeries,
    MissionRecord,
    RegressionModel,
    SearchResult,
)

logger = logging.getLogger(__name__)

CONST = "const"
CONTINUOUS = ("launch_date", "log2_mass")
# VIF above this is reported as perfect collinearity
MAX_FINITE_VIF = 1e10


def moving_average_feature(series: FundingSeries, window: int, year: int) -> float:
    """Mean of the series over years year - window + 1 .. year."""
    return float(np.mean([funding_value(series, y) for y in range(year - window + 1, year + 1)]))


def pearson_matrix(frame: pd.DataFrame) -> pd.DataFrame:
    return frame.corr(method="pearson")


def ols_fit(design: pd.DataFrame, targets: Sequence[float] | np.ndarray, check_rank: bool = True) -> RegressionModel:
    """
    Raises:
        RankDeficient: If the design has no more rows than columns or lacks full column rank.
    """
    X = np.asarray(design, dtype=np.float64)
    rows, columns = X.shape
    if check_rank:
        rank = int(np.linalg.matrix_rank(X))
        if rows <= columns or rank < columns:
            raise RankDeficient(rank, columns, rows)
    fit = sm.OLS(np.asarray(targets, dtype=np.float64), X).fit()
    return RegressionModel(
        columns=list(design.columns),
        coefficients=[float(c) for c in fit.params],
        residual_variance=float(fit.scale) if rows > columns else 0.0,
    )


def vif(design: pd.DataFrame) -> dict[str, float]:
    """
    VIF of every non-constant column, regressing it on all the others (constant included).
    Perfectly collinear columns get +inf.
    """
    X = np.asarray(design, dtype=np.float64)
    values = {}
    for j, column in enumerate(design.columns):
        if column == CONST:
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            value = float(variance_inflation_factor(X, j))
        values[column] = value if math.isfinite(value) and value < MAX_FINITE_VIF else math.inf
    return values


def kfold_cv_rmse(design: pd.DataFrame, targets: Sequence[float] | np.ndarray, k: int = 5) -> float:
    """Mean validation RMSE over k contiguous, unshuffled folds."""
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    scores = []
    for train_idx, val_idx in KFold(n_splits=k, shuffle=False).split(X):
        coefficients = sm.OLS(y[train_idx], X[train_idx]).fit().params
        residual = y[val_idx] - X[val_idx] @ coefficients
        scores.append(math.sqrt(float(np.mean(residual**2))))
    return float(np.mean(scores))


def fit_rows(records: Sequence[MissionRecord], fit_years: tuple[int, int] | None) -> list[MissionRecord]:
    """Failed records launched inside the fit window, in launch order."""
    rows = [r for r in records if r.failed]
    if fit_years is not None:
        rows = [r for r in rows if fit_years[0] <= math.floor(r.launch_date) <= fit_years[1]]
    return sort_records(rows)


def dummy_levels(records: Sequence[MissionRecord]) -> tuple[dict[str, str], dict[str, list[str]]]:
    """Reference level (most frequent, ties alphabetical) and the remaining levels per feature."""
    references, levels = {}, {}
    for feature in CATEGORICAL_COLUMNS:
        counts = Counter(getattr(r, feature) for r in records)
        ordered = sorted(counts, key=lambda label: (-counts[label], label))
        references[feature] = ordered[0]
        levels[feature] = sorted(ordered[1:])
    return references, levels


def design_frame(
    records: Sequence[MissionRecord],
    funding: Mapping[str, FundingSeries],
    variables: Sequence[str],
    window: int,
    levels: Mapping[str, Sequence[str]],
) -> pd.DataFrame:
    columns: dict[str, list[float]] = {
        CONST: [1.0] * len(records),
        "launch_date": [r.launch_date for r in records],
        "log2_mass": [math.log2(r.launch_mass) for r in records],
    }
    for variable in variables:
        columns[f"log2_ma_{variable}"] = [
            math.log2(moving_average_feature(funding[variable], window, math.floor(r.launch_date))) for r in records
        ]
    for feature, feature_levels in levels.items():
        for level in feature_levels:
            columns[f"{feature}={level}"] = [float(getattr(r, feature) == level) for r in records]
    return pd.DataFrame(columns)


def _prune_dummies(frame: pd.DataFrame, levels: Mapping[str, list[str]]) -> dict[str, list[str]]:
    """Drops dummy columns, left to right, that do not raise the design rank."""
    base = [c for c in frame.columns if "=" not in c]
    kept_columns = list(base)
    rank = int(np.linalg.matrix_rank(frame[kept_columns].to_numpy()))
    kept: dict[str, list[str]] = {}
    for feature, feature_levels in levels.items():
        kept[feature] = []
        for level in feature_levels:
            trial = kept_columns + [f"{feature}={level}"]
            trial_rank = int(np.linalg.matrix_rank(frame[trial].to_numpy()))
            if trial_rank > rank:
                kept_columns, rank = trial, trial_rank
                kept[feature].append(level)
    return kept


class BenchmarkDesign:
    """Design-matrix builder fixed to the training rows' categorical levels."""

    def __init__(self, records: Sequence[MissionRecord], funding: Mapping[str, FundingSeries]):
        if len(records) < 3:
            raise DegenerateData(f"benchmark needs at least 3 failed records, got {len(records)}")
        self.records = list(records)
        self.funding = funding
        self.references, all_levels = dummy_levels(self.records)
        full = design_frame(self.records, funding, [], 1, all_levels)
        self.levels = _prune_dummies(full, all_levels)
        self.targets = np.log2([r.lifetime for r in self.records])

    def frame(self, variables: Sequence[str], window: int, records: Sequence[MissionRecord] | None = None):
        return design_frame(self.records if records is None else records, self.funding, variables, window, self.levels)

    def continuous(self, variables: Sequence[str]) -> list[str]:
        return [CONST, *CONTINUOUS, *(f"log2_ma_{v}" for v in variables)]

    def evaluate(self, variables: Sequence[str], window: int, config: BenchmarkConfig) -> CandidateEvaluation:
        frame = self.frame(variables, window)
        vifs = vif(frame[self.continuous(variables)])
        max_vif = max(vifs.values())
        return CandidateEvaluation(
            funding_variables=list(variables),
            window=window,
            mean_rmse=kfold_cv_rmse(frame, self.targets, config.k_folds),
            max_vif=max_vif,
            qualified=max_vif < config.vif_threshold,
        )

    def fit(self, variables: Sequence[str], window: int) -> RegressionModel:
        model = ols_fit(self.frame(variables, window), self.targets)
        return model.model_copy(
            update={
                "funding_variables": list(variables),
                "window": window,
                "dummy_levels": self.levels,
                "reference_levels": self.references,
            }
        )


def candidate_subsets(variables: Sequence[str]) -> list[tuple[str, ...]]:
    """Every non-empty subset, largest first."""
    return [c for size in range(len(variables), 0, -1) for c in itertools.combinations(variables, size)]


def feature_search(
    records: Sequence[MissionRecord],
    funding: Mapping[str, FundingSeries],
    config: BenchmarkConfig | None = None,
) -> SearchResult:
    """
    Evaluates every funding subset at every window size with k-fold CV and picks the
    lowest mean RMSE among candidates whose VIFs all stay below the threshold.

    Raises:
        NoQualifyingModel: If every candidate breaches the VIF threshold.
    """
    config = config or BenchmarkConfig()
    design = BenchmarkDesign(fit_rows(records, config.fit_years), funding)
    evaluations, summaries = [], []
    for model_no, subset in enumerate(candidate_subsets(config.funding_variables), start=1):
        per_window = [design.evaluate(subset, w, config) for w in range(1, config.max_window + 1)]
        evaluations.extend(per_window)
        best = min(per_window, key=lambda e: e.mean_rmse)
        summaries.append(
            CandidateSummary(
                model_no=model_no, funding_variables=list(subset), lowest_mean_rmse=best.mean_rmse, best_window=best.window
            )
        )
    selected = None
    for evaluation in evaluations:
        if evaluation.qualified and (selected is None or evaluation.mean_rmse < selected.mean_rmse):
            selected = evaluation
    if selected is None:
        raise NoQualifyingModel(config.vif_threshold)
    variables = selected.funding_variables
    vif_table = vif(design.frame(variables, selected.window)[design.continuous(variables)])
    logger.info(
        "benchmark selected %s at window %d (mean CV RMSE %.6g)", variables, selected.window, selected.mean_rmse
    )
    return SearchResult(
        candidates=summaries,
        evaluations=evaluations,
        selected_variables=variables,
        selected_window=selected.window,
        selected_rmse=selected.mean_rmse,
        vif_table=vif_table,
    )


def fit_selected(
    records: Sequence[MissionRecord], funding: Mapping[str, FundingSeries], result: SearchResult, config: BenchmarkConfig
) -> RegressionModel:
    design = BenchmarkDesign(fit_rows(records, config.fit_years), funding)
    return design.fit(result.selected_variables, result.selected_window)


def correlation_screen(
    records: Sequence[MissionRecord], funding: Mapping[str, FundingSeries], config: BenchmarkConfig, window: int
) -> pd.DataFrame:
    """Pearson correlations of the continuous regressors, every funding variable included, at one window."""
    design = BenchmarkDesign(fit_rows(records, config.fit_years), funding)
    columns = design.continuous(config.funding_variables)[1:]
    return pearson_matrix(design.frame(config.funding_variables, window)[columns])


def benchmark_predict(model: RegressionModel, record: MissionRecord, funding: Mapping[str, FundingSeries]) -> float:
    """Unseen categorical levels fall back to the reference level."""
    row = design_frame([record], funding, model.funding_variables, model.window, model.dummy_levels)
    return float(row[model.columns].to_numpy()[0] @ np.asarray(model.coefficients))


class RegressionPredictor:
    def __init__(self, model: RegressionModel, records: Sequence[MissionRecord], funding: Mapping[str, FundingSeries]):
        self.model = model
        self.records = {r.name: r for r in records}
        self.funding = funding

    def predict_names(self, names: Sequence[str]) -> np.ndarray:
        return np.array([benchmark_predict(self.model, self.records[n], self.funding) for n in names])


def write_search_report(result: SearchResult, output_dir: str | Path) -> list[Path]:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    candidates = pd.DataFrame(
        [
            {
                "model_no": c.model_no,
                "variables": "+".join(c.funding_variables),
                "lowest_mean_rmse": c.lowest_mean_rmse,
                "best_window": c.best_window,
            }
            for c in result.candidates
        ]
    )
    evaluations = pd.DataFrame(
        [
            {
                "variables": "+".join(e.funding_variables),
                "window": e.window,
                "mean_rmse": e.mean_rmse,
                "max_vif": e.max_vif,
                "qualified": e.qualified,
            }
            for e in result.evaluations
        ]
    )
    vif_frame = pd.DataFrame({"variable": list(result.vif_table), "vif": list(result.vif_table.values())})
    paths = [output_dir / "benchmark_search.csv", output_dir / "benchmark_evaluations.csv", output_dir / "benchmark_vif.csv"]
    for frame, path in zip((candidates, evaluations, vif_frame), paths):
        frame.to_csv(path, index=False, float_format="%.17g")
    summary = output_dir / "benchmark_summary.json"
    summary.write_text(
        json.dumps(
            {
                "selected_variables": result.selected_variables,
                "selected_window": result.selected_window,
                "selected_rmse": result.selected_rmse,
            },
            indent=2,
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    return paths + [summary]


__all__ = [
    "BenchmarkDesign",
    "RegressionPredictor",
    "benchmark_predict",
    "candidate_subsets",
    "correlation_screen",
    "feature_search",
    "fit_selected",
    "kfold_cv_rmse",
    "moving_average_feature",
    "ols_fit",
    "pearson_matrix",
    "vif",
]
