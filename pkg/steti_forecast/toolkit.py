"""
Main toolkit class: the end-to-end workflow behind each CLI command.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .benchmark import RegressionPredictor, correlation_screen, feature_search, fit_selected, write_search_report
from .config import Phase, RunConfig, Stage
from .dataset import Dataset, load_dataset, summarize
from .exceptions import CheckpointMismatch, ConfigurationError
from .models import ComparisonReport, MooresLawParams, ScenarioResult, SearchResult, Trial
from .nn.checkpoint import load_checkpoint
from .scenario import emit_plot_data, predict_scenarios
from .steti.closed_form import bias_diagnostic, failure_points, fit_naive_launch_trend, fit_steti_closed_form, launch_curve
from .steti.pipeline import (
    PhaseReport,
    StagePipeline,
    StagePredictor,
    compare_models,
    shared_test_records,
    write_phase_report,
)
from .synthetic import generate_cohort

logger = logging.getLogger(__name__)


def _write_json(path: Path, payload: dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    return path


def _params_json(params: MooresLawParams) -> dict[str, float | None]:
    return {"l_1959": params.l_1959, "d": params.d if math.isfinite(params.d) else None, "epoch": params.epoch}


def write_comparison(report: ComparisonReport, output_dir: Path, stem: str) -> list[Path]:
    """Per-record actual vs predicted log2 lifetimes, plus the RMSE of each model."""
    frame = pd.DataFrame({"name": report.names, "actual": report.actual, **report.predictions})
    csv_path = output_dir / f"{stem}.csv"
    frame.to_csv(csv_path, index=False, float_format="%.17g")
    json_path = _write_json(output_dir / f"{stem}.json", {"rmse": report.rmse, "winner": report.winner})
    return [csv_path, json_path]


class StetiToolkit:
    """
    Loads the dataset named by a RunConfig once and runs the workflow steps against it.
    """

    def __init__(self, config: RunConfig):
        if not isinstance(config, RunConfig):
            raise ConfigurationError("Invalid RunConfig provided.")
        self.config = config
        self._dataset: Dataset | None = None

    @property
    def output_dir(self) -> Path:
        return self.config.paths.output_dir

    @property
    def dataset(self) -> Dataset:
        if self._dataset is None:
            self.config.check_paths("missions", "funding")
            self._dataset = load_dataset(
                self.config.paths, self.config.observation_date, self.config.deflator_base_year
            )
        return self._dataset

    def ingest(self) -> pd.DataFrame:
        """Validates the inputs and writes the attribute summary."""
        dataset = self.dataset
        summary = summarize(dataset.records)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        summary.to_csv(self.output_dir / "ingest_summary.csv", index=False)
        _write_json(
            self.output_dir / "ingest.json",
            {"records": len(dataset.records), "inactive": len(dataset.failed), "active": len(dataset.active)},
        )
        return summary

    def steti_fit(self) -> MooresLawParams:
        """Closed-form fit on failure dates, the naive launch-date fit and the bias diagnostic."""
        records = self.dataset.records
        t_failure, lifetimes = failure_points(records)
        params = fit_steti_closed_form(t_failure, lifetimes, self.config.epoch)
        failed = self.dataset.failed
        naive = fit_naive_launch_trend([r.launch_date for r in failed], [r.lifetime for r in failed], self.config.epoch)
        _write_json(self.output_dir / "steti_fit.json", {"closed_form": _params_json(params), "naive": _params_json(naive)})

        first = math.floor(min(r.launch_date for r in records))
        last = math.ceil(max(r.launch_date for r in records))
        years = np.arange(first, last + 1, dtype=float)
        pd.DataFrame({"launch_date": years, "lifetime": launch_curve(years, params)}).to_csv(
            self.output_dir / "launch_curve.csv", index=False, float_format="%.17g"
        )
        bias_diagnostic(records, params).to_csv(
            self.output_dir / "bias_diagnostic.csv", index=False, float_format="%.17g"
        )
        return params

    def train(self, phases: list[Phase] | None = None) -> list[PhaseReport]:
        """Runs both stages of every requested phase and compares the phases' launch-time models."""
        pipeline = StagePipeline(self.dataset, self.config, self.output_dir)
        selected = [p for p in self.config.phases if phases is None or p.phase in phases]
        if not selected:
            raise ConfigurationError(f"no configured phase among {[str(p) for p in phases or []]}")
        reports = []
        for phase_cfg in selected:
            report = pipeline.run_phase(phase_cfg)
            write_phase_report(report, self.output_dir)
            active = pipeline.predict_active(report.best)
            pd.DataFrame({"name": list(active), "prediction": list(active.values())}).to_csv(
                self.output_dir / f"{phase_cfg.phase}_active_predictions.csv", index=False, float_format="%.17g"
            )
            reports.append(report)
        if len(reports) > 1:
            self._compare_phases(pipeline, reports)
        return reports

    def _compare_phases(self, pipeline: StagePipeline, reports: list[PhaseReport]) -> ComparisonReport | None:
        """Scores the phases' launch-time models on the test records they all held out."""
        test_records = shared_test_records([r.best for r in reports], self.dataset.records)
        if not any(r.failed for r in test_records):
            logger.warning("phases share no held-out failed records; skipping the phase comparison")
            return None
        predictors = {str(r.phase): pipeline.predictor(r.best) for r in reports}
        comparison = compare_models(predictors, test_records)
        write_comparison(comparison, self.output_dir, "phase_comparison")
        logger.info(
            "phase comparison on %d test records: %s",
            len(comparison.names),
            {k: round(v, 6) for k, v in comparison.rmse.items()},
        )
        return comparison

    def tune(self, phase: Phase, stage: Stage, max_trials: int | None = None) -> Trial:
        """
        Hyperparameter search for one stage. A standalone launch-stage search uses observed
        log2 lifetimes of failed records as targets.
        """
        config = self.config
        if max_trials is not None:
            config = config.model_copy(update={"tune": config.tune.model_copy(update={"max_trials": max_trials})})
        phase_cfg = config.phase(phase)
        pipeline = StagePipeline(self.dataset, config, self.output_dir)
        targets = None
        if stage == Stage.launch:
            targets = {r.name: math.log2(r.lifetime) for r in self.dataset.failed}
        best = pipeline.tune(stage, phase_cfg, config.tune.split_ratio, targets)
        trials = next(iter(pipeline.studies.values()))

        rows = [
            {
                "trial_id": t.trial_id,
                **t.params.model_dump(mode="json"),
                "objective": t.objective,
                "status": str(t.status),
                "seed": t.seed,
            }
            for t in trials
        ]
        self.output_dir.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows).to_csv(self.output_dir / "tune_trials.csv", index=False, float_format="%.17g")
        _write_json(
            self.output_dir / "tune_summary.json",
            {
                "phase": str(phase),
                "stage": str(stage),
                "split_ratio": config.tune.split_ratio,
                "trials": len(trials),
                "best_trial": best.trial_id,
                "best_objective": best.objective,
                "best_hyperparams": best.params.model_dump(mode="json"),
            },
        )
        return best

    def benchmark(self, checkpoint_path: str | Path | None = None) -> tuple[SearchResult, ComparisonReport | None]:
        """
        Funding-variable search for the regression benchmark. With a launch-time checkpoint,
        both models are scored against observed lifetimes on that checkpoint's test split.
        """
        dataset = self.dataset
        result = feature_search(dataset.records, dataset.funding, self.config.benchmark)
        write_search_report(result, self.output_dir)
        window = result.selected_window
        correlations = correlation_screen(dataset.records, dataset.funding, self.config.benchmark, window)
        correlations.to_csv(self.output_dir / "benchmark_correlation.csv", float_format="%.17g")
        if checkpoint_path is None:
            return result, None

        checkpoint = load_checkpoint(checkpoint_path)
        if checkpoint.context.stage != Stage.launch:
            raise CheckpointMismatch("benchmark comparison needs a launch-time checkpoint")
        test_names = set(checkpoint.metadata.get("test_names", []))
        if not test_names:
            raise CheckpointMismatch(f"checkpoint {checkpoint_path} records no test split")
        model = fit_selected(dataset.records, dataset.funding, result, self.config.benchmark)
        predictors = {
            "lstm": StagePredictor(checkpoint, dataset.records, dataset.funding),
            "benchmark": RegressionPredictor(model, dataset.records, dataset.funding),
        }
        test_records = [r for r in dataset.records if r.name in test_names]
        comparison = compare_models(predictors, test_records)
        write_comparison(comparison, self.output_dir, "benchmark_comparison")
        logger.info(
            "benchmark vs lstm on %d test records: %s", len(comparison.names), {k: round(v, 6) for k, v in comparison.rmse.items()}
        )
        return result, comparison

    def scenario(self, checkpoint_path: str | Path) -> list[ScenarioResult]:
        checkpoint = load_checkpoint(checkpoint_path)
        results = []
        for spec in self.config.scenarios:
            result = predict_scenarios(spec, checkpoint, self.dataset)
            emit_plot_data(result, self.output_dir / f"scenario_{spec.name}.csv")
            results.append(result)
        return results

    def synth(self, n: int, directory: str | Path | None = None) -> Path:
        """Writes a synthetic cohort's three input files; returns their directory."""
        directory = Path(directory) if directory is not None else self.output_dir / "synthetic"
        cohort = generate_cohort(n=n, seed=self.config.seed)
        cohort.write(directory)
        logger.info("synthetic cohort of %d records written to %s", n, directory)
        return directory
