"""
Two-stage output-transfer training.

Stage 1 learns lifetime as a function of failure date (failed records, failure order).
Its best model's predictions become the targets of Stage 2, which learns lifetime as a
function of launch date (launch order). Each stage sweeps split ratios, batch sizes and
tuned/default hyperparameters and keeps the configuration with the lowest test RMSE.
"""
import json
import logging
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Protocol

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ..config import BatchSize, HyperParams, Phase, PhaseConfig, RunConfig, Stage, TrainConfig, spawn_rng
from ..dataset import Dataset
from ..features import (
    FeatureContext,
    SplitSpec,
    StageData,
    Vocabulary,
    build_examples,
    encode_categoricals,
    prepare_stage,
    stage_order,
)
from ..hypertune import SearchSpace, create_sampler, run_study
from ..models import ComparisonReport, FundingSeries, MissionRecord, Trial
from ..nn.checkpoint import Checkpoint, save_checkpoint
from ..nn.model import Architecture, ModelParams, init_params, predict
from ..nn.training import TrainingHistory, train
from .metrics import mse, rmse

logger = logging.getLogger(__name__)

TUNED = "tuned"
DEFAULT = "default"


class GridCell(BaseModel):
    setting: str
    split_ratio: float
    batch_size: BatchSize
    hyperparams: HyperParams
    test_rmse: float
    best_val_loss: float
    best_epoch: int
    epochs: int


class PredictionRow(BaseModel):
    name: str
    key_date: float
    partition: str
    target: float
    prediction: float
    observed: float


class StageResult(BaseModel):
    """Sweep outcome of one stage; ``best`` attains the grid minimum."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    stage: Stage
    phase: Phase
    grid: list[GridCell]
    best: GridCell
    split: SplitSpec
    checkpoint: Checkpoint
    checkpoint_path: Path | None = None
    # best model's prediction for every record owning a full window
    predictions: dict[str, float]
    rows: list[PredictionRow]
    observed_test_rmse: float | None = None

    def rmse_grid(self, setting: str) -> pd.DataFrame:
        """Rows are split ratios, columns batch sizes."""
        cells = [c for c in self.grid if c.setting == setting]
        frame = pd.DataFrame(
            [{"split": c.split_ratio, "batch": str(c.batch_size), "rmse": c.test_rmse} for c in cells]
        )
        if frame.empty:
            return frame
        table = frame.pivot(index="split", columns="batch", values="rmse")
        return table[list(dict.fromkeys(frame["batch"]))]

    def predictions_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.rows])


class PhaseReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    phase: Phase
    stage1: StageResult
    stage2: StageResult
    tuning: dict[str, list[Trial]] = Field(default_factory=dict)

    @property
    def best(self) -> StageResult:
        """The deliverable launch-time model."""
        return self.stage2


class Predictor(Protocol):
    def predict_names(self, names: Sequence[str]) -> np.ndarray: ...


class StagePredictor:
    """
    Predicts named records with a checkpoint, rebuilding each record's window from the
    full ordered dataset. Examples are predicted one at a time so a record always gets
    bitwise the same value.
    """

    def __init__(self, checkpoint: Checkpoint, records: Sequence[MissionRecord], funding: Mapping[str, FundingSeries]):
        self.checkpoint = checkpoint
        self.funding = funding
        self.ordered = stage_order(records, checkpoint.context.stage)
        self.positions = {r.name: k for k, r in enumerate(self.ordered)}

    @property
    def context(self) -> FeatureContext:
        return self.checkpoint.context

    def has_window(self, name: str) -> bool:
        return self.positions.get(name, -1) >= self.context.window_size - 1

    def _predict_at(self, ordered: Sequence[MissionRecord], k: int) -> float:
        examples = build_examples(ordered, self.funding, self.context, [k])
        return float(self.checkpoint.predict(examples)[0])

    def predict_names(self, names: Sequence[str]) -> np.ndarray:
        """NaN for records without a full window."""
        return np.array([self._predict_at(self.ordered, self.positions[n]) if self.has_window(n) else np.nan for n in names])

    def predict_record(self, record: MissionRecord) -> float:
        """Prediction for a variant of an existing record, inside that record's window."""
        k = self.positions[record.name]
        ordered = list(self.ordered)
        ordered[k] = record
        return self._predict_at(ordered, k)


class _CellJob(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    data: StageData
    hyperparams: HyperParams
    train: TrainConfig
    init_seed: int


class _CellOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: ModelParams
    history: TrainingHistory
    test_mse: float


def _fit_cell(job: _CellJob) -> _CellOutcome:
    context = job.data.context
    arch = Architecture.build(
        job.train.hidden_size, len(context.channels), job.hyperparams, context.phase, context.vocabulary
    )
    params = init_params(arch, spawn_rng(job.init_seed, "init", str(context.stage)))
    best, history = train(job.data.train, job.data.val, params, job.hyperparams, job.train)
    test_mse = mse(job.data.test.target, predict(job.data.test, best, job.hyperparams))
    return _CellOutcome(params=best, history=history, test_mse=test_mse)


def _run_jobs(jobs: list[_CellJob], n_jobs: int) -> list[_CellOutcome]:
    """Results come back in submission order."""
    if n_jobs <= 1 or len(jobs) <= 1:
        return [_fit_cell(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_fit_cell, jobs))


def compare_models(
    predictors: Mapping[str, Predictor], records: Sequence[MissionRecord]
) -> ComparisonReport:
    """
    RMSE of each model against observed log2 lifetimes on the failed records every model
    can predict. Ties go to the first model.
    """
    failed = [r for r in records if r.failed]
    names = [r.name for r in failed]
    actual = np.log2([r.lifetime for r in failed])
    predictions = {label: p.predict_names(names) for label, p in predictors.items()}
    keep = np.all([np.isfinite(p) for p in predictions.values()], axis=0) if predictions else np.ones(len(names), bool)
    scores = {label: rmse(actual[keep], p[keep]) for label, p in predictions.items()}
    winner = min(scores, key=lambda label: (scores[label], list(scores).index(label)))
    return ComparisonReport(
        names=[n for n, k in zip(names, keep) if k],
        actual=actual[keep].tolist(),
        predictions={label: p[keep].tolist() for label, p in predictions.items()},
        rmse=scores,
        winner=winner,
    )


def shared_test_records(results: Sequence[StageResult], records: Sequence[MissionRecord]) -> list[MissionRecord]:
    """Records held out as test examples by every result's checkpoint."""
    names = set.intersection(*(set(r.checkpoint.metadata.get("test_names", [])) for r in results)) if results else set()
    return [r for r in records if r.name in names]


class StagePipeline:
    """
    Runs both stages of a phase on a dataset.
    """

    def __init__(self, dataset: Dataset, config: RunConfig, output_dir: str | Path | None = None):
        self.dataset = dataset
        self.config = config
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.vocabulary: Vocabulary = encode_categoricals(dataset.records)[0]
        self.studies: dict[str, list[Trial]] = {}

    def prepare(
        self,
        stage: Stage,
        phase_cfg: PhaseConfig,
        hyperparams: HyperParams,
        ratio: float,
        targets: Mapping[str, float] | None = None,
    ) -> StageData:
        return prepare_stage(
            self.dataset.records,
            self.dataset.funding,
            stage,
            phase_cfg.phase,
            hyperparams,
            ratio,
            targets=targets,
            vocabulary=self.vocabulary,
            mask_target_lifetime=phase_cfg.mask_target_lifetime,
        )

    def tune(
        self,
        stage: Stage,
        phase_cfg: PhaseConfig,
        ratio: float,
        targets: Mapping[str, float] | None = None,
    ) -> Trial:
        """
        Searches hyperparameters for one (stage, split ratio) with full-batch training.
        The objective is the loss on the held-out test split.
        """
        tune_cfg = self.config.tune
        train_cfg = TrainConfig(
            **{
                **self.config.train.model_dump(),
                "batch_size": "full",
                "max_epochs": tune_cfg.max_epochs or self.config.train.max_epochs,
            }
        )

        def objective(hyperparams: HyperParams) -> float:
            data = self.prepare(stage, phase_cfg, hyperparams, ratio, targets)
            job = _CellJob(data=data, hyperparams=hyperparams, train=train_cfg, init_seed=self.config.seed)
            return _fit_cell(job).test_mse

        key = f"{phase_cfg.phase}_{stage}_{ratio}"
        ledger = self.output_dir / "tuning" / f"ledger_{key}.csv" if self.output_dir is not None else None
        best, trials = run_study(
            objective,
            SearchSpace(phase_cfg.phase),
            tune_cfg.max_trials,
            seed=self.config.seed,
            sampler=create_sampler(tune_cfg),
            ledger_path=ledger,
        )
        self.studies[key] = trials
        return best

    def _settings(
        self, stage: Stage, phase_cfg: PhaseConfig, targets: Mapping[str, float] | None
    ) -> dict[str, dict[float, HyperParams]]:
        default = HyperParams.default(phase_cfg.phase)
        settings: dict[str, dict[float, HyperParams]] = {}
        if phase_cfg.tune:
            settings[TUNED] = {r: self.tune(stage, phase_cfg, r, targets).params for r in phase_cfg.split_ratios}
        settings[DEFAULT] = {r: default for r in phase_cfg.split_ratios}
        return settings

    def _train_stage(
        self, stage: Stage, phase_cfg: PhaseConfig, targets: Mapping[str, float] | None
    ) -> StageResult:
        settings = self._settings(stage, phase_cfg, targets)
        jobs, labels, prepared = [], [], {}
        for setting, per_ratio in settings.items():
            for ratio in phase_cfg.split_ratios:
                hp = per_ratio[ratio]
                data = self.prepare(stage, phase_cfg, hp, ratio, targets)
                prepared[(setting, ratio)] = data
                for batch in phase_cfg.batch_sizes:
                    cfg = TrainConfig(**{**self.config.train.model_dump(), "batch_size": batch})
                    jobs.append(_CellJob(data=data, hyperparams=hp, train=cfg, init_seed=self.config.seed))
                    labels.append((setting, ratio, batch))
        logger.info("%s/%s: training %d configurations", phase_cfg.phase, stage, len(jobs))
        outcomes = _run_jobs(jobs, self.config.jobs)

        grid = []
        for (setting, ratio, batch), job, outcome in zip(labels, jobs, outcomes):
            grid.append(
                GridCell(
                    setting=setting,
                    split_ratio=ratio,
                    batch_size=batch,
                    hyperparams=job.hyperparams,
                    test_rmse=math.sqrt(outcome.test_mse),
                    best_val_loss=outcome.history.best_val_loss,
                    best_epoch=outcome.history.best_epoch,
                    epochs=outcome.history.epochs,
                )
            )
        best_index = 0
        for i, cell in enumerate(grid):
            if cell.test_rmse < grid[best_index].test_rmse:
                best_index = i
        best = grid[best_index]
        data = prepared[(best.setting, best.split_ratio)]
        logger.info(
            "%s/%s best: %s split=%s batch=%s rmse=%.6g",
            phase_cfg.phase, stage, best.setting, best.split_ratio, best.batch_size, best.test_rmse,
        )
        checkpoint = Checkpoint(
            params=outcomes[best_index].params,
            hyperparams=best.hyperparams,
            context=data.context,
            metadata={
                "stage": str(stage),
                "phase": str(phase_cfg.phase),
                "setting": best.setting,
                "split_ratio": best.split_ratio,
                "batch_size": str(best.batch_size),
                "test_rmse": best.test_rmse,
                "test_names": list(data.test.names),
            },
        )
        path = None
        if self.output_dir is not None:
            path = save_checkpoint(checkpoint, self.output_dir / "checkpoints" / f"{phase_cfg.phase}_{stage}.npz")
        return self._collect(stage, phase_cfg.phase, grid, best, data, checkpoint, path, targets)

    def _collect(self, stage, phase, grid, best, data, checkpoint, path, targets) -> StageResult:
        predictor = StagePredictor(checkpoint, self.dataset.records, self.dataset.funding)
        names = [data.ordered[k].name for k in data.eligible]
        values = predictor.predict_names(names)
        predictions = dict(zip(names, values.tolist()))
        partitions = {}
        for part in ("train", "val", "test"):
            partitions.update({n: part for n in getattr(data, part).names})
        rows = []
        for k, name in zip(data.eligible, names):
            record = data.ordered[k]
            observed = math.log2(record.lifetime) if record.lifetime is not None else math.nan
            rows.append(
                PredictionRow(
                    name=name,
                    key_date=data.context.key_date(record),
                    partition=partitions[name],
                    target=targets[name] if targets is not None else observed,
                    prediction=predictions[name],
                    observed=observed,
                )
            )
        observed_rmse = None
        if targets is not None:
            test = [r for r in rows if r.partition == "test" and math.isfinite(r.observed)]
            if test:
                observed_rmse = rmse([r.observed for r in test], [r.prediction for r in test])
        return StageResult(
            stage=stage,
            phase=phase,
            grid=grid,
            best=best,
            split=data.split,
            checkpoint=checkpoint,
            checkpoint_path=path,
            predictions=predictions,
            rows=rows,
            observed_test_rmse=observed_rmse,
        )

    def stage1_train(self, phase_cfg: PhaseConfig) -> StageResult:
        """Failure-time models on failed records; observed log2 lifetimes as targets."""
        return self._train_stage(Stage.failure, phase_cfg, None)

    def stage2_train(self, phase_cfg: PhaseConfig, targets: Mapping[str, float]) -> StageResult:
        """
        Launch-time models whose targets are the transferred Stage-1 predictions.
        Active records sit in the lookback windows but are never targets.
        """
        failed = {r.name for r in self.dataset.failed}
        targets = {name: value for name, value in targets.items() if name in failed}
        return self._train_stage(Stage.launch, phase_cfg, targets)

    def run_phase(self, phase_cfg: PhaseConfig) -> PhaseReport:
        stage1 = self.stage1_train(phase_cfg)
        stage2 = self.stage2_train(phase_cfg, stage1.predictions)
        tuning = {k: v for k, v in self.studies.items() if k.startswith(f"{phase_cfg.phase}_")}
        return PhaseReport(phase=phase_cfg.phase, stage1=stage1, stage2=stage2, tuning=tuning)

    def predictor(self, result: StageResult) -> StagePredictor:
        return StagePredictor(result.checkpoint, self.dataset.records, self.dataset.funding)

    def predict_active(self, result: StageResult) -> dict[str, float]:
        """Launch-time predictions for records that have not failed."""
        predictor = self.predictor(result)
        names = [r.name for r in self.dataset.active if predictor.has_window(r.name)]
        return dict(zip(names, predictor.predict_names(names).tolist()))


def _grid_csv(result: StageResult, path: Path) -> None:
    frames = []
    for setting in dict.fromkeys(c.setting for c in result.grid):
        table = result.rmse_grid(setting).reset_index()
        table.insert(0, "setting", setting)
        frames.append(table)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.17g")


def stage_summary(result: StageResult) -> dict[str, Any]:
    return {
        "setting": result.best.setting,
        "split_ratio": result.best.split_ratio,
        "batch_size": str(result.best.batch_size),
        "test_rmse": result.best.test_rmse,
        "observed_test_rmse": result.observed_test_rmse,
        "hyperparams": result.best.hyperparams.model_dump(mode="json"),
        "split": result.split.model_dump(),
        "checkpoint": None if result.checkpoint_path is None else result.checkpoint_path.name,
    }


def write_phase_report(report: PhaseReport, output_dir: str | Path) -> list[Path]:
    """RMSE grids and per-record predictions as CSV, plus a JSON summary."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for result in (report.stage1, report.stage2):
        grid_path = output_dir / f"{report.phase}_{result.stage}_rmse.csv"
        _grid_csv(result, grid_path)
        pred_path = output_dir / f"{report.phase}_{result.stage}_predictions.csv"
        result.predictions_frame().to_csv(pred_path, index=False, float_format="%.17g")
        written += [grid_path, pred_path]
    summary = {
        "phase": str(report.phase),
        "failure_stage": stage_summary(report.stage1),
        "launch_stage": stage_summary(report.stage2),
    }
    summary_path = output_dir / f"{report.phase}_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
    written.append(summary_path)
    return written
