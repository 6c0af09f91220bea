"""
What-if sweeps: hold a baseline record fixed, vary one feature, predict each variant
inside the baseline's own sequence window.
"""
import logging
import math
from collections.abc import Sequence
from pathlib import Path

import pandas as pd

from .config import Phase, ScenarioAxis, ScenarioSpec, Stage
from .dataset import Dataset
from .dataset.transforms import sort_records
from .exceptions import CheckpointMismatch
from .models import MissionRecord, ScenarioResult, ScenarioRow
from .nn.checkpoint import Checkpoint
from .steti.pipeline import StagePredictor

logger = logging.getLogger(__name__)

SCENARIO_COLUMNS = ["axis_value", "pred_log2_lifetime", "pred_lifetime_years", "extrapolation_flag"]


def resolve_baseline(spec: ScenarioSpec, records: Sequence[MissionRecord]) -> MissionRecord:
    """The named record, or the most recently launched one."""
    if spec.baseline is None:
        return sort_records(list(records))[-1]
    for record in records:
        if record.name == spec.baseline:
            return record
    raise CheckpointMismatch(f"scenario baseline '{spec.baseline}' is not in the dataset")


def build_scenarios(spec: ScenarioSpec, baseline: MissionRecord) -> list[MissionRecord]:
    """One hypothetical per sweep value, equal to the baseline except on the swept axis."""
    return [baseline.model_copy(update={str(spec.axis): value}) for value in spec.sweep_values()]


def _extrapolates(checkpoint: Checkpoint, axis: ScenarioAxis, value: float | str) -> bool:
    context = checkpoint.context
    if context.phase != Phase.time_plus:
        return False
    if axis == ScenarioAxis.launch_mass:
        return not context.scaler.in_range("launch_mass", float(value))
    return not context.vocabulary.known(str(axis), str(value))


def predict_scenarios(spec: ScenarioSpec, checkpoint: Checkpoint, dataset: Dataset) -> ScenarioResult:
    """
    Raises:
        CheckpointMismatch: If the checkpoint is not a launch-time model or the baseline has no full window.
    """
    if checkpoint.context.stage != Stage.launch:
        raise CheckpointMismatch("scenarios need a launch-time checkpoint")
    if checkpoint.context.phase != Phase.time_plus:
        logger.warning("time-only model ignores %s; every scenario prediction equals the baseline", spec.axis)
    baseline = resolve_baseline(spec, dataset.records)
    predictor = StagePredictor(checkpoint, dataset.records, dataset.funding)
    if not predictor.has_window(baseline.name):
        raise CheckpointMismatch(f"baseline '{baseline.name}' has fewer than {checkpoint.context.window_size - 1} predecessors")

    axis = str(spec.axis)
    hypotheticals = build_scenarios(spec, baseline)
    rows = []
    baseline_value = getattr(baseline, axis)
    if baseline_value not in [getattr(h, axis) for h in hypotheticals]:
        hypotheticals.insert(0, baseline)
    for hypothetical in hypotheticals:
        value = getattr(hypothetical, axis)
        extrapolated = _extrapolates(checkpoint, spec.axis, value)
        if extrapolated:
            logger.warning("scenario %s=%s lies outside the training data", axis, value)
        log2_lifetime = predictor.predict_record(hypothetical)
        rows.append(
            ScenarioRow(
                axis_value=value,
                pred_log2_lifetime=log2_lifetime,
                pred_lifetime_years=math.pow(2.0, log2_lifetime),
                extrapolation_flag=extrapolated,
                is_baseline=value == baseline_value,
            )
        )
    return ScenarioResult(name=spec.name, axis=axis, baseline=baseline.name, rows=rows)


def emit_plot_data(result: ScenarioResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([row.model_dump(include=set(SCENARIO_COLUMNS)) for row in result.rows], columns=SCENARIO_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path
