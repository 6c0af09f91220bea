"""
Model-ready tensors from validated records: scaling, log2 targets, sliding windows,
categorical encoding and chronological splits.
"""
import logging
import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field

from .config import CATEGORICAL_COLUMNS, FUNDING_COLUMNS, UNKNOWN_LABEL, HyperParams, KeyDate, Phase, Stage
from .dataset.transforms import funding_value, sort_records
from .exceptions import EmptyPartition, FeatureError, NonPositiveLifetime, SequenceTooShort
from .models import FundingSeries, MissionRecord

logger = logging.getLogger(__name__)

T = TypeVar("T")


# -- scaling -----------------------------------------------------------------


class ScalerParams(BaseModel):
    """Per-feature min/max in source units."""

    model_config = ConfigDict(frozen=True)

    minimum: dict[str, float]
    maximum: dict[str, float]

    @property
    def features(self) -> list[str]:
        return list(self.minimum)

    def scale(self, feature: str, values: Any) -> np.ndarray:
        lo, hi = self.minimum[feature], self.maximum[feature]
        values = np.asarray(values, dtype=np.float64)
        if hi == lo:
            return np.zeros_like(values)
        return (values - lo) / (hi - lo)

    def unscale(self, feature: str, values: Any) -> np.ndarray:
        lo, hi = self.minimum[feature], self.maximum[feature]
        return np.asarray(values, dtype=np.float64) * (hi - lo) + lo

    def in_range(self, feature: str, value: float) -> bool:
        return self.minimum[feature] <= value <= self.maximum[feature]


def fit_scaler(train: pd.DataFrame | Mapping[str, Sequence[float]], features: Sequence[str]) -> ScalerParams:
    """
    Min-max parameters from the training rows only.
    A constant feature scales to 0.0 everywhere and is reported.
    """
    minimum, maximum = {}, {}
    for feature in features:
        values = np.asarray(train[feature], dtype=np.float64)
        values = values[~np.isnan(values)]
        if values.size == 0:
            raise FeatureError(f"cannot fit scaler: no training values for '{feature}'")
        minimum[feature], maximum[feature] = float(values.min()), float(values.max())
        if minimum[feature] == maximum[feature]:
            logger.warning("constant feature '%s' (%s) maps to 0.0", feature, minimum[feature])
    return ScalerParams(minimum=minimum, maximum=maximum)


def apply_scaler(params: ScalerParams, frame: pd.DataFrame) -> pd.DataFrame:
    """Scaled copy of frame; values outside the training range are not clamped."""
    scaled = frame.copy()
    for feature in params.features:
        scaled[feature] = params.scale(feature, frame[feature])
    return scaled


def feature_frame(records: Sequence[MissionRecord]) -> pd.DataFrame:
    """Numeric model features of each record, including log2_lifetime for failed records."""
    return pd.DataFrame(
        {
            "launch_date": [r.launch_date for r in records],
            "failure_date": [np.nan if r.failure_date is None else r.failure_date for r in records],
            "log2_lifetime": [np.nan if r.lifetime is None else math.log2(r.lifetime) for r in records],
            "launch_mass": [r.launch_mass for r in records],
        }
    )


# -- targets -----------------------------------------------------------------


def log2_target(lifetime: float | np.ndarray) -> float | np.ndarray:
    values = np.asarray(lifetime, dtype=np.float64)
    if np.any(~(values > 0.0)):
        bad = float(values.flat[np.argmax(~(values > 0.0))])
        raise NonPositiveLifetime(bad)
    result = np.log2(values)
    return float(result) if result.ndim == 0 else result


def inverse_log2_target(value: float | np.ndarray) -> float | np.ndarray:
    result = np.exp2(np.asarray(value, dtype=np.float64))
    return float(result) if result.ndim == 0 else result


# -- windows, categories, splits ---------------------------------------------


def make_windows(sequence: Sequence[Any] | np.ndarray, n: int) -> np.ndarray:
    """
    Stride-1 windows over the leading axis: N - n + 1 windows, window j covering j..j+n-1.

    Returns an array of shape (N - n + 1, n, *item_shape).
    """
    if n < 1:
        raise FeatureError(f"window size must be at least 1, got {n}")
    values = np.asarray(sequence)
    if len(values) < n:
        raise SequenceTooShort(len(values), n)
    view = sliding_window_view(values, n, axis=0)
    return np.moveaxis(view, -1, 1).copy()


class Vocabulary(BaseModel):
    """Label -> index per categorical feature; index 0 is reserved for unknown labels."""

    model_config = ConfigDict(frozen=True)

    indices: dict[str, dict[str, int]]

    def size(self, feature: str) -> int:
        """Embedding rows, reserved index included."""
        return len(self.indices[feature]) + 1

    def categories(self, feature: str) -> int:
        return len(self.indices[feature])

    def encode(self, feature: str, label: str) -> int:
        index = self.indices[feature].get(label, 0)
        if index == 0 and label != UNKNOWN_LABEL:
            logger.warning("unseen %s label '%s' maps to the reserved index", feature, label)
        return index

    def known(self, feature: str, label: str) -> bool:
        return label in self.indices[feature]


def encode_categoricals(
    records: Sequence[MissionRecord], features: Sequence[str] = CATEGORICAL_COLUMNS
) -> tuple[Vocabulary, np.ndarray]:
    """Sorted labels get indices 1..K; returns the vocabulary and an (N, features) index matrix."""
    indices = {}
    for feature in features:
        labels = sorted({getattr(r, feature) for r in records} - {UNKNOWN_LABEL})
        indices[feature] = {label: i for i, label in enumerate(labels, start=1)}
    vocab = Vocabulary(indices=indices)
    encoded = np.array(
        [[vocab.encode(f, getattr(r, f)) for f in features] for r in records], dtype=np.int64
    ).reshape(len(records), len(features))
    return vocab, encoded


class SplitSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    outer_ratio: float
    train: int
    val: int
    test: int

    @property
    def total(self) -> int:
        return self.train + self.val + self.test


def time_split(
    items: Sequence[T], outer_ratio: float, dates: Sequence[float] | None = None
) -> tuple[SplitSpec, list[T], list[T], list[T]]:
    """
    Chronological train/validation/test split: outer cut at floor(ratio * N),
    inner cut of the first part at floor(ratio * M).
    """
    if dates is not None and any(b < a for a, b in zip(dates, dates[1:])):
        raise FeatureError("time_split needs items sorted by their key date")
    n = len(items)
    outer = math.floor(outer_ratio * n)
    inner = math.floor(outer_ratio * outer)
    spec = SplitSpec(outer_ratio=outer_ratio, train=inner, val=outer - inner, test=n - outer)
    if min(spec.train, spec.val, spec.test) == 0:
        raise EmptyPartition((spec.train, spec.val, spec.test))
    items = list(items)
    return spec, items[:inner], items[inner:outer], items[outer:]


def moving_average(series: Sequence[float], window: int) -> np.ndarray:
    """Centered moving average whose window shrinks symmetrically near the ends."""
    values = np.asarray(series, dtype=np.float64)
    half = (window - 1) // 2
    n = len(values)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    out = np.empty(n)
    for i in range(n):
        r = min(half, i, n - 1 - i)
        out[i] = (csum[i + r + 1] - csum[i - r]) / (2 * r + 1)
    return out


# -- examples ----------------------------------------------------------------


class WindowedExample(BaseModel):
    """One training instance."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    key_date: float
    seq_main: np.ndarray
    seq_funding: np.ndarray | None = None
    static_categoricals: np.ndarray | None = None
    static_mass: float | None = None
    target: float


class ExampleSet(BaseModel):
    """A batch of windowed examples, stacked along the leading axis."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    names: list[str]
    key_dates: np.ndarray
    seq_main: np.ndarray
    seq_funding: np.ndarray | None = None
    categoricals: np.ndarray | None = None
    mass: np.ndarray | None = None
    target: np.ndarray

    def __len__(self) -> int:
        return len(self.names)

    def subset(self, idx: Sequence[int] | np.ndarray) -> "ExampleSet":
        idx = np.asarray(idx, dtype=np.int64)
        return ExampleSet(
            names=[self.names[i] for i in idx],
            key_dates=self.key_dates[idx],
            seq_main=self.seq_main[idx],
            seq_funding=None if self.seq_funding is None else self.seq_funding[idx],
            categoricals=None if self.categoricals is None else self.categoricals[idx],
            mass=None if self.mass is None else self.mass[idx],
            target=self.target[idx],
        )

    def with_targets(self, target: np.ndarray) -> "ExampleSet":
        return self.model_copy(update={"target": np.asarray(target, dtype=np.float64)})

    def example(self, i: int) -> WindowedExample:
        return WindowedExample(
            name=self.names[i],
            key_date=float(self.key_dates[i]),
            seq_main=self.seq_main[i],
            seq_funding=None if self.seq_funding is None else self.seq_funding[i],
            static_categoricals=None if self.categoricals is None else self.categoricals[i],
            static_mass=None if self.mass is None else float(self.mass[i, 0]),
            target=float(self.target[i]),
        )

    @classmethod
    def from_examples(cls, examples: Sequence[WindowedExample]) -> "ExampleSet":
        first = examples[0]
        return cls(
            names=[e.name for e in examples],
            key_dates=np.array([e.key_date for e in examples]),
            seq_main=np.stack([e.seq_main for e in examples]),
            seq_funding=None if first.seq_funding is None else np.stack([e.seq_funding for e in examples]),
            categoricals=None
            if first.static_categoricals is None
            else np.stack([e.static_categoricals for e in examples]),
            mass=None if first.static_mass is None else np.array([[e.static_mass] for e in examples]),
            target=np.array([e.target for e in examples]),
        )


MAIN_CHANNELS = {
    Stage.failure: ("failure_date", "log2_lifetime"),
    Stage.launch: ("launch_date",),
}


class FeatureContext(BaseModel):
    """Every fitted preprocessing choice needed to rebuild examples at inference time."""

    model_config = ConfigDict(frozen=True)

    stage: Stage
    phase: Phase
    window_size: int
    window_size_funding: int | None = None
    scaler: ScalerParams
    funding_scaler: ScalerParams | None = None
    vocabulary: Vocabulary | None = None
    mask_target_lifetime: bool = False

    @property
    def channels(self) -> tuple[str, ...]:
        return MAIN_CHANNELS[self.stage]

    @property
    def static_inputs(self) -> bool:
        return self.phase == Phase.time_plus

    def key_date(self, record: MissionRecord) -> float:
        return record.failure_date if self.stage == Stage.failure else record.launch_date


def stage_order(records: Sequence[MissionRecord], stage: Stage) -> list[MissionRecord]:
    """Failure stage: failed records by failure date. Launch stage: every record by launch date."""
    if stage == Stage.failure:
        return sort_records([r for r in records if r.failed], KeyDate.failure)
    return sort_records(list(records), KeyDate.launch)


def fit_context(
    prefix: Sequence[MissionRecord],
    funding: Mapping[str, FundingSeries],
    stage: Stage,
    phase: Phase,
    hyperparams: HyperParams,
    vocabulary: Vocabulary | None = None,
    mask_target_lifetime: bool = False,
) -> FeatureContext:
    """Fits scalers on the chronological prefix that ends at the last training target."""
    frame = feature_frame(prefix)
    channels = MAIN_CHANNELS[stage]
    static = phase == Phase.time_plus
    scaler = fit_scaler(frame, [*channels, "launch_mass"] if static else list(channels))
    funding_scaler = None
    if static:
        last_year = math.floor(max(r.failure_date if stage == Stage.failure else r.launch_date for r in prefix))
        table = {
            name: [v for year, v in series.values.items() if year <= last_year] for name, series in funding.items()
        }
        funding_scaler = fit_scaler(table, FUNDING_COLUMNS)
        if vocabulary is None:
            vocabulary, _ = encode_categoricals(prefix)
    return FeatureContext(
        stage=stage,
        phase=phase,
        window_size=hyperparams.window_size,
        window_size_funding=(hyperparams.window_size_funding or 1) if static else None,
        scaler=scaler,
        funding_scaler=funding_scaler,
        vocabulary=vocabulary if static else None,
        mask_target_lifetime=mask_target_lifetime and stage == Stage.failure,
    )


def build_examples(
    ordered: Sequence[MissionRecord],
    funding: Mapping[str, FundingSeries],
    context: FeatureContext,
    indices: Sequence[int],
    targets: Mapping[str, float] | None = None,
) -> ExampleSet:
    """
    Windowed examples for the records at the given positions of the ordered sequence.
    Each window ends at its owner record; targets default to the observed log2 lifetime,
    and are NaN for records without one (inference only).
    """
    n = context.window_size
    frame = feature_frame(ordered)
    main = np.column_stack([context.scaler.scale(c, frame[c]) for c in context.channels])
    names, key_dates, seqs, fund_seqs, cats, masses, ys = [], [], [], [], [], [], []
    for k in indices:
        if k < n - 1 or k >= len(ordered):
            raise SequenceTooShort(k + 1, n)
        record = ordered[k]
        window = main[k - n + 1 : k + 1].copy()
        if context.mask_target_lifetime:
            window[-1, context.channels.index("log2_lifetime")] = 0.0
        seqs.append(window)
        names.append(record.name)
        key_dates.append(context.key_date(record))
        if targets is not None:
            ys.append(targets.get(record.name, np.nan))
        else:
            ys.append(math.log2(record.lifetime) if record.lifetime is not None else np.nan)
        if context.static_inputs:
            fund_seqs.append(funding_window(record, funding, context))
            cats.append([context.vocabulary.encode(f, getattr(record, f)) for f in CATEGORICAL_COLUMNS])
            masses.append([float(context.scaler.scale("launch_mass", record.launch_mass))])
    width = len(context.channels)
    return ExampleSet(
        names=names,
        key_dates=np.array(key_dates, dtype=np.float64),
        seq_main=np.array(seqs, dtype=np.float64).reshape(len(names), n, width),
        seq_funding=np.array(fund_seqs, dtype=np.float64).reshape(len(names), context.window_size_funding, 4)
        if context.static_inputs
        else None,
        categoricals=np.array(cats, dtype=np.int64).reshape(len(names), len(CATEGORICAL_COLUMNS))
        if context.static_inputs
        else None,
        mass=np.array(masses, dtype=np.float64).reshape(len(names), 1) if context.static_inputs else None,
        target=np.array(ys, dtype=np.float64),
    )


def funding_window(record: MissionRecord, funding: Mapping[str, FundingSeries], context: FeatureContext) -> np.ndarray:
    """Scaled yearly funding for the window_size_funding years ending at the key-date year."""
    last = math.floor(context.key_date(record))
    years = range(last - context.window_size_funding + 1, last + 1)
    return np.array(
        [
            [float(context.funding_scaler.scale(c, funding_value(funding[c], year))) for c in FUNDING_COLUMNS]
            for year in years
        ]
    )


class StageData(BaseModel):
    """Train/validation/test examples of one stage for one split ratio and window configuration."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    context: FeatureContext
    split: SplitSpec
    train: ExampleSet
    val: ExampleSet
    test: ExampleSet
    ordered: list[MissionRecord] = Field(repr=False)
    eligible: list[int]

    def all_examples(self, funding: Mapping[str, FundingSeries], targets: Mapping[str, float] | None = None):
        return build_examples(self.ordered, funding, self.context, self.eligible, targets)


def prepare_stage(
    records: Sequence[MissionRecord],
    funding: Mapping[str, FundingSeries],
    stage: Stage,
    phase: Phase,
    hyperparams: HyperParams,
    outer_ratio: float,
    targets: Mapping[str, float] | None = None,
    vocabulary: Vocabulary | None = None,
    mask_target_lifetime: bool = False,
) -> StageData:
    """
    Orders the stage's records, keeps the positions that own a full window (and a target),
    splits them chronologically and fits preprocessing on the training prefix.
    """
    ordered = stage_order(records, stage)
    n = hyperparams.window_size
    if len(ordered) < n:
        raise SequenceTooShort(len(ordered), n)
    eligible = [
        k for k in range(n - 1, len(ordered)) if targets is None or ordered[k].name in targets
    ]
    split, train_idx, val_idx, test_idx = time_split(eligible, outer_ratio)
    prefix = ordered[: train_idx[-1] + 1]
    context = fit_context(prefix, funding, stage, phase, hyperparams, vocabulary, mask_target_lifetime)
    return StageData(
        context=context,
        split=split,
        train=build_examples(ordered, funding, context, train_idx, targets),
        val=build_examples(ordered, funding, context, val_idx, targets),
        test=build_examples(ordered, funding, context, test_idx, targets),
        ordered=ordered,
        eligible=eligible,
    )


def export_examples_csv(examples: ExampleSet, path: str | Path) -> None:
    """
    One row per example: name, key_date, target, main_t{step}_c{channel},
    funding_t{step}_{series}, the categorical indices and the scaled mass.
    """
    columns: dict[str, Any] = {"name": examples.names, "key_date": examples.key_dates, "target": examples.target}
    _, steps, width = examples.seq_main.shape
    for t in range(steps):
        for c in range(width):
            columns[f"main_t{t}_c{c}"] = examples.seq_main[:, t, c]
    if examples.seq_funding is not None:
        for t in range(examples.seq_funding.shape[1]):
            for c, series in enumerate(FUNDING_COLUMNS):
                columns[f"funding_t{t}_{series}"] = examples.seq_funding[:, t, c]
    if examples.categoricals is not None:
        for c, feature in enumerate(CATEGORICAL_COLUMNS):
            columns[feature] = examples.categoricals[:, c]
    if examples.mass is not None:
        columns["launch_mass"] = examples.mass[:, 0]
    pd.DataFrame(columns).to_csv(path, index=False, encoding="utf-8", float_format="%.17g")
