"""
Derivations over parsed records: lifetime/status, deflation, funding joins and summaries.
"""
import logging
import math

import pandas as pd
from pydantic import ValidationError

from ..config import CATEGORICAL_COLUMNS, FUNDING_COLUMNS, KeyDate, RecordStatus
from ..exceptions import FailureBeforeLaunch, InvariantViolation, MissingDeflatorYear, MissingFundingYear
from ..models import Deflator, FundingSeries, MissionRecord, RawMission

logger = logging.getLogger(__name__)


def derive_lifetime_status(record: RawMission | MissionRecord, observation_date: float | None = None) -> MissionRecord:
    """
    Derives lifetime and status for one record.

    Failed records get lifetime = failure_date - launch_date. Records still running at
    observation_date (no failure, or a failure after it) are active and carry their age.

    Raises:
        FailureBeforeLaunch: If the failure date precedes the launch date.
        InvariantViolation: If the derived record breaks a record invariant.
    """
    if observation_date is not None and record.launch_date > observation_date:
        raise InvariantViolation(getattr(record, "row", 0), f"{record.name} launched after the observation date")
    failure = record.failure_date
    if failure is not None and failure < record.launch_date:
        raise FailureBeforeLaunch(record.name, record.launch_date, failure)
    if failure is not None and observation_date is not None and failure > observation_date:
        failure = None
    fields = {
        "name": record.name,
        "launch_date": record.launch_date,
        "launch_mass": record.launch_mass,
        **{c: getattr(record, c) for c in CATEGORICAL_COLUMNS},
        **{c: getattr(record, c) for c in FUNDING_COLUMNS},
    }
    if failure is not None:
        fields.update(failure_date=failure, lifetime=failure - record.launch_date, status=RecordStatus.inactive)
    else:
        age = None if observation_date is None else observation_date - record.launch_date
        fields.update(status=RecordStatus.active, age=age)
    try:
        return MissionRecord(**fields)
    except ValidationError as e:
        reason = "; ".join(err["msg"] for err in e.errors())
        raise InvariantViolation(getattr(record, "row", 0), f"{record.name}: {reason}") from e


def censor_at(records: list[MissionRecord], observation_date: float) -> list[MissionRecord]:
    """The dataset as it looked at observation_date: later launches dropped, later failures censored."""
    return [derive_lifetime_status(r, observation_date) for r in records if r.launch_date <= observation_date]


def deflate(series: FundingSeries, deflator: Deflator) -> FundingSeries:
    """value_constant(y) = value_nominal(y) * index(base_year) / index(y)"""
    base = deflator.values[deflator.base_year]
    values = {}
    for year, value in series.values.items():
        if year not in deflator.values:
            raise MissingDeflatorYear(year)
        values[year] = value * base / deflator.values[year]
    return FundingSeries(name=series.name, values=values)


def funding_value(series: FundingSeries, year: int) -> float:
    try:
        return series.values[year]
    except KeyError:
        raise MissingFundingYear(year, series.name) from None


def join_funding(
    missions: list[MissionRecord], series: list[FundingSeries], key_date: KeyDate = KeyDate.launch
) -> list[MissionRecord]:
    """
    Populates each record's funding fields from the floor year of its key date.
    Active records have no failure year and are returned unchanged when joining on failure.
    """
    joined = []
    for record in missions:
        if key_date == KeyDate.failure and record.failure_date is None:
            joined.append(record)
            continue
        year = math.floor(record.key_date(key_date))
        joined.append(record.model_copy(update={s.name: funding_value(s, year) for s in series}))
    return joined


def sort_records(records: list[MissionRecord], key_date: KeyDate = KeyDate.launch) -> list[MissionRecord]:
    """Stable chronological order by key date, ties broken by launch date then name."""
    if key_date == KeyDate.failure:
        return sorted(records, key=lambda r: (r.failure_date, r.launch_date, r.name))
    return sorted(records, key=lambda r: (r.launch_date, math.inf if r.failure_date is None else r.failure_date, r.name))


def records_frame(records: list[MissionRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump(mode="json") for r in records])


def summarize(records: list[MissionRecord]) -> pd.DataFrame:
    """One row per attribute: dtype and value range (numeric) or distinct values (labels)."""
    frame = records_frame(records)
    columns = [
        "launch_date", "failure_date", "lifetime", "status", "launch_mass",
        *CATEGORICAL_COLUMNS, *FUNDING_COLUMNS,
    ]
    rows = []
    for column in columns:
        values = frame[column].dropna() if column in frame else pd.Series(dtype=object)
        if column in ("status", *CATEGORICAL_COLUMNS):
            rows.append({"attribute": column, "dtype": "object", "values": "|".join(dict.fromkeys(values.astype(str)))})
        elif values.empty:
            rows.append({"attribute": column, "dtype": "float64", "values": ""})
        else:
            numeric = values.astype(float)
            rows.append({"attribute": column, "dtype": "float64", "values": f"{numeric.min():.3f} - {numeric.max():.3f}"})
    return pd.DataFrame(rows, columns=["attribute", "dtype", "values"])
