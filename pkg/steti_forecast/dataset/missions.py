"""
Parser and writer for missions.csv.
"""
import calendar
import datetime as dt
from pathlib import Path

import pandas as pd

from ..config import CATEGORICAL_COLUMNS, FUNDING_COLUMNS, UNKNOWN_LABEL
from ..exceptions import DatasetError, InvariantViolation, UnparseableValue
from ..models import MissionRecord, RawMission
from .base_parser import BaseCsvParser
from .transforms import derive_lifetime_status

MISSION_COLUMNS = ("name", "launch_date", "failure_date", "launch_mass", *CATEGORICAL_COLUMNS)


def decimal_year(day: dt.date) -> float:
    """year + (day_of_year - 1) / days_in_year"""
    days = 366 if calendar.isleap(day.year) else 365
    return day.year + (day.timetuple().tm_yday - 1) / days


class MissionParser(BaseCsvParser):
    required_columns = MISSION_COLUMNS
    optional_columns = FUNDING_COLUMNS

    def parse_date(self, row_no: int, column: str, text: str) -> float | None:
        text = text.strip()
        if not text:
            return None
        try:
            return decimal_year(dt.date.fromisoformat(text))
        except ValueError:
            pass
        return self.parse_float(row_no, column, text)

    def parse_row(self, row_no: int, row: dict[str, str]) -> RawMission:
        name = row["name"].strip()
        if not name:
            raise InvariantViolation(row_no, "empty mission name")
        launch_date = self.parse_date(row_no, "launch_date", row["launch_date"])
        if launch_date is None:
            raise UnparseableValue(row_no, "launch_date", row["launch_date"])
        labels = {c: (row[c].strip() or UNKNOWN_LABEL) for c in CATEGORICAL_COLUMNS}
        funding = {c: self.parse_float(row_no, c, row.get(c, ""), optional=True) for c in FUNDING_COLUMNS}
        return RawMission(
            name=name,
            launch_date=launch_date,
            failure_date=self.parse_date(row_no, "failure_date", row["failure_date"]),
            launch_mass=self.parse_float(row_no, "launch_mass", row["launch_mass"]),
            row=row_no,
            **labels,
            **funding,
        )


def parse_missions(path: str | Path, observation_date: float | None = None) -> list[MissionRecord]:
    """
    Reads missions.csv into validated records, deriving lifetime and status.

    Args:
        path: CSV with columns name, launch_date, failure_date, launch_mass,
              destination, contact_type, country (funding columns optional).
        observation_date: Censoring cutoff; failures after it are treated as active.

    Raises:
        MissingColumn, UnparseableValue, InvariantViolation
    """
    records = []
    for raw in MissionParser(path).parse():
        try:
            records.append(derive_lifetime_status(raw, observation_date))
        except DatasetError as e:
            if isinstance(e, InvariantViolation):
                raise
            raise InvariantViolation(raw.row, str(e)) from e
    return records


def write_missions(records: list[MissionRecord], path: str | Path) -> None:
    """Writes records in the missions.csv schema (decimal years, funding columns when joined)."""
    rows = []
    for r in records:
        row = {
            "name": r.name,
            "launch_date": r.launch_date,
            "failure_date": r.failure_date,
            "launch_mass": r.launch_mass,
            "destination": r.destination,
            "contact_type": r.contact_type,
            "country": r.country,
        }
        row.update({c: getattr(r, c) for c in FUNDING_COLUMNS})
        rows.append(row)
    frame = pd.DataFrame(rows, columns=[*MISSION_COLUMNS, *FUNDING_COLUMNS])
    frame.to_csv(path, index=False, encoding="utf-8", float_format="%.17g")
