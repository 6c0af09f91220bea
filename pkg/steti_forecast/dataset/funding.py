"""
Parsers for funding.csv and deflator.csv.
"""
from pathlib import Path

from pydantic import ValidationError

from ..config import FUNDING_COLUMNS
from ..exceptions import InvariantViolation
from ..models import Deflator, FundingSeries
from .base_parser import BaseCsvParser


class FundingParser(BaseCsvParser):
    """Nominal yearly funding, one column per series."""

    required_columns = ("year", *FUNDING_COLUMNS)

    def parse_row(self, row_no: int, row: dict[str, str]) -> tuple[int, dict[str, float]]:
        year = self.parse_float(row_no, "year", row["year"])
        if year != int(year):
            raise InvariantViolation(row_no, f"year {year} is not an integer")
        values = {c: self.parse_float(row_no, c, row[c]) for c in FUNDING_COLUMNS}
        for column, value in values.items():
            if value < 0:
                raise InvariantViolation(row_no, f"{column} is negative")
        return int(year), values

    def parse_series(self) -> dict[str, FundingSeries]:
        table: dict[str, dict[int, float]] = {c: {} for c in FUNDING_COLUMNS}
        for row_no, (year, values) in enumerate(self.parse(), start=1):
            if year in table[FUNDING_COLUMNS[0]]:
                raise InvariantViolation(row_no, f"duplicate year {year}")
            for column, value in values.items():
                table[column][year] = value
        try:
            return {c: FundingSeries(name=c, values=table[c]) for c in FUNDING_COLUMNS}
        except ValidationError as e:
            raise InvariantViolation(0, str(e)) from e


class DeflatorParser(BaseCsvParser):
    required_columns = ("year", "index")

    def parse_row(self, row_no: int, row: dict[str, str]) -> tuple[int, float]:
        year = self.parse_float(row_no, "year", row["year"])
        if year != int(year):
            raise InvariantViolation(row_no, f"year {year} is not an integer")
        return int(year), self.parse_float(row_no, "index", row["index"])

    def parse_deflator(self, base_year: int | None = None) -> Deflator:
        values = dict(self.parse())
        if not values:
            raise InvariantViolation(0, "deflator is empty")
        try:
            return Deflator(values=values, base_year=max(values) if base_year is None else base_year)
        except ValidationError as e:
            raise InvariantViolation(0, str(e)) from e


def parse_funding(path: str | Path) -> dict[str, FundingSeries]:
    return FundingParser(path).parse_series()


def parse_deflator(path: str | Path, base_year: int | None = None) -> Deflator:
    """Reads deflator.csv; the base year defaults to the latest year in the file."""
    return DeflatorParser(path).parse_deflator(base_year)
