"""
Base class for CSV parsers.
"""
import logging
import math
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

import pandas as pd

from ..exceptions import DatasetError, MissingColumn, UnparseableValue

logger = logging.getLogger(__name__)


class BaseCsvParser(ABC):
    """
    Abstract Base Class for the CSV inputs.
    Subclasses declare their schema and turn one row of text cells into a domain object.
    """

    required_columns: tuple[str, ...] = ()
    optional_columns: tuple[str, ...] = ()

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def read(self) -> pd.DataFrame:
        """Reads the file as text cells and checks the header against the schema."""
        try:
            frame = pd.read_csv(self.path, dtype=str, keep_default_na=False, encoding="utf-8")
        except FileNotFoundError as e:
            raise DatasetError(f"input file not found: {self.path}") from e
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise DatasetError(f"cannot read {self.path}: {e}") from e
        frame.columns = [c.strip() for c in frame.columns]
        for column in self.required_columns:
            if column not in frame.columns:
                raise MissingColumn(column, str(self.path))
        extra = set(frame.columns) - set(self.required_columns) - set(self.optional_columns)
        if extra:
            logger.warning("%s: ignoring unknown columns %s", self.path.name, sorted(extra))
        return frame

    def parse(self) -> list[Any]:
        frame = self.read()
        return [self.parse_row(i, row) for i, row in enumerate(frame.to_dict("records"), start=1)]

    @abstractmethod
    def parse_row(self, row_no: int, row: dict[str, str]) -> Any:
        """
        Converts one data row (1-based, header excluded) into a domain object.

        Raises:
            UnparseableValue: If a cell cannot be converted.
            InvariantViolation: If the converted row breaks a domain invariant.
        """

    @staticmethod
    def parse_float(row_no: int, column: str, text: str, optional: bool = False) -> float | None:
        text = text.strip()
        if not text:
            if optional:
                return None
            raise UnparseableValue(row_no, column, text)
        try:
            value = float(text)
        except ValueError as e:
            raise UnparseableValue(row_no, column, text) from e
        if not math.isfinite(value):
            raise UnparseableValue(row_no, column, text)
        return value
