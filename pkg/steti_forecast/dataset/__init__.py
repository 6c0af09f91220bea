"""
Ingestion of mission, funding and deflator CSVs.
"""
import logging
from pathlib import Path

from pydantic import BaseModel

from ..config import KeyDate, PathsConfig
from ..exceptions import InvariantViolation
from ..models import FundingSeries, MissionRecord
from .funding import parse_deflator, parse_funding
from .missions import decimal_year, parse_missions, write_missions
from .transforms import (
    censor_at,
    deflate,
    derive_lifetime_status,
    funding_value,
    join_funding,
    records_frame,
    sort_records,
    summarize,
)

logger = logging.getLogger(__name__)


class Dataset(BaseModel):
    """Validated missions plus constant-dollar funding series."""

    records: list[MissionRecord]
    funding: dict[str, FundingSeries]

    @property
    def failed(self) -> list[MissionRecord]:
        return [r for r in self.records if r.failed]

    @property
    def active(self) -> list[MissionRecord]:
        return [r for r in self.records if not r.failed]

    def record(self, name: str) -> MissionRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)


def load_dataset(
    paths: PathsConfig, observation_date: float | None = None, deflator_base_year: int | None = None
) -> Dataset:
    records = parse_missions(paths.missions, observation_date)
    funding = parse_funding(paths.funding)
    if paths.deflator is not None and Path(paths.deflator).exists():
        deflator = parse_deflator(paths.deflator, deflator_base_year)
        funding = {name: deflate(series, deflator) for name, series in funding.items()}
    else:
        logger.warning("no deflator given; funding is taken as already in constant dollars")
    records = join_funding(records, list(funding.values()), KeyDate.launch)
    seen: set[str] = set()
    for row_no, r in enumerate(records, start=1):
        if r.name in seen:
            raise InvariantViolation(row_no, f"duplicate mission name '{r.name}'")
        seen.add(r.name)
    logger.info(
        "loaded %d records (%d inactive, %d active)",
        len(records), sum(r.failed for r in records), sum(not r.failed for r in records),
    )
    return Dataset(records=records, funding=funding)


__all__ = [
    "Dataset",
    "load_dataset",
    "parse_missions",
    "parse_funding",
    "parse_deflator",
    "write_missions",
    "decimal_year",
    "derive_lifetime_status",
    "censor_at",
    "deflate",
    "funding_value",
    "join_funding",
    "sort_records",
    "records_frame",
    "summarize",
]
