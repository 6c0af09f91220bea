"""
Synthetic censored cohorts drawn from a known lifetime trend, for tests and demos.
"""
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .config import EPOCH_YEAR, FUNDING_COLUMNS, PathsConfig
from .dataset import derive_lifetime_status, write_missions
from .models import Deflator, FundingSeries, MissionRecord, MooresLawParams, RawMission

logger = logging.getLogger(__name__)

DESTINATIONS = ("earth_orbit", "moon", "mars", "venus", "jupiter", "deep_space")
CONTACT_TYPES = ("flyby", "orbiter", "lander", "rover", "impactor")
COUNTRIES = ("usa", "ussr", "esa", "japan", "china", "india")
FUNDING_YEARS = (1930, 2024)


class SyntheticCohort(BaseModel):
    params: MooresLawParams
    cutoff: float
    records: list[MissionRecord]
    # nominal dollars; deflate with ``deflator`` to get constant dollars
    funding: dict[str, FundingSeries]
    deflator: Deflator

    def write(self, directory: str | Path) -> PathsConfig:
        """Writes missions.csv, funding.csv and deflator.csv."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = PathsConfig(
            missions=directory / "missions.csv",
            funding=directory / "funding.csv",
            deflator=directory / "deflator.csv",
            output_dir=directory / "out",
        )
        write_missions([r.model_copy(update={c: None for c in FUNDING_COLUMNS}) for r in self.records], paths.missions)
        years = sorted(self.funding[FUNDING_COLUMNS[0]].values)
        frame = pd.DataFrame({"year": years, **{c: [self.funding[c].values[y] for y in years] for c in FUNDING_COLUMNS}})
        frame.to_csv(paths.funding, index=False, float_format="%.17g")
        pd.DataFrame({"year": list(self.deflator.values), "index": list(self.deflator.values.values())}).to_csv(
            paths.deflator, index=False, float_format="%.17g"
        )
        return paths


def generate_funding(rng: np.random.Generator, years: tuple[int, int] = FUNDING_YEARS) -> dict[str, FundingSeries]:
    """
    Four positive nominal series sharing a common yearly shock. Apart from total_rd each
    has a shape of its own (a cycle, a random walk, a mid-sixties peak), so only total_rd
    is close to collinear with time.
    """
    span = np.arange(years[0], years[1] + 1)
    t = (span - span[0]).astype(np.float64)
    shock = rng.normal(0.0, 0.05, span.size)
    cycle = 0.6 * np.sin(2.0 * np.pi * t / 25.0)
    peak = 1.2 * np.exp(-(((span - 1966) / 5.0) ** 2))
    series = {
        "total_rd": 1000.0 * np.exp(0.05 * t + shock),
        "defense_rd": 500.0 * np.exp(0.02 * t + cycle + shock + rng.normal(0.0, 0.1, span.size)),
        "space_rd": 100.0 * np.exp(0.04 * t + np.cumsum(rng.normal(0.0, 0.15, span.size)) + shock),
        "nasa_budget": 80.0 * np.exp(0.03 * t + peak + shock + rng.normal(0.0, 0.05, span.size)),
    }
    return {
        name: FundingSeries(name=name, values={int(y): float(v) for y, v in zip(span, values)})
        for name, values in series.items()
    }


def generate_deflator(years: tuple[int, int] = FUNDING_YEARS, inflation: float = 0.03) -> Deflator:
    values = {y: float((1.0 + inflation) ** (y - years[0])) for y in range(years[0], years[1] + 1)}
    return Deflator(values=values, base_year=years[1])


def generate_cohort(
    n: int = 150,
    seed: int = 0,
    l_1959: float = 0.3,
    d: float = 12.0,
    sigma: float = 0.3,
    start: float = EPOCH_YEAR,
    stop: float = 2022.0,
    cutoff: float | None = None,
) -> SyntheticCohort:
    """
    Launch dates uniform on [start, stop), lifetimes from the launch curve with
    multiplicative lognormal noise, failures after the cutoff censored to active.
    Launch mass and the categorical labels are drawn independently of lifetime.
    """
    rng = np.random.default_rng(seed)
    cutoff = stop + 1.0 if cutoff is None else cutoff
    params = MooresLawParams(l_1959=l_1959, d=d, epoch=EPOCH_YEAR)
    launches = np.sort(rng.uniform(start, stop, n))
    lifetimes = l_1959 * np.exp2((launches - EPOCH_YEAR) / d) * np.exp(rng.normal(0.0, sigma, n))
    lifetimes = np.maximum(lifetimes, 1e-3)
    masses = np.exp(rng.normal(math.log(1000.0), 1.0, n))
    records = []
    for i in range(n):
        failure = float(launches[i] + lifetimes[i])
        raw = RawMission(
            name=f"craft-{i:03d}",
            launch_date=float(launches[i]),
            failure_date=failure,
            launch_mass=float(masses[i]),
            destination=str(rng.choice(DESTINATIONS)),
            contact_type=str(rng.choice(CONTACT_TYPES)),
            country=str(rng.choice(COUNTRIES)),
            row=i + 1,
        )
        records.append(derive_lifetime_status(raw, cutoff))
    logger.debug("synthetic cohort: %d records, %d censored", n, sum(not r.failed for r in records))
    return SyntheticCohort(
        params=params, cutoff=cutoff, records=records, funding=generate_funding(rng), deflator=generate_deflator()
    )
