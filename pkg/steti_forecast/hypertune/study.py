"""
Sequential study loop with an append-only, resumable CSV ledger.
"""
import logging
import math
import time
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from ..config import HyperParams, TrialStatus
from ..exceptions import AllTrialsFailed, StetiError, TuningError
from ..models import Trial
from .base_sampler import BaseSampler
from .samplers import TPESampler
from .space import SearchSpace

logger = logging.getLogger(__name__)

Objective = Callable[[HyperParams], float]


def ledger_columns(space: SearchSpace) -> list[str]:
    return ["trial_id", *space.names, "objective", "status", "seed", "seconds"]


def append_ledger(path: Path, trial: Trial, space: SearchSpace) -> None:
    row = {"trial_id": trial.trial_id, **space.encode(trial.params)}
    row.update(
        objective=np.nan if trial.objective is None else trial.objective,
        status=str(trial.status),
        seed=trial.seed,
        seconds=trial.seconds,
    )
    frame = pd.DataFrame([row], columns=ledger_columns(space))
    frame.to_csv(path, mode="a", header=not path.exists(), index=False, encoding="utf-8")


def read_ledger(path: Path, space: SearchSpace) -> list[Trial]:
    frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    if list(frame.columns) != ledger_columns(space):
        raise TuningError(f"ledger {path} has columns {list(frame.columns)}, expected {ledger_columns(space)}")
    trials = []
    for row in frame.to_dict(orient="records"):
        params = {name: row[name] for name in space.names}
        params["bidirectional"] = str(params["bidirectional"]) == "True"
        for name in ("window_size", "window_size_funding"):
            if name in params:
                params[name] = int(params[name])
        objective = None if pd.isna(row["objective"]) else float(row["objective"])
        trials.append(
            Trial(
                trial_id=int(row["trial_id"]),
                params=space.to_hyperparams(params),
                objective=objective,
                status=TrialStatus(row["status"]),
                seed=int(row["seed"]),
                seconds=float(row["seconds"]),
            )
        )
    return trials


def trial_seed(seed: int, trial_id: int) -> int:
    """Seed recorded for one trial of a study rooted at ``seed``."""
    return int(np.random.SeedSequence(seed, spawn_key=(trial_id,)).generate_state(1)[0])


def best_so_far(trials: Sequence[Trial]) -> list[float]:
    """Running minimum of the completed objectives, in ledger order."""
    best, curve = math.inf, []
    for trial in trials:
        if trial.status == TrialStatus.complete:
            best = min(best, trial.objective)
        curve.append(best)
    return curve


class Study:
    """
    Proposes, evaluates and records trials one at a time. Trial k draws its proposal from
    a generator seeded by (seed, k), so a resumed study continues exactly as an
    uninterrupted one would.
    """

    def __init__(
        self,
        space: SearchSpace,
        sampler: BaseSampler | None = None,
        seed: int = 0,
        ledger_path: str | Path | None = None,
    ):
        self.space = space
        self.sampler = sampler or TPESampler()
        self.seed = seed
        self.ledger_path = Path(ledger_path) if ledger_path is not None else None
        self.trials: list[Trial] = []
        if self.ledger_path is not None and self.ledger_path.exists():
            self.trials = read_ledger(self.ledger_path, space)
            logger.info("resuming study from %s with %d trials", self.ledger_path, len(self.trials))

    @property
    def best(self) -> Trial:
        best = None
        for trial in self.trials:
            if trial.status == TrialStatus.complete and (best is None or trial.objective < best.objective):
                best = trial
        if best is None:
            raise AllTrialsFailed(len(self.trials))
        return best

    def _evaluate(self, objective: Objective, params: HyperParams, trial_id: int) -> Trial:
        start = time.perf_counter()
        try:
            value = float(objective(params))
        except (StetiError, ArithmeticError, ValueError) as e:
            logger.warning("trial %d failed: %s", trial_id, e)
            value = math.nan
        seconds = time.perf_counter() - start
        seed = trial_seed(self.seed, trial_id)
        if math.isfinite(value):
            return Trial(trial_id=trial_id, params=params, objective=value, seed=seed, seconds=seconds)
        return Trial(trial_id=trial_id, params=params, status=TrialStatus.failed, seed=seed, seconds=seconds)

    def run(self, objective: Objective, max_trials: int) -> tuple[Trial, list[Trial]]:
        """
        Runs trials until the study holds max_trials entries. A resumed ledger with more
        entries is cut back to its first max_trials; the file itself is left as it is.

        Returns:
            The best completed trial and the ledger.

        Raises:
            AllTrialsFailed: If no trial completed.
        """
        if self.ledger_path is not None:
            self.ledger_path.parent.mkdir(parents=True, exist_ok=True)
        if len(self.trials) > max_trials:
            logger.info("ledger holds %d trials, keeping the first %d", len(self.trials), max_trials)
            self.trials = self.trials[:max_trials]
        for trial_id in range(len(self.trials), max_trials):
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(trial_id,)))
            params = self.sampler.sample(self.space, self.trials, rng)
            trial = self._evaluate(objective, params, trial_id)
            self.trials.append(trial)
            if self.ledger_path is not None:
                append_ledger(self.ledger_path, trial, self.space)
            logger.debug("trial %d: %s -> %s", trial_id, trial.status, trial.objective)
        best = self.best
        logger.info("best of %d trials: #%d with objective %.6g", len(self.trials), best.trial_id, best.objective)
        return best, list(self.trials)


def run_study(
    objective: Objective,
    space: SearchSpace,
    max_trials: int,
    seed: int = 0,
    sampler: BaseSampler | None = None,
    ledger_path: str | Path | None = None,
) -> tuple[Trial, list[Trial]]:
    return Study(space, sampler, seed, ledger_path).run(objective, max_trials)
