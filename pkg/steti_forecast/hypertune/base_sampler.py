"""
Base class for hyperparameter samplers.
"""
from abc import ABC, abstractmethod
from collections.abc import Sequence

import numpy as np
import optuna
from optuna.trial import TrialState, create_trial

from ..config import TrialStatus
from ..models import Trial
from .space import SearchSpace


class BaseSampler(ABC):
    """
    Abstract Base Class for samplers.
    Proposes the next point from the trial history; the proposal is a pure function
    of (space, history, rng state).
    """

    @abstractmethod
    def _create_engine(self, seed: int) -> optuna.samplers.BaseSampler:
        """
        Builds the optuna sampler that draws the proposal.

        Args:
            seed: Seed derived from the caller's generator.
        """

    def sample(self, space: SearchSpace, history: Sequence[Trial], rng: np.random.Generator):
        """
        Args:
            space: The search space.
            history: Trials so far; failed trials are passed on as failures.
            rng: Source of the sampler seed.

        Returns:
            HyperParams inside the space.
        """
        seed = int(rng.integers(2**31 - 1))
        study = optuna.create_study(direction="minimize", sampler=self._create_engine(seed))
        study.add_trials([self._frozen(space, t) for t in history])
        proposal = study.ask(fixed_distributions=space.distributions)
        return space.to_hyperparams(proposal.params)

    @staticmethod
    def _frozen(space: SearchSpace, trial: Trial) -> optuna.trial.FrozenTrial:
        complete = trial.status == TrialStatus.complete
        return create_trial(
            params=space.encode(trial.params),
            distributions=space.distributions,
            value=trial.objective if complete else None,
            state=TrialState.COMPLETE if complete else TrialState.FAIL,
        )

