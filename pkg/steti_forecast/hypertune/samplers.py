"""
Concrete samplers: tree-structured Parzen estimator and uniform random search.
"""
import functools
import math

import optuna

from ..config import SamplerKind, TuneConfig
from .base_sampler import BaseSampler

# optuna announces every in-memory study at INFO
optuna.logging.set_verbosity(optuna.logging.WARNING)


def _good_fraction(gamma: float, n: int) -> int:
    return math.ceil(gamma * n)


class _QuantileTPE(optuna.samplers.TPESampler):
    """optuna's TPE with the good/bad split at a fixed quantile of the finished trials."""

    def __init__(self, gamma: float, **kwargs):
        super().__init__(**kwargs)
        # newer optuna deprecates the gamma keyword
        self._gamma = functools.partial(_good_fraction, gamma)


class TPESampler(BaseSampler):
    """
    Independent per-dimension TPE: history split at the gamma quantile into good and bad
    trials, n_candidates draws from the good density, the best l(x)/g(x) ratio wins.
    The first n_startup proposals are prior draws.
    """

    def __init__(self, n_startup: int = 10, n_candidates: int = 24, gamma: float = 0.25):
        self.n_startup = n_startup
        self.n_candidates = n_candidates
        self.gamma = gamma

    def _create_engine(self, seed: int) -> optuna.samplers.BaseSampler:
        return _QuantileTPE(
            self.gamma, n_startup_trials=self.n_startup, n_ei_candidates=self.n_candidates, seed=seed
        )


class RandomSampler(BaseSampler):
    """Prior draws only."""

    def _create_engine(self, seed: int) -> optuna.samplers.BaseSampler:
        return optuna.samplers.RandomSampler(seed=seed)


_sampler_registry: dict[SamplerKind, type[BaseSampler]] = {
    SamplerKind.tpe: TPESampler,
    SamplerKind.random: RandomSampler,
}


def create_sampler(config: TuneConfig) -> BaseSampler:
    sampler_class = _sampler_registry.get(config.sampler)
    if sampler_class is None:
        raise ValueError(f"Unsupported sampler: {config.sampler}")
    if sampler_class is TPESampler:
        return TPESampler(config.n_startup, config.n_candidates, config.gamma)
    return sampler_class()
