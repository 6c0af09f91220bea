from .base_sampler import BaseSampler
from .samplers import RandomSampler, TPESampler, create_sampler
from .space import SearchSpace
from .study import Study, best_so_far, read_ledger, run_study, trial_seed

__all__ = [
    "BaseSampler",
    "RandomSampler",
    "SearchSpace",
    "Study",
    "TPESampler",
    "best_so_far",
    "create_sampler",
    "read_ledger",
    "run_study",
    "trial_seed",
]
