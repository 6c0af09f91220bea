"""
The hyperparameter search space.
"""
from typing import Any

from optuna.distributions import BaseDistribution, CategoricalDistribution, FloatDistribution, IntDistribution

from ..config import Activation, HyperParams, Optimizer, Phase

ACTIVATIONS = [a.value for a in Activation]


class SearchSpace:
    """
    Distributions of the tunable knobs. The funding window only exists in the time-plus phase.
    """

    def __init__(self, phase: Phase = Phase.time_plus):
        self.phase = Phase(phase)
        self.distributions: dict[str, BaseDistribution] = {
            "learning_rate": FloatDistribution(1e-6, 1e-2, log=True),
            "optimizer": CategoricalDistribution([o.value for o in Optimizer]),
            "dropout_rate": FloatDistribution(0.0, 1.0),
            "recurrent_dropout_rate": FloatDistribution(0.0, 1.0),
            "lstm_activation": CategoricalDistribution(ACTIVATIONS),
            "output_activation": CategoricalDistribution(ACTIVATIONS),
            "bidirectional": CategoricalDistribution([False, True]),
            "window_size": IntDistribution(1, 10),
        }
        if self.phase == Phase.time_plus:
            self.distributions["window_size_funding"] = IntDistribution(1, 10)

    @property
    def names(self) -> list[str]:
        return list(self.distributions)

    def to_hyperparams(self, values: dict[str, Any]) -> HyperParams:
        values = dict(values)
        if self.phase == Phase.time_only:
            values["window_size_funding"] = None
        return HyperParams.model_validate(values)

    def encode(self, hyperparams: HyperParams) -> dict[str, Any]:
        """Values as the distributions hold them."""
        dumped = hyperparams.model_dump(mode="json")
        return {name: dumped[name] for name in self.names}

    def contains(self, hyperparams: HyperParams) -> bool:
        encoded = self.encode(hyperparams)
        for name, dist in self.distributions.items():
            value = encoded[name]
            if isinstance(dist, CategoricalDistribution):
                if value not in dist.choices:
                    return False
            elif value is None or not dist.low <= value <= dist.high:
                return False
        return True
