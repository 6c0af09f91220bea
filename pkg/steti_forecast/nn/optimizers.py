"""
Gradient-descent optimizers. Hyperparameter defaults follow the Keras implementations.
"""
from abc import ABC, abstractmethod
from collections.abc import Mapping

import numpy as np

from ..config import Optimizer
from .model import NON_TRAINABLE, ModelParams


class BaseOptimizer(ABC):
    """
    Abstract Base Class for optimizers.
    Keeps per-parameter state between steps; ``step`` returns new arrays and leaves
    its inputs untouched.
    """

    def __init__(self, learning_rate: float, epsilon: float = 1e-7):
        """
        Args:
            learning_rate: Step size.
            epsilon: Numerical floor inside square roots.
        """
        if not learning_rate > 0.0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        self.learning_rate = learning_rate
        self.epsilon = epsilon
        self.iterations = 0
        self.state: dict[str, dict[str, np.ndarray]] = {}

    def step(self, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> ModelParams:
        """
        Applies one update to every parameter that has a gradient.

        Args:
            params: Current parameters.
            grads: Gradients keyed like params; missing keys are left unchanged.

        Returns:
            The updated parameters.
        """
        self.iterations += 1
        updated = dict(params)
        for name, grad in grads.items():
            if name in NON_TRAINABLE:
                continue
            slots = self.state.setdefault(name, self._init_slots(params[name]))
            updated[name] = params[name] - self._delta(grad, slots)
        return updated

    @abstractmethod
    def _init_slots(self, value: np.ndarray) -> dict[str, np.ndarray]:
        """Fresh optimizer state for one parameter."""

    @abstractmethod
    def _delta(self, grad: np.ndarray, slots: dict[str, np.ndarray]) -> np.ndarray:
        """
        The amount subtracted from the parameter. Updates slots in place.

        Args:
            grad: Gradient of the loss with respect to the parameter.
            slots: The parameter's optimizer state.
        """


class Adam(BaseOptimizer):
    def __init__(self, learning_rate: float, beta_1: float = 0.9, beta_2: float = 0.999, epsilon: float = 1e-7):
        super().__init__(learning_rate, epsilon)
        self.beta_1 = beta_1
        self.beta_2 = beta_2

    def _init_slots(self, value):
        return {"m": np.zeros_like(value), "v": np.zeros_like(value)}

    def _delta(self, grad, slots):
        t = self.iterations
        slots["m"] = self.beta_1 * slots["m"] + (1.0 - self.beta_1) * grad
        slots["v"] = self.beta_2 * slots["v"] + (1.0 - self.beta_2) * grad * grad
        lr_t = self.learning_rate * np.sqrt(1.0 - self.beta_2**t) / (1.0 - self.beta_1**t)
        return lr_t * slots["m"] / (np.sqrt(slots["v"]) + self.epsilon)


class RMSprop(BaseOptimizer):
    def __init__(self, learning_rate: float, rho: float = 0.9, epsilon: float = 1e-7):
        super().__init__(learning_rate, epsilon)
        self.rho = rho

    def _init_slots(self, value):
        return {"v": np.zeros_like(value)}

    def _delta(self, grad, slots):
        slots["v"] = self.rho * slots["v"] + (1.0 - self.rho) * grad * grad
        return self.learning_rate * grad / (np.sqrt(slots["v"]) + self.epsilon)


class Adadelta(BaseOptimizer):
    def __init__(self, learning_rate: float, rho: float = 0.95, epsilon: float = 1e-7):
        super().__init__(learning_rate, epsilon)
        self.rho = rho

    def _init_slots(self, value):
        return {"accum_grad": np.zeros_like(value), "accum_update": np.zeros_like(value)}

    def _delta(self, grad, slots):
        slots["accum_grad"] = self.rho * slots["accum_grad"] + (1.0 - self.rho) * grad * grad
        update = grad * np.sqrt(slots["accum_update"] + self.epsilon) / np.sqrt(slots["accum_grad"] + self.epsilon)
        slots["accum_update"] = self.rho * slots["accum_update"] + (1.0 - self.rho) * update * update
        return self.learning_rate * update


_optimizer_registry: dict[Optimizer, type[BaseOptimizer]] = {
    Optimizer.adam: Adam,
    Optimizer.adadelta: Adadelta,
    Optimizer.rmsprop: RMSprop,
}


def create_optimizer(kind: Optimizer | str, learning_rate: float) -> BaseOptimizer:
    try:
        optimizer_class = _optimizer_registry[Optimizer(kind)]
    except (KeyError, ValueError) as e:
        raise ValueError(f"Unsupported optimizer: {kind}") from e
    return optimizer_class(learning_rate)
