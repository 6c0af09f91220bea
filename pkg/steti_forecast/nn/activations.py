"""
Elementwise activations and their derivatives.
"""
from collections.abc import Callable

import numpy as np
from scipy.special import expit

from ..config import Activation

Array = np.ndarray


def sigmoid(x: Array | float) -> Array:
    return expit(x)


def tanh(x: Array | float) -> Array:
    return np.tanh(x)


def relu(x: Array | float) -> Array:
    return np.maximum(x, 0.0)


def linear(x: Array | float) -> Array:
    return np.asarray(x, dtype=np.float64)


# derivative as a function of (pre-activation, activation output)
_DERIVATIVES: dict[Activation, Callable[[Array, Array], Array]] = {
    Activation.linear: lambda x, y: np.ones_like(y),
    Activation.sigmoid: lambda x, y: y * (1.0 - y),
    Activation.tanh: lambda x, y: 1.0 - y * y,
    Activation.relu: lambda x, y: (x > 0.0).astype(np.float64),
}

_FUNCTIONS: dict[Activation, Callable[[Array], Array]] = {
    Activation.linear: linear,
    Activation.sigmoid: sigmoid,
    Activation.tanh: tanh,
    Activation.relu: relu,
}


def activate(kind: Activation, x: Array) -> Array:
    return _FUNCTIONS[Activation(kind)](x)


def derivative(kind: Activation, x: Array, y: Array) -> Array:
    return _DERIVATIVES[Activation(kind)](x, y)
