import math
from collections.abc import Sequence

import numpy as np


def mse(y: Sequence[float] | np.ndarray, y_hat: Sequence[float] | np.ndarray) -> float:
    y, y_hat = np.asarray(y, dtype=np.float64), np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    return float(np.mean((y - y_hat) ** 2))


def rmse(y: Sequence[float] | np.ndarray, y_hat: Sequence[float] | np.ndarray) -> float:
    return math.sqrt(mse(y, y_hat))
