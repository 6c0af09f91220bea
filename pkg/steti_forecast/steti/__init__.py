"""
Lifetime trend models: the closed-form fit and (in ``pipeline``) the two-stage LSTM.

``pipeline`` is not imported here because the network package depends on ``metrics``.
"""
from .closed_form import (
    LaunchCurve,
    bias_diagnostic,
    fit_naive_launch_trend,
    fit_steti_closed_form,
    launch_curve,
    plug_back,
    solve_failure_lifetime,
)
from .metrics import mse, rmse

__all__ = [
    "LaunchCurve",
    "bias_diagnostic",
    "fit_naive_launch_trend",
    "fit_steti_closed_form",
    "launch_curve",
    "mse",
    "plug_back",
    "rmse",
    "solve_failure_lifetime",
]
