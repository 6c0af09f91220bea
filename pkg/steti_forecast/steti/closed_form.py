"""
Closed-form lifetime trend.

Launch-time view: l(t_L) = l_1959 * 2 ** ((t_L - epoch) / d).
Failure-time view: a craft failing at t_F launched at t_F - l, so l solves
l = l_1959 * 2 ** ((t_F - l - epoch) / d). Fitting the failure-time view to completed
lifetimes and plugging the parameters into the launch-time view corrects the bias of
regressing observed lifetimes on launch date.
"""
import logging
import math
from collections.abc import Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy.optimize import least_squares
from scipy.special import lambertw

from ..config import EPOCH_YEAR
from ..exceptions import DegenerateData, NoConvergence, NonPositiveLifetime
from ..features import moving_average
from ..models import MissionRecord, MooresLawParams

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
MAX_BISECTIONS = 200
RESIDUAL_TOLERANCE = 1e-9

# search box for (log2 l_1959, 1/d)
LOG2_L_BOUNDS = (-30.0, 12.0)
RATE_BOUNDS = (1e-6, 2.0)
_COARSE_LOG2_L = np.linspace(-8.0, 6.0, 57)
_COARSE_RATE = np.linspace(0.002, 0.5, 60)


def launch_curve(t_launch: float | np.ndarray, params: MooresLawParams) -> float | np.ndarray:
    result = params.l_1959 * np.exp2((np.asarray(t_launch, dtype=np.float64) - params.epoch) / params.d)
    return float(result) if result.ndim == 0 else result


def _failure_residual(l, t_failure, params):
    return params.l_1959 * np.exp2((t_failure - l - params.epoch) / params.d) - l


def bisect_failure_lifetime(t_failure: float | np.ndarray, params: MooresLawParams) -> float | np.ndarray:
    """
    Bisection on g(l) = l_1959 * 2 ** ((t_F - l - epoch) / d) - l, which is strictly
    decreasing for d > 0 with g(0+) > 0.

    Raises:
        NoConvergence: If the bracket does not shrink to machine precision within the iteration cap.
    """
    t = np.atleast_1d(np.asarray(t_failure, dtype=np.float64))
    lo = np.full_like(t, 1e-12)
    hi = np.maximum(t - params.epoch + 64.0 * params.d, params.l_1959)
    if np.any(_failure_residual(lo, t, params) < 0.0) or np.any(_failure_residual(hi, t, params) > 0.0):
        raise NoConvergence(f"no root bracketed for l_1959={params.l_1959}, d={params.d}")
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        positive = _failure_residual(mid, t, params) > 0.0
        lo = np.where(positive, mid, lo)
        hi = np.where(positive, hi, mid)
        if np.all(hi - lo <= 2.0 * np.spacing(hi)):
            break
    else:
        raise NoConvergence(f"bisection did not converge in {MAX_BISECTIONS} iterations")
    result = 0.5 * (lo + hi)
    return float(result[0]) if np.ndim(t_failure) == 0 else result


def solve_failure_lifetime(t_failure: float | np.ndarray, params: MooresLawParams) -> float | np.ndarray:
    """
    Lifetime of a craft failing at t_failure under the trend.

    Uses the principal Lambert W branch, l = W0(k * a) / k with k = ln2 / d and
    a = l_1959 * 2 ** ((t_F - epoch) / d); falls back to bisection where that is
    not accurate enough.
    """
    scalar = np.ndim(t_failure) == 0
    t = np.atleast_1d(np.asarray(t_failure, dtype=np.float64))
    if math.isinf(params.d):
        result = np.full_like(t, params.l_1959)
        return float(result[0]) if scalar else result
    k = LN2 / params.d
    a = params.l_1959 * np.exp2((t - params.epoch) / params.d)
    with np.errstate(all="ignore"):
        result = np.real(lambertw(k * a, 0)) / k
        bad = ~np.isfinite(result) | (result <= 0.0)
        bad |= np.abs(_failure_residual(np.where(bad, 1.0, result), t, params)) >= RESIDUAL_TOLERANCE
    if np.any(bad):
        result[bad] = bisect_failure_lifetime(t[bad], params)
    return float(result[0]) if scalar else result


class LaunchCurve:
    """Fitted trend, usable as l(t_L) and convertible to the failure-time view."""

    def __init__(self, params: MooresLawParams):
        self.params = params

    def __call__(self, t_launch: float | np.ndarray) -> float | np.ndarray:
        return launch_curve(t_launch, self.params)

    def failure_lifetime(self, t_failure: float | np.ndarray) -> float | np.ndarray:
        return solve_failure_lifetime(t_failure, self.params)

    def launch_date_of_failure(self, t_failure: float | np.ndarray) -> float | np.ndarray:
        return np.asarray(t_failure) - self.failure_lifetime(t_failure)


def plug_back(params: MooresLawParams) -> LaunchCurve:
    return LaunchCurve(params)


def _check_points(t_failure, lifetimes) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t_failure, dtype=np.float64)
    l = np.asarray(lifetimes, dtype=np.float64)
    if t.shape != l.shape:
        raise DegenerateData(f"{t.size} dates but {l.size} lifetimes")
    if t.size < 3:
        raise DegenerateData(f"need at least 3 points, got {t.size}")
    if np.any(~(l > 0.0)):
        raise NonPositiveLifetime(float(l[~(l > 0.0)][0]))
    if np.ptp(t) == 0.0:
        raise DegenerateData("all dates are equal")
    return t, l


def _model_log2(theta: np.ndarray, t: np.ndarray, epoch: float) -> np.ndarray:
    params = MooresLawParams(l_1959=2.0 ** theta[0], d=1.0 / theta[1], epoch=epoch)
    return np.log2(solve_failure_lifetime(t, params))


def sum_of_squares(params: MooresLawParams, t_failure: Sequence[float], lifetimes: Sequence[float]) -> float:
    """Fit objective: squared log2 errors of the failure-time view."""
    predicted = solve_failure_lifetime(np.asarray(t_failure, dtype=np.float64), params)
    return float(np.sum((np.log2(lifetimes) - np.log2(predicted)) ** 2))


def fit_steti_closed_form(
    t_failure: Sequence[float] | np.ndarray, lifetimes: Sequence[float] | np.ndarray, epoch: float = EPOCH_YEAR
) -> MooresLawParams:
    """
    Least-squares fit of the failure-time view in log2 space.

    A coarse grid over (log2 l_1959, 1/d) seeds a bounded trust-region refinement.

    Args:
        t_failure: Failure dates of inactive records.
        lifetimes: Their observed lifetimes in years.
        epoch: Reference year of l_1959.

    Raises:
        DegenerateData: With fewer than 3 points or a single distinct date.
    """
    t, l = _check_points(t_failure, lifetimes)
    y = np.log2(l)

    def residuals(theta):
        return y - _model_log2(theta, t, epoch)

    def jacobian(theta):
        fitted = 2.0 ** _model_log2(theta, t, epoch)
        denom = 1.0 + theta[1] * fitted * LN2
        return -np.column_stack([1.0 / denom, (t - epoch - fitted) / denom])

    best, best_sse = None, math.inf
    for log2_l in _COARSE_LOG2_L:
        for rate in _COARSE_RATE:
            sse = float(np.sum(residuals(np.array([log2_l, rate])) ** 2))
            if sse < best_sse:
                best, best_sse = np.array([log2_l, rate]), sse
    result = least_squares(
        residuals,
        best,
        jac=jacobian,
        bounds=([LOG2_L_BOUNDS[0], RATE_BOUNDS[0]], [LOG2_L_BOUNDS[1], RATE_BOUNDS[1]]),
        method="trf",
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=1000,
    )
    theta = result.x if 2.0 * result.cost <= best_sse else best
    params = MooresLawParams(l_1959=2.0 ** theta[0], d=1.0 / theta[1], epoch=epoch)
    logger.info("closed-form fit: l_1959=%.6g, d=%.6g, sse=%.6g", params.l_1959, params.d, 2.0 * result.cost)
    return params


def fit_naive_launch_trend(
    t_launch: Sequence[float] | np.ndarray, lifetimes: Sequence[float] | np.ndarray, epoch: float = EPOCH_YEAR
) -> MooresLawParams:
    """
    Ordinary regression of log2 lifetime on launch date. Restricted to failed records
    this is biased towards a flatter trend, since recent launches enter only if they
    failed early.
    """
    t, l = _check_points(t_launch, lifetimes)
    fit = sm.OLS(np.log2(l), sm.add_constant(t - epoch)).fit()
    intercept, slope = fit.params
    return MooresLawParams(l_1959=2.0**intercept, d=math.inf if slope == 0.0 else 1.0 / slope, epoch=epoch)


def failure_points(records: Sequence[MissionRecord]) -> tuple[np.ndarray, np.ndarray]:
    failed = [r for r in records if r.failed]
    return np.array([r.failure_date for r in failed]), np.array([r.lifetime for r in failed])


def bias_diagnostic(records: Sequence[MissionRecord], params: MooresLawParams, window: int = 15) -> pd.DataFrame:
    """
    Per-record table for the censoring-bias picture, in launch order: observed lifetime
    (or age so far), centered moving average of failed lifetimes, the corrected launch
    curve and the failure-time view of the trend.
    """
    ordered = sorted(records, key=lambda r: (r.launch_date, r.name))
    frame = pd.DataFrame(
        {
            "name": [r.name for r in ordered],
            "status": [str(r.status) for r in ordered],
            "launch_date": [r.launch_date for r in ordered],
            "failure_date": [np.nan if r.failure_date is None else r.failure_date for r in ordered],
            "lifetime_or_age": [r.lifetime if r.failed else (r.age if r.age is not None else np.nan) for r in ordered],
        }
    )
    failed = frame["status"] == "inactive"
    frame["moving_average"] = np.nan
    if failed.any():
        frame.loc[failed, "moving_average"] = moving_average(frame.loc[failed, "lifetime_or_age"].to_numpy(), window)
    frame["launch_curve"] = launch_curve(frame["launch_date"].to_numpy(), params)
    frame["failure_view"] = np.nan
    if failed.any():
        frame.loc[failed, "failure_view"] = solve_failure_lifetime(frame.loc[failed, "failure_date"].to_numpy(), params)
    return frame
