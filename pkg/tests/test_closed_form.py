import math

import numpy as np
import pytest

from conftest import make_record
from steti_forecast.exceptions import DegenerateData, NonPositiveLifetime
from steti_forecast.models import MooresLawParams
from steti_forecast.steti import (
    bias_diagnostic,
    fit_naive_launch_trend,
    fit_steti_closed_form,
    launch_curve,
    mse,
    plug_back,
    rmse,
    solve_failure_lifetime,
)
from steti_forecast.steti.closed_form import bisect_failure_lifetime, failure_points, sum_of_squares
from steti_forecast.synthetic import generate_cohort

TRUE_D = 12.0
TRUE_L = 0.3


class TestFailureLifetime:
    def test_identity_grid(self):
        dates = np.linspace(1960.0, 2030.0, 10)
        for d in np.linspace(2.0, 40.0, 10):
            for l_1959 in np.geomspace(0.05, 5.0, 10):
                params = MooresLawParams(l_1959=l_1959, d=d)
                lifetimes = solve_failure_lifetime(dates, params)
                residual = l_1959 * np.exp2((dates - lifetimes - 1959.0) / d) - lifetimes
                assert np.all(np.abs(residual) < 1e-9)
                # the launch-time view at t_F - l gives back l
                np.testing.assert_allclose(launch_curve(dates - lifetimes, params), lifetimes, rtol=0, atol=1e-9)

    def test_lambert_matches_bisection(self):
        params = MooresLawParams(l_1959=0.3, d=12.0)
        dates = np.linspace(1959.5, 2020.0, 25)
        np.testing.assert_allclose(solve_failure_lifetime(dates, params), bisect_failure_lifetime(dates, params), rtol=1e-12)

    def test_scalar_input(self):
        value = solve_failure_lifetime(2000.0, MooresLawParams(l_1959=1.0, d=10.0))
        assert isinstance(value, float) and value > 0.0

    def test_flat_trend(self):
        assert solve_failure_lifetime(1990.0, MooresLawParams(l_1959=2.5, d=math.inf)) == 2.5

    def test_launch_curve_doubles_every_d_years(self):
        params = MooresLawParams(l_1959=0.5, d=8.0)
        assert launch_curve(1959.0, params) == 0.5
        assert launch_curve(1967.0, params) == pytest.approx(1.0)
        curve = plug_back(params)
        assert curve.launch_date_of_failure(2000.0) == pytest.approx(2000.0 - curve.failure_lifetime(2000.0))


class TestClosedFormFit:
    def test_recovers_noise_free_parameters(self):
        params = MooresLawParams(l_1959=TRUE_L, d=TRUE_D)
        launches = np.linspace(1960.0, 2015.0, 40)
        lifetimes = launch_curve(launches, params)
        fitted = fit_steti_closed_form(launches + lifetimes, lifetimes)
        assert fitted.d == pytest.approx(TRUE_D, rel=1e-6)
        assert fitted.l_1959 == pytest.approx(TRUE_L, rel=1e-6)
        assert sum_of_squares(fitted, launches + lifetimes, lifetimes) < 1e-12

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateData):
            fit_steti_closed_form([2000.0, 2001.0], [1.0, 2.0])
        with pytest.raises(DegenerateData):
            fit_steti_closed_form([2000.0] * 4, [1.0, 2.0, 3.0, 4.0])
        with pytest.raises(NonPositiveLifetime):
            fit_steti_closed_form([2000.0, 2001.0, 2002.0], [1.0, 0.0, 3.0])

    def test_naive_fit_on_uncensored_data(self):
        params = MooresLawParams(l_1959=TRUE_L, d=TRUE_D)
        launches = np.linspace(1960.0, 2015.0, 30)
        fitted = fit_naive_launch_trend(launches, launch_curve(launches, params))
        assert fitted.d == pytest.approx(TRUE_D, rel=1e-9)
        assert fitted.l_1959 == pytest.approx(TRUE_L, rel=1e-9)


class TestCensoringBias:
    def test_failure_time_fit_corrects_the_launch_date_bias(self):
        fitted_d, naive_d = [], []
        for seed in range(10):
            cohort = generate_cohort(n=150, seed=seed, l_1959=TRUE_L, d=TRUE_D, sigma=0.3)
            failed = [r for r in cohort.records if r.failed]
            t_failure, lifetimes = failure_points(cohort.records)
            fitted_d.append(fit_steti_closed_form(t_failure, lifetimes).d)
            naive_d.append(fit_naive_launch_trend([r.launch_date for r in failed], [r.lifetime for r in failed]).d)
        fitted_d, naive_d = np.array(fitted_d), np.array(naive_d)
        assert np.sum(np.abs(fitted_d - TRUE_D) <= 0.15 * TRUE_D) >= 8
        # censoring drops long-lived recent launches, so the naive trend grows too slowly
        assert np.median(naive_d - TRUE_D) > 0.0
        assert np.median(np.abs(fitted_d - TRUE_D)) < np.median(np.abs(naive_d - TRUE_D))


def test_bias_diagnostic_table():
    params = MooresLawParams(l_1959=1.0, d=10.0)
    records = [
        make_record("a", 1960.0, 1961.0),
        make_record("b", 1970.0, 1972.0),
        make_record("c", 1980.0, 1984.0),
        make_record("d", 1990.0, None, observation=2000.0),
    ]
    frame = bias_diagnostic(records, params, window=3)
    assert list(frame["name"]) == ["a", "b", "c", "d"]
    np.testing.assert_allclose(frame["moving_average"][:3], [1.0, 7.0 / 3.0, 4.0])
    assert math.isnan(frame["moving_average"][3])
    assert frame["lifetime_or_age"][3] == 10.0
    np.testing.assert_allclose(frame["launch_curve"], launch_curve(frame["launch_date"].to_numpy(), params))
    assert math.isnan(frame["failure_view"][3])


def test_metrics():
    assert mse([1.0, 2.0], [1.0, 4.0]) == 2.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(ValueError):
        mse([1.0], [1.0, 2.0])
