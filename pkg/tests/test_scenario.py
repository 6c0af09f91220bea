import math

import pandas as pd
import pytest

from conftest import quick_run_config
from steti_forecast.config import ScenarioAxis, ScenarioSpec
from steti_forecast.dataset import load_dataset
from steti_forecast.exceptions import CheckpointMismatch
from steti_forecast.scenario import SCENARIO_COLUMNS, build_scenarios, emit_plot_data, predict_scenarios, resolve_baseline
from steti_forecast.steti.pipeline import StagePipeline, StagePredictor


def mass_sweep(**kwargs):
    return ScenarioSpec(name="mass", axis=ScenarioAxis.launch_mass, **kwargs)


def test_baseline_defaults_to_the_latest_launch(dataset):
    baseline = resolve_baseline(mass_sweep(values=[1.0]), dataset.records)
    assert baseline.launch_date == max(r.launch_date for r in dataset.records)
    with pytest.raises(CheckpointMismatch):
        resolve_baseline(mass_sweep(values=[1.0], baseline="no-such-craft"), dataset.records)


def test_hypotheticals_differ_only_on_the_swept_axis(dataset):
    baseline = dataset.records[10]
    spec = ScenarioSpec(name="c", axis=ScenarioAxis.country, values=["usa", "india"])
    for variant, country in zip(build_scenarios(spec, baseline), ["usa", "india"]):
        assert variant.country == country
        assert variant.model_dump(exclude={"country"}) == baseline.model_dump(exclude={"country"})


class TestPredictScenarios:
    def test_identity_sweep_reproduces_the_baseline(self, time_plus_run):
        dataset, _, report = time_plus_run
        checkpoint = report.best.checkpoint
        baseline = resolve_baseline(mass_sweep(values=[1.0]), dataset.records)
        result = predict_scenarios(mass_sweep(values=[baseline.launch_mass]), checkpoint, dataset)
        (row,) = result.rows
        assert row.is_baseline
        expected = StagePredictor(checkpoint, dataset.records, dataset.funding).predict_names([baseline.name])[0]
        assert row.pred_log2_lifetime == expected
        assert row.pred_lifetime_years == 2.0**expected

    def test_default_mass_sweep(self, time_plus_run):
        dataset, config, report = time_plus_run
        (spec,) = config.scenarios
        result = predict_scenarios(spec, report.best.checkpoint, dataset)
        # the baseline's own mass is added to the 50 sweep values
        assert len(result.rows) == 51
        sweep = [row for row in result.rows if not row.is_baseline]
        assert sweep[0].axis_value == pytest.approx(1.0)
        assert sweep[-1].axis_value == pytest.approx(50000.0)
        assert sweep[0].extrapolation_flag and sweep[-1].extrapolation_flag
        assert all(math.isfinite(row.pred_lifetime_years) for row in result.rows)
        assert len({row.pred_log2_lifetime for row in sweep}) > 1

    def test_unseen_category_is_flagged(self, time_plus_run, caplog):
        dataset, _, report = time_plus_run
        spec = ScenarioSpec(name="c", axis=ScenarioAxis.country, values=["usa", "atlantis"], baseline="craft-149")
        result = predict_scenarios(spec, report.best.checkpoint, dataset)
        flags = {row.axis_value: row.extrapolation_flag for row in result.rows}
        assert flags["atlantis"] and not flags["usa"]
        assert "atlantis" in caplog.text

    def test_needs_a_launch_time_checkpoint(self, time_plus_run):
        dataset, _, report = time_plus_run
        with pytest.raises(CheckpointMismatch):
            predict_scenarios(mass_sweep(values=[10.0]), report.stage1.checkpoint, dataset)

    def test_baseline_without_a_full_window(self, time_plus_run):
        dataset, _, report = time_plus_run
        with pytest.raises(CheckpointMismatch):
            predict_scenarios(mass_sweep(values=[10.0], baseline="craft-000"), report.best.checkpoint, dataset)


def test_time_only_model_ignores_the_sweep(dataset, small_config):
    report = StagePipeline(dataset, small_config).run_phase(small_config.phases[0])
    result = predict_scenarios(mass_sweep(values=[1.0, 100.0, 10000.0]), report.best.checkpoint, dataset)
    assert len({row.pred_log2_lifetime for row in result.rows}) == 1
    assert not any(row.extrapolation_flag for row in result.rows)


def test_emit_plot_data(tmp_path, time_plus_run):
    dataset, _, report = time_plus_run
    result = predict_scenarios(mass_sweep(values=[10.0, 100.0]), report.best.checkpoint, dataset)
    path = emit_plot_data(result, tmp_path / "plots" / "mass.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == SCENARIO_COLUMNS
    assert len(frame) == len(result.rows)


def test_mass_blind_cohort_gives_a_flat_mass_sweep(tmp_path, cohort):
    # every craft weighs the same, so scaled mass carries no signal into the network
    flat = cohort.model_copy(update={"records": [r.model_copy(update={"launch_mass": 1000.0}) for r in cohort.records]})
    paths = flat.write(tmp_path / "flat")
    dataset = load_dataset(paths, observation_date=cohort.cutoff)
    config = quick_run_config(paths, cohort.cutoff, phase="time_plus")
    report = StagePipeline(dataset, config).run_phase(config.phases[0])
    (spec,) = config.scenarios
    predictions = [row.pred_log2_lifetime for row in predict_scenarios(spec, report.best.checkpoint, dataset).rows]
    assert max(predictions) - min(predictions) < 0.1
