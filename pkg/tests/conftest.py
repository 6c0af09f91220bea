import pytest

from steti_forecast.config import PhaseConfig, RunConfig, TrainConfig, TuneConfig
from steti_forecast.dataset import derive_lifetime_status, load_dataset
from steti_forecast.models import RawMission
from steti_forecast.steti.pipeline import StagePipeline
from steti_forecast.synthetic import generate_cohort


def make_record(name="craft", launch=1990.0, failure=None, mass=500.0, observation=None, **labels):
    raw = RawMission(name=name, launch_date=launch, failure_date=failure, launch_mass=mass, **labels)
    return derive_lifetime_status(raw, observation)


def quick_run_config(paths, cutoff, phase="time_only", **phase_options):
    """A run small enough for the unit suite: one phase, one split, full batch, few epochs."""
    options = {"split_ratios": [0.75], "batch_sizes": ["full"], "tune": False, **phase_options}
    return RunConfig(
        paths=paths,
        seed=7,
        observation_date=cutoff,
        phases=[PhaseConfig(phase=phase, **options)],
        train=TrainConfig(max_epochs=20, patience=5, hidden_size=3, seed=7),
        tune=TuneConfig(max_trials=3, max_epochs=5),
    )


@pytest.fixture(scope="session")
def cohort():
    return generate_cohort(n=150, seed=0)


@pytest.fixture
def cohort_paths(tmp_path, cohort):
    return cohort.write(tmp_path / "data")


@pytest.fixture
def dataset(cohort_paths, cohort):
    return load_dataset(cohort_paths, observation_date=cohort.cutoff)


@pytest.fixture
def small_config(cohort_paths, cohort):
    return quick_run_config(cohort_paths, cohort.cutoff)


@pytest.fixture(scope="session")
def time_plus_run(tmp_path_factory, cohort):
    """Dataset, config and phase report of one trained time-plus phase, shared by the suite."""
    paths = cohort.write(tmp_path_factory.mktemp("time_plus"))
    dataset = load_dataset(paths, observation_date=cohort.cutoff)
    config = quick_run_config(paths, cohort.cutoff, phase="time_plus")
    report = StagePipeline(dataset, config).run_phase(config.phases[0])
    return dataset, config, report
