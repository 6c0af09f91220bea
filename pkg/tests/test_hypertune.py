import math
import warnings

import numpy as np
import pytest

from steti_forecast.config import HyperParams, Optimizer, Phase, SamplerKind, TrialStatus, TuneConfig
from steti_forecast.exceptions import AllTrialsFailed, TuningError
from steti_forecast.hypertune import (
    RandomSampler,
    SearchSpace,
    Study,
    TPESampler,
    best_so_far,
    create_sampler,
    read_ledger,
    run_study,
    trial_seed,
)
from steti_forecast.models import Trial


def log_quadratic(params: HyperParams) -> float:
    """Minimum at learning_rate = 1e-4; the other knobs are ignored."""
    return (math.log10(params.learning_rate) + 4.0) ** 2


def proposals(trials):
    return [t.params for t in trials]


class TestSearchSpace:
    @pytest.mark.parametrize("phase", [Phase.time_only, Phase.time_plus])
    def test_samples_stay_inside(self, phase):
        space = SearchSpace(phase)
        sampler = RandomSampler()
        rng = np.random.default_rng(0)
        for _ in range(30):
            params = sampler.sample(space, [], rng)
            assert space.contains(params)
            assert (params.window_size_funding is None) == (phase == Phase.time_only)

    def test_defaults_are_inside(self):
        assert SearchSpace(Phase.time_only).contains(HyperParams.default(Phase.time_only))
        assert SearchSpace(Phase.time_plus).contains(HyperParams.default(Phase.time_plus))

    def test_funding_window_only_in_time_plus(self):
        assert "window_size_funding" not in SearchSpace(Phase.time_only).names
        assert "window_size_funding" in SearchSpace(Phase.time_plus).names
        assert not SearchSpace(Phase.time_plus).contains(HyperParams(window_size_funding=None))


class TestSamplers:
    def test_same_generator_state_same_proposal(self):
        space = SearchSpace(Phase.time_plus)
        history = Study(space, RandomSampler(), seed=3).run(log_quadratic, 12)[1]
        sampler = TPESampler(n_startup=5)
        a = sampler.sample(space, history, np.random.default_rng(11))
        b = sampler.sample(space, history, np.random.default_rng(11))
        assert a == b

    def test_tpe_splits_at_the_configured_quantile(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", FutureWarning)
            engine = TPESampler(gamma=0.25)._create_engine(0)
        assert [engine._gamma(n) for n in (4, 8, 9, 100)] == [1, 2, 3, 25]

    def test_create_sampler(self):
        tpe = create_sampler(TuneConfig(n_startup=4, n_candidates=8, gamma=0.3))
        assert isinstance(tpe, TPESampler)
        assert (tpe.n_startup, tpe.n_candidates, tpe.gamma) == (4, 8, 0.3)
        assert isinstance(create_sampler(TuneConfig(sampler=SamplerKind.random)), RandomSampler)


class TestStudy:
    def test_seeded_runs_are_identical(self):
        space = SearchSpace(Phase.time_only)
        _, first = run_study(log_quadratic, space, 12, seed=5)
        _, second = run_study(log_quadratic, space, 12, seed=5)
        assert proposals(first) == proposals(second)

    def test_resumed_ledger_matches_an_uninterrupted_run(self, tmp_path):
        space = SearchSpace(Phase.time_plus)
        ledger = tmp_path / "trials.csv"
        run_study(log_quadratic, space, 6, seed=9, ledger_path=ledger)
        _, resumed = Study(space, seed=9, ledger_path=ledger).run(log_quadratic, 13)
        _, straight = run_study(log_quadratic, space, 13, seed=9)
        assert proposals(resumed) == proposals(straight)
        assert [t.objective for t in resumed] == [t.objective for t in straight]
        assert len(read_ledger(ledger, space)) == 13

    def test_every_trial_gets_its_own_seed(self):
        _, trials = run_study(log_quadratic, SearchSpace(Phase.time_only), 6, seed=5)
        assert [t.seed for t in trials] == [trial_seed(5, k) for k in range(6)]
        assert len({t.seed for t in trials}) == 6

    def test_long_ledger_is_cut_back(self, tmp_path):
        space = SearchSpace(Phase.time_only)
        ledger = tmp_path / "trials.csv"
        run_study(log_quadratic, space, 8, seed=4, ledger_path=ledger)
        best, resumed = Study(space, seed=4, ledger_path=ledger).run(log_quadratic, 5)
        _, straight = run_study(log_quadratic, space, 5, seed=4)
        assert [t.trial_id for t in resumed] == list(range(5))
        assert proposals(resumed) == proposals(straight)
        assert best.trial_id < 5

    def test_ledger_with_other_columns(self, tmp_path):
        ledger = tmp_path / "trials.csv"
        run_study(log_quadratic, SearchSpace(Phase.time_only), 2, ledger_path=ledger)
        with pytest.raises(TuningError):
            read_ledger(ledger, SearchSpace(Phase.time_plus))

    def test_failed_trials_are_recorded(self):
        def flaky(params):
            if params.optimizer == Optimizer.adam:
                raise ValueError("diverged")
            return log_quadratic(params)

        _, trials = run_study(flaky, SearchSpace(Phase.time_only), 15, seed=1, sampler=RandomSampler())
        failed = [t for t in trials if t.status == TrialStatus.failed]
        assert failed and all(t.objective is None for t in failed)

    def test_all_trials_failed(self):
        def broken(params):
            raise ValueError("no")

        with pytest.raises(AllTrialsFailed) as info:
            run_study(broken, SearchSpace(Phase.time_only), 3)
        assert info.value.n_trials == 3

    def test_nan_objective_counts_as_failure(self):
        with pytest.raises(AllTrialsFailed):
            run_study(lambda params: math.nan, SearchSpace(Phase.time_only), 2)


def test_best_so_far():
    params = HyperParams()
    trials = [
        Trial(trial_id=0, params=params, objective=3.0, seed=0),
        Trial(trial_id=1, params=params, status=TrialStatus.failed, seed=0),
        Trial(trial_id=2, params=params, objective=1.0, seed=0),
        Trial(trial_id=3, params=params, objective=2.0, seed=0),
    ]
    assert best_so_far(trials) == [3.0, 3.0, 1.0, 1.0]


def best_log10_gap(trials):
    best = min((t for t in trials if t.status == TrialStatus.complete), key=lambda t: t.objective)
    return abs(math.log10(best.params.learning_rate) + 4.0)


def test_tpe_proposals_after_a_long_history():
    space = SearchSpace(Phase.time_only)
    _, history = run_study(log_quadratic, space, 100, seed=2, sampler=RandomSampler())
    sampler = TPESampler()
    proposed = [
        math.log10(sampler.sample(space, history, np.random.default_rng(k)).learning_rate) for k in range(20)
    ]
    assert abs(np.median(proposed) + 4.0) < 1.0


@pytest.mark.slow
def test_tpe_finds_the_optimum_and_beats_random_search():
    space = SearchSpace(Phase.time_only)
    tpe, random = [], []
    for seed in range(20):
        tpe.append(best_log10_gap(run_study(log_quadratic, space, 50, seed=seed, sampler=TPESampler())[1]))
        random.append(best_log10_gap(run_study(log_quadratic, space, 50, seed=seed, sampler=RandomSampler())[1]))
    # 0.2 decades is 5% of |log10(1e-4)|
    assert sum(gap <= 0.2 for gap in tpe[:10]) >= 9
    assert np.median(tpe) <= np.median(random)
