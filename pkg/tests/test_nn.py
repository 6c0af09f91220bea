import logging
import math

import numpy as np
import pytest

from steti_forecast.config import Activation, HyperParams, Optimizer, Phase, Stage, TrainConfig
from steti_forecast.exceptions import CheckpointMismatch, DimensionMismatch, VocabularyOverflow
from steti_forecast.features import ExampleSet, Vocabulary, prepare_stage
from steti_forecast.nn import (
    Adam,
    Architecture,
    Checkpoint,
    EarlyStopping,
    LstmParams,
    LstmState,
    RMSprop,
    backward,
    bilstm_forward,
    create_optimizer,
    init_params,
    load_checkpoint,
    lstm_cell_forward,
    lstm_layer_forward,
    model_forward,
    predict,
    save_checkpoint,
    train,
)
from steti_forecast.nn.layers import batchnorm_forward, embedding_forward
from steti_forecast.nn.model import NON_TRAINABLE
from steti_forecast.steti.metrics import mse

VOCAB = Vocabulary(
    indices={"destination": {"mars": 1, "moon": 2}, "contact_type": {"orbiter": 1}, "country": {"a": 1, "b": 2, "c": 3}}
)


def make_batch(rng, phase, batch=2, window=3, main_channels=2, funding_window=3):
    return ExampleSet(
        names=[f"r{i}" for i in range(batch)],
        key_dates=np.arange(batch, dtype=float),
        seq_main=rng.uniform(0.0, 1.0, (batch, window, main_channels)),
        seq_funding=rng.uniform(0.0, 1.0, (batch, funding_window, 4)) if phase == Phase.time_plus else None,
        categoricals=np.array([[1, 1, 3], [2, 0, 1]] * (batch // 2), dtype=np.int64) if phase == Phase.time_plus else None,
        mass=rng.uniform(0.0, 1.0, (batch, 1)) if phase == Phase.time_plus else None,
        target=rng.normal(size=batch),
    )


def make_model(phase, hyperparams, hidden=2, main_channels=2, seed=0):
    arch = Architecture.build(hidden, main_channels, hyperparams, phase, VOCAB if phase == Phase.time_plus else None)
    return init_params(arch, np.random.default_rng(seed))


def training_loss(batch, params, hp):
    prediction, _ = model_forward(batch, params, hp, training=True)
    return mse(batch.target, prediction)


class TestGradients:
    @pytest.mark.parametrize(
        "phase, bidirectional, lstm_activation",
        [
            (Phase.time_only, False, Activation.tanh),
            (Phase.time_only, True, Activation.sigmoid),
            (Phase.time_plus, False, Activation.tanh),
            (Phase.time_plus, True, Activation.linear),
        ],
    )
    def test_backprop_matches_central_differences(self, phase, bidirectional, lstm_activation):
        rng = np.random.default_rng(11)
        hp = HyperParams(bidirectional=bidirectional, lstm_activation=lstm_activation, output_activation="sigmoid")
        params = make_model(phase, hp)
        batch = make_batch(rng, phase)
        for name in params:
            if name.startswith("embed."):
                params[name] = rng.uniform(-1.0, 1.0, params[name].shape)
        _, cache = model_forward(batch, params, hp, training=True)
        grads = backward(batch, params, cache)
        assert set(grads) == set(params) - NON_TRAINABLE

        eps = 1e-5
        for name, analytic in grads.items():
            numeric = np.zeros_like(analytic)
            for index in np.ndindex(analytic.shape):
                original = params[name][index]
                params[name][index] = original + eps
                up = training_loss(batch, params, hp)
                params[name][index] = original - eps
                down = training_loss(batch, params, hp)
                params[name][index] = original
                numeric[index] = (up - down) / (2 * eps)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-8, err_msg=name)


class TestLstm:
    def test_zero_weights_oracle(self):
        H, D = 2, 1
        zeros = {f"W_{g}": np.zeros((H, D + H)) for g in "fico"} | {f"b_{g}": np.zeros(H) for g in "fico"}
        params = LstmParams(**zeros)
        prev = LstmState(C=np.ones(H), h=np.zeros(H))
        state = lstm_cell_forward(np.array([3.0]), prev, params)
        # every gate is sigmoid(0) = 0.5 and the candidate is tanh(0) = 0
        np.testing.assert_allclose(state.C, 0.5)
        np.testing.assert_allclose(state.h, 0.5 * math.tanh(0.5))

    def test_single_unit_by_hand(self):
        params = LstmParams(
            W_f=np.array([[0.0, 0.0]]),
            W_i=np.array([[1.0, 0.0]]),
            W_c=np.array([[1.0, 0.0]]),
            W_o=np.array([[0.0, 0.0]]),
            b_f=np.zeros(1),
            b_i=np.zeros(1),
            b_c=np.zeros(1),
            b_o=np.zeros(1),
        )
        state = lstm_cell_forward(np.array([2.0]), LstmState.zeros(1), params)
        expected_c = (1.0 / (1.0 + math.exp(-2.0))) * math.tanh(2.0)
        np.testing.assert_allclose(state.C, [expected_c])
        np.testing.assert_allclose(state.h, [0.5 * math.tanh(expected_c)])

    def test_batched_equals_per_example(self):
        rng = np.random.default_rng(3)
        params = LstmParams(
            **{f"W_{g}": rng.normal(size=(3, 5)) for g in "fico"}, **{f"b_{g}": rng.normal(size=3) for g in "fico"}
        )
        seq = rng.normal(size=(4, 6, 2))
        h, _ = lstm_layer_forward(seq, params)
        for b in range(4):
            state = LstmState.zeros(3)
            for t in range(6):
                state = lstm_cell_forward(seq[b, t], state, params)
            np.testing.assert_allclose(h[b], state.h, rtol=1e-12)

    def test_reverse_reads_the_sequence_backwards(self):
        rng = np.random.default_rng(4)
        params = LstmParams(
            **{f"W_{g}": rng.normal(size=(2, 3)) for g in "fico"}, **{f"b_{g}": rng.normal(size=2) for g in "fico"}
        )
        seq = rng.normal(size=(2, 5, 1))
        backwards, _ = lstm_layer_forward(seq, params, reverse=True)
        flipped, _ = lstm_layer_forward(seq[:, ::-1, :], params)
        np.testing.assert_allclose(backwards, flipped, rtol=1e-12)

    def test_shape_mismatch(self):
        params = LstmParams(**{f"W_{g}": np.zeros((2, 4)) for g in "fico"}, **{f"b_{g}": np.zeros(2) for g in "fico"})
        with pytest.raises(DimensionMismatch):
            lstm_cell_forward(np.zeros(3), LstmState.zeros(2), params)
        with pytest.raises(DimensionMismatch):
            lstm_layer_forward(np.zeros((1, 4, 3)), params)

    def test_dropout_only_in_training(self, caplog):
        rng = np.random.default_rng(5)
        params = LstmParams(
            **{f"W_{g}": rng.normal(size=(2, 3)) for g in "fico"}, **{f"b_{g}": rng.normal(size=2) for g in "fico"}
        )
        seq = rng.normal(size=(3, 4, 1))
        plain, cache = lstm_layer_forward(seq, params)
        eval_mode, _ = lstm_layer_forward(seq, params, dropout_rate=0.5, recurrent_dropout_rate=0.5)
        np.testing.assert_array_equal(plain, eval_mode)
        assert cache is None
        with caplog.at_level(logging.WARNING):
            _, cache = lstm_layer_forward(seq, params, dropout_rate=1.0, training=True, rng=np.random.default_rng(0))
        assert "clamped" in caplog.text
        assert cache.input_mask is not None

    def test_gate_ranges(self):
        rng = np.random.default_rng(12)
        params = LstmParams(
            **{f"W_{g}": rng.normal(size=(4, 7)) for g in "fico"}, **{f"b_{g}": rng.normal(size=4) for g in "fico"}
        )
        _, cache = lstm_layer_forward(rng.normal(size=(8, 6, 3)), params, training=True)
        for state in cache.steps:
            for gate in (state.f, state.i, state.o):
                assert np.all((gate > 0.0) & (gate < 1.0))
            assert np.all(np.abs(state.c_bar) < 1.0)
            assert np.all(np.abs(state.h) <= 1.0)


class TestBiLstm:
    def _params(self, rng):
        return LstmParams(
            **{f"W_{g}": rng.normal(size=(3, 5)) for g in "fico"}, **{f"b_{g}": rng.normal(size=3) for g in "fico"}
        )

    def test_palindrome_with_tied_directions(self):
        rng = np.random.default_rng(13)
        params = self._params(rng)
        half = rng.normal(size=(2, 3, 2))
        palindrome = np.concatenate([half, half[:, -2::-1, :]], axis=1)
        out, _ = bilstm_forward(palindrome, params, params)
        assert out.shape == (2, 6)
        np.testing.assert_array_equal(out[:, :3], out[:, 3:])

    def test_single_step_is_seen_by_both_directions(self):
        rng = np.random.default_rng(14)
        params = self._params(rng)
        out, _ = bilstm_forward(rng.normal(size=(4, 1, 2)), params, params)
        np.testing.assert_array_equal(out[:, :3], out[:, 3:])

    def test_halves_are_the_two_unidirectional_runs(self):
        rng = np.random.default_rng(15)
        fwd, bwd = self._params(rng), self._params(rng)
        seq = rng.normal(size=(3, 5, 2))
        out, _ = bilstm_forward(seq, fwd, bwd)
        np.testing.assert_allclose(out[:, :3], lstm_layer_forward(seq, fwd)[0], rtol=1e-12)
        np.testing.assert_allclose(out[:, 3:], lstm_layer_forward(seq[:, ::-1, :], bwd)[0], rtol=1e-12)


class TestFeedForwardLayers:
    def test_embedding_overflow(self):
        table = np.zeros((3, 1))
        with pytest.raises(VocabularyOverflow):
            embedding_forward(np.array([0, 3]), table, "country")

    def test_batchnorm_modes(self):
        rng = np.random.default_rng(6)
        x = rng.normal(5.0, 2.0, size=(64, 3))
        gamma, beta = np.ones(3), np.zeros(3)
        out, cache = batchnorm_forward(x, gamma, beta, np.zeros(3), np.ones(3), training=True)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=0), 1.0, rtol=1e-3)
        np.testing.assert_allclose(cache.running_mean, 0.01 * x.mean(axis=0))
        inference, none = batchnorm_forward(x, gamma, beta, np.zeros(3), np.ones(3), training=False)
        assert none is None
        np.testing.assert_allclose(inference, x / math.sqrt(1.0 + 1e-5))


class TestModel:
    def test_bidirectional_mismatch(self):
        params = make_model(Phase.time_only, HyperParams(bidirectional=False))
        batch = make_batch(np.random.default_rng(0), Phase.time_only)
        with pytest.raises(DimensionMismatch):
            model_forward(batch, params, HyperParams(bidirectional=True))

    def test_architecture_from_params(self):
        hp = HyperParams(bidirectional=True)
        params = make_model(Phase.time_plus, hp, hidden=4)
        arch = Architecture.from_params(params)
        assert (arch.hidden_size, arch.main_channels, arch.bidirectional, arch.funding_channels) == (4, 2, True, 4)
        assert arch.vocab_sizes == {"destination": 3, "contact_type": 2, "country": 4}
        assert arch.embedding_dim("country") == 2 and arch.embedding_dim("contact_type") == 1

    def test_forward_leaves_parameters_untouched(self):
        hp = HyperParams(dropout_rate=0.3)
        params = make_model(Phase.time_plus, hp)
        before = {k: v.copy() for k, v in params.items()}
        model_forward(make_batch(np.random.default_rng(1), Phase.time_plus), params, hp, training=True)
        for name in params:
            np.testing.assert_array_equal(params[name], before[name])


    @pytest.mark.parametrize("phase", [Phase.time_only, Phase.time_plus])
    def test_zero_loss_gives_zero_gradients(self, phase):
        hp = HyperParams(bidirectional=True)
        params = make_model(phase, hp)
        batch = make_batch(np.random.default_rng(2), phase)
        prediction, _ = model_forward(batch, params, hp, training=True)
        exact = batch.model_copy(update={"target": prediction})
        _, cache = model_forward(exact, params, hp, training=True)
        for name, grad in backward(exact, params, cache).items():
            assert not np.any(grad), name


class TestOptimizers:
    def test_adam_first_step_moves_by_learning_rate(self):
        params = {"w": np.array([1.0, -1.0])}
        grads = {"w": np.array([0.3, -4.0])}
        updated = Adam(0.01).step(params, grads)
        np.testing.assert_allclose(updated["w"], [0.99, -0.99], rtol=1e-5)
        np.testing.assert_array_equal(params["w"], [1.0, -1.0])

    def test_rmsprop_first_step(self):
        updated = RMSprop(0.01).step({"w": np.array([0.0])}, {"w": np.array([2.0])})
        np.testing.assert_allclose(updated["w"], [-0.01 / math.sqrt(0.1)], rtol=1e-5)

    def test_rmsprop_on_a_parabola(self):
        optimizer = RMSprop(0.1)
        params = {"w": np.array([1.0])}
        w, v, expected, trace = 1.0, 0.0, [], []
        for _ in range(10):
            grad = 2.0 * w
            v = 0.9 * v + 0.1 * grad * grad
            w -= 0.1 * grad / (math.sqrt(v) + 1e-7)
            expected.append(w)
            params = optimizer.step(params, {"w": 2.0 * params["w"]})
            trace.append(float(params["w"][0]))
        np.testing.assert_allclose(trace, expected, rtol=1e-12)
        magnitudes = [1.0] + [abs(x) for x in trace]
        assert all(b < a for a, b in zip(magnitudes, magnitudes[1:]))

    def test_running_statistics_are_not_trained(self):
        params = {"bn.running_mean": np.zeros(2), "w": np.zeros(2)}
        grads = {"bn.running_mean": np.ones(2), "w": np.ones(2)}
        updated = create_optimizer(Optimizer.adadelta, 1.0).step(params, grads)
        np.testing.assert_array_equal(updated["bn.running_mean"], 0.0)
        assert np.all(updated["w"] < 0.0)

    @pytest.mark.parametrize("kind", list(Optimizer))
    def test_every_optimizer_descends_a_quadratic(self, kind):
        optimizer = create_optimizer(kind, 0.05 if kind != Optimizer.adadelta else 1.0)
        params = {"w": np.array([3.0, -2.0])}
        for _ in range(200):
            params = optimizer.step(params, {"w": 2.0 * params["w"]})
        assert np.linalg.norm(params["w"]) < np.linalg.norm([3.0, -2.0])

    def test_unknown_optimizer(self):
        with pytest.raises(ValueError):
            create_optimizer("sgd", 0.1)


class TestTraining:
    def test_early_stopping_counter(self):
        stopper = EarlyStopping(patience=2)
        params = {"w": np.zeros(1)}
        assert not stopper(1.0, 1, params)
        assert not stopper(0.5, 2, params)
        assert not stopper(0.6, 3, params)
        assert stopper(0.7, 4, params)
        assert stopper.best_epoch == 2 and stopper.best_loss == 0.5

    @pytest.mark.parametrize("optimizer", list(Optimizer))
    def test_returns_the_best_validation_model(self, optimizer):
        rng = np.random.default_rng(8)
        hp = HyperParams(optimizer=optimizer, learning_rate=1e-2, window_size=3)
        train_set = make_batch(rng, Phase.time_only, batch=40)
        val_set = make_batch(rng, Phase.time_only, batch=10)
        config = TrainConfig(batch_size=16, max_epochs=60, patience=5, seed=1)
        params = make_model(Phase.time_only, hp)
        best, history = train(train_set, val_set, params, hp, config)
        assert history.best_val_loss <= history.val_loss[-1]
        assert history.best_val_loss == min(history.val_loss)
        assert history.epochs - history.best_epoch <= config.patience
        assert mse(val_set.target, predict(val_set, best, hp)) == pytest.approx(history.best_val_loss)

    def test_training_is_seeded(self):
        rng = np.random.default_rng(9)
        hp = HyperParams(dropout_rate=0.2, recurrent_dropout_rate=0.2)
        train_set = make_batch(rng, Phase.time_plus, batch=20)
        val_set = make_batch(rng, Phase.time_plus, batch=6)
        config = TrainConfig(batch_size=8, max_epochs=15, patience=15, seed=3)
        params = make_model(Phase.time_plus, hp)
        first, h1 = train(train_set, val_set, params, hp, config)
        second, h2 = train(train_set, val_set, params, hp, config)
        assert h1.val_loss == h2.val_loss
        for name in first:
            np.testing.assert_array_equal(first[name], second[name])

    def test_oversized_batch(self, caplog):
        rng = np.random.default_rng(10)
        hp = HyperParams()
        train_set = make_batch(rng, Phase.time_only, batch=4)
        with caplog.at_level(logging.WARNING):
            config = TrainConfig(batch_size=96, max_epochs=2)
            _, history = train(train_set, train_set, make_model(Phase.time_only, hp), hp, config)
        assert history.batch_size == 4
        assert "exceeds" in caplog.text

    @pytest.mark.slow
    def test_overfits_a_handful_of_examples(self):
        rng = np.random.default_rng(16)
        hp = HyperParams(learning_rate=1e-2, window_size=3)
        examples = make_batch(rng, Phase.time_only, batch=5)
        config = TrainConfig(max_epochs=5000, patience=5000, hidden_size=8, seed=0)
        _, history = train(examples, examples, make_model(Phase.time_only, hp, hidden=8), hp, config)
        assert min(history.train_loss) < 1e-3


class TestCheckpoint:
    def _checkpoint(self, dataset):
        hp = HyperParams(window_size=3, window_size_funding=2, bidirectional=True)
        targets = {r.name: 1.0 for r in dataset.failed}
        data = prepare_stage(dataset.records, dataset.funding, Stage.launch, Phase.time_plus, hp, 0.75, targets=targets)
        arch = Architecture.build(3, 1, hp, Phase.time_plus, data.context.vocabulary)
        return Checkpoint(params=init_params(arch, np.random.default_rng(0)), hyperparams=hp, context=data.context), data

    def test_save_and_load_predict_identically(self, tmp_path, dataset):
        checkpoint, data = self._checkpoint(dataset)
        path = save_checkpoint(checkpoint, tmp_path / "model.npz")
        loaded = load_checkpoint(path)
        assert loaded.hyperparams == checkpoint.hyperparams
        assert loaded.context == checkpoint.context
        np.testing.assert_array_equal(loaded.predict(data.test), checkpoint.predict(data.test))

    def test_unreadable_checkpoint(self, tmp_path):
        path = tmp_path / "broken.npz"
        path.write_bytes(b"not an archive")
        with pytest.raises(CheckpointMismatch):
            load_checkpoint(path)

    def test_missing_parameter(self, tmp_path, dataset):
        checkpoint, _ = self._checkpoint(dataset)
        path = save_checkpoint(checkpoint, tmp_path / "model.npz")
        with np.load(path) as archive:
            contents = {name: archive[name] for name in archive.files if name != "out.b"}
        np.savez(tmp_path / "tampered.npz", **contents)
        with pytest.raises(CheckpointMismatch):
            load_checkpoint(tmp_path / "tampered.npz")
