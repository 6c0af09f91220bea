"""
The lifetime network: (Bi)LSTM over the main sequence, a second (Bi)LSTM over the funding
sequence, a dense layer after each, embeddings for the categorical features, concatenation
with the launch mass, batch normalization and a one-unit output layer.

Time-only models carry just the main branch.
"""
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..config import CATEGORICAL_COLUMNS, FUNDING_COLUMNS, HyperParams, Phase
from ..exceptions import DimensionMismatch
from ..features import ExampleSet, Vocabulary
from ..steti.metrics import mse
from .activations import activate, derivative
from .layers import (
    GATES,
    BatchNormCache,
    LstmParams,
    batchnorm_backward,
    batchnorm_forward,
    bilstm_backward,
    bilstm_forward,
    concatenate_backward,
    concatenate_forward,
    dense_backward,
    dense_forward,
    embedding_backward,
    embedding_forward,
    lstm_layer_backward,
    lstm_layer_forward,
)

ModelParams = dict[str, np.ndarray]

NON_TRAINABLE = frozenset({"bn.running_mean", "bn.running_var"})


class Architecture(BaseModel):
    """Shapes of a model; recoverable from its parameters alone."""

    model_config = ConfigDict(frozen=True)

    hidden_size: int
    main_channels: int
    bidirectional: bool = False
    funding_channels: int | None = None
    # embedding rows per categorical feature, reserved index included
    vocab_sizes: dict[str, int] = {}

    @property
    def phase(self) -> Phase:
        return Phase.time_plus if self.funding_channels else Phase.time_only

    @property
    def directions(self) -> tuple[str, ...]:
        return ("fwd", "bwd") if self.bidirectional else ("fwd",)

    def embedding_dim(self, feature: str) -> int:
        return max(1, math.ceil((self.vocab_sizes[feature] - 1) / 2))

    @property
    def concat_width(self) -> int:
        width = self.hidden_size
        if self.phase == Phase.time_plus:
            width += self.hidden_size + sum(self.embedding_dim(f) for f in self.vocab_sizes) + 1
        return width

    @classmethod
    def build(
        cls,
        hidden_size: int,
        main_channels: int,
        hyperparams: HyperParams,
        phase: Phase,
        vocabulary: Vocabulary | None = None,
    ) -> "Architecture":
        if phase == Phase.time_plus and vocabulary is None:
            raise DimensionMismatch("time-plus models need a categorical vocabulary")
        return cls(
            hidden_size=hidden_size,
            main_channels=main_channels,
            bidirectional=hyperparams.bidirectional,
            funding_channels=len(FUNDING_COLUMNS) if phase == Phase.time_plus else None,
            vocab_sizes={f: vocabulary.size(f) for f in CATEGORICAL_COLUMNS} if phase == Phase.time_plus else {},
        )

    @classmethod
    def from_params(cls, params: Mapping[str, np.ndarray]) -> "Architecture":
        W = params["main.fwd.W_f"]
        hidden = W.shape[0]
        funding = params.get("funding.fwd.W_f")
        return cls(
            hidden_size=hidden,
            main_channels=W.shape[1] - hidden,
            bidirectional="main.bwd.W_f" in params,
            funding_channels=None if funding is None else funding.shape[1] - hidden,
            vocab_sizes={f: params[f"embed.{f}"].shape[0] for f in CATEGORICAL_COLUMNS if f"embed.{f}" in params},
        )


def _glorot(rng: np.random.Generator, shape: tuple[int, int], fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _init_lstm(rng: np.random.Generator, prefix: str, inputs: int, hidden: int) -> ModelParams:
    params = {}
    for g in GATES:
        params[f"{prefix}.W_{g}"] = _glorot(rng, (hidden, inputs + hidden), inputs + hidden, hidden)
        params[f"{prefix}.b_{g}"] = np.ones(hidden) if g == "f" else np.zeros(hidden)
    return params


def init_params(arch: Architecture, rng: np.random.Generator) -> ModelParams:
    """Glorot-uniform weights, zero biases except a +1 forget-gate bias, identity batch norm."""
    H = arch.hidden_size
    lstm_out = H * len(arch.directions)
    params: ModelParams = {}
    for direction in arch.directions:
        params.update(_init_lstm(rng, f"main.{direction}", arch.main_channels, H))
    params["main_dense.W"] = _glorot(rng, (lstm_out, H), lstm_out, H)
    params["main_dense.b"] = np.zeros(H)
    if arch.phase == Phase.time_plus:
        for direction in arch.directions:
            params.update(_init_lstm(rng, f"funding.{direction}", arch.funding_channels, H))
        params["funding_dense.W"] = _glorot(rng, (lstm_out, H), lstm_out, H)
        params["funding_dense.b"] = np.zeros(H)
        for feature, rows in arch.vocab_sizes.items():
            params[f"embed.{feature}"] = rng.uniform(-0.05, 0.05, size=(rows, arch.embedding_dim(feature)))
    width = arch.concat_width
    params["bn.gamma"] = np.ones(width)
    params["bn.beta"] = np.zeros(width)
    params["bn.running_mean"] = np.zeros(width)
    params["bn.running_var"] = np.ones(width)
    params["out.W"] = _glorot(rng, (width, 1), width, 1)
    params["out.b"] = np.zeros(1)
    return params


def copy_params(params: Mapping[str, np.ndarray]) -> ModelParams:
    return {name: value.copy() for name, value in params.items()}


@dataclass
class ForwardCache:
    hyperparams: HyperParams
    arch: Architecture
    recurrent: dict[str, object] = field(default_factory=dict)
    lstm_outputs: dict[str, np.ndarray] = field(default_factory=dict)
    concat_input: np.ndarray | None = None
    widths: list[int] = field(default_factory=list)
    bn: BatchNormCache | None = None
    bn_output: np.ndarray | None = None
    pre_output: np.ndarray | None = None
    prediction: np.ndarray | None = None

    @property
    def running_stats(self) -> ModelParams:
        """Batch-norm running statistics after this training step."""
        return {"bn.running_mean": self.bn.running_mean, "bn.running_var": self.bn.running_var}


def _recurrent(branch, sequence, params, arch, hp, training, rng):
    fwd = LstmParams.from_mapping(params, f"{branch}.fwd")
    if arch.bidirectional:
        bwd = LstmParams.from_mapping(params, f"{branch}.bwd")
        return bilstm_forward(
            sequence, fwd, bwd, hp.dropout_rate, hp.recurrent_dropout_rate, hp.lstm_activation, training, rng
        )
    return lstm_layer_forward(
        sequence, fwd, hp.dropout_rate, hp.recurrent_dropout_rate, hp.lstm_activation, training, rng
    )


def _branches(arch: Architecture) -> tuple[str, ...]:
    return ("main", "funding") if arch.phase == Phase.time_plus else ("main",)


def _branch_input(batch: ExampleSet, branch: str) -> np.ndarray:
    sequence = batch.seq_main if branch == "main" else batch.seq_funding
    if sequence is None:
        raise DimensionMismatch(f"batch has no {branch} sequence")
    return sequence


def model_forward(
    batch: ExampleSet,
    params: Mapping[str, np.ndarray],
    hyperparams: HyperParams,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache | None]:
    """
    Predicted log2 lifetime for every example of the batch.

    In training mode dropout is active, batch normalization uses batch statistics,
    and the returned cache carries what ``backward`` needs plus the updated running
    statistics. Parameters are never modified.

    Raises:
        VocabularyOverflow: If a categorical index falls outside its embedding table.
        DimensionMismatch: If the batch does not fit the parameter shapes.
    """
    arch = Architecture.from_params(params)
    if hyperparams.bidirectional != arch.bidirectional:
        raise DimensionMismatch("hyperparameters and parameters disagree on bidirectionality")
    if training and rng is None:
        rng = np.random.default_rng(0)
    cache = ForwardCache(hyperparams=hyperparams, arch=arch)
    parts = []
    for branch in _branches(arch):
        h, rec_cache = _recurrent(branch, _branch_input(batch, branch), params, arch, hyperparams, training, rng)
        cache.recurrent[branch] = rec_cache
        cache.lstm_outputs[branch] = h
        parts.append(dense_forward(h, params[f"{branch}_dense.W"], params[f"{branch}_dense.b"]))
    if arch.phase == Phase.time_plus:
        if batch.categoricals is None or batch.mass is None:
            raise DimensionMismatch("time-plus models need categorical and mass inputs")
        for j, feature in enumerate(arch.vocab_sizes):
            parts.append(embedding_forward(batch.categoricals[:, j], params[f"embed.{feature}"], feature))
        parts.append(batch.mass)
    concat, cache.widths = concatenate_forward(parts)
    if concat.shape[-1] != params["bn.gamma"].shape[0]:
        raise DimensionMismatch(f"concatenated width {concat.shape[-1]} != {params['bn.gamma'].shape[0]}")
    normed, cache.bn = batchnorm_forward(
        concat, params["bn.gamma"], params["bn.beta"], params["bn.running_mean"], params["bn.running_var"], training
    )
    pre = dense_forward(normed, params["out.W"], params["out.b"])
    prediction = activate(hyperparams.output_activation, pre)
    if not training:
        return prediction[:, 0], None
    cache.concat_input, cache.bn_output, cache.pre_output, cache.prediction = concat, normed, pre, prediction
    return prediction[:, 0], cache


def backward(batch: ExampleSet, params: Mapping[str, np.ndarray], cache: ForwardCache) -> ModelParams:
    """Gradients of the batch MSE for every trainable parameter."""
    arch, hp = cache.arch, cache.hyperparams
    n = len(batch)
    grads: ModelParams = {}
    d_pred = 2.0 * (cache.prediction - batch.target.reshape(-1, 1)) / n
    d_pre = d_pred * derivative(hp.output_activation, cache.pre_output, cache.prediction)
    d_normed, grads["out.W"], grads["out.b"] = dense_backward(d_pre, cache.bn_output, params["out.W"])
    d_concat, grads["bn.gamma"], grads["bn.beta"] = batchnorm_backward(d_normed, cache.bn)
    d_parts = concatenate_backward(d_concat, cache.widths)
    branches = _branches(arch)
    for k, feature in enumerate(arch.vocab_sizes):
        grads[f"embed.{feature}"] = embedding_backward(
            d_parts[len(branches) + k], batch.categoricals[:, k], params[f"embed.{feature}"]
        )
    for branch, d_dense in zip(branches, d_parts):
        d_h, grads[f"{branch}_dense.W"], grads[f"{branch}_dense.b"] = dense_backward(
            d_dense, cache.lstm_outputs[branch], params[f"{branch}_dense.W"]
        )
        fwd = LstmParams.from_mapping(params, f"{branch}.fwd")
        if arch.bidirectional:
            bwd = LstmParams.from_mapping(params, f"{branch}.bwd")
            g_fwd, g_bwd, _ = bilstm_backward(d_h, cache.recurrent[branch], fwd, bwd)
            grads.update({f"{branch}.bwd.{k}": v for k, v in g_bwd.items()})
        else:
            g_fwd, _ = lstm_layer_backward(d_h, cache.recurrent[branch], fwd)
        grads.update({f"{branch}.fwd.{k}": v for k, v in g_fwd.items()})
    return grads


def loss_and_gradients(
    batch: ExampleSet,
    params: Mapping[str, np.ndarray],
    hyperparams: HyperParams,
    rng: np.random.Generator | None = None,
) -> tuple[float, ModelParams, ModelParams]:
    """Training-mode MSE, its gradients and the updated batch-norm running statistics."""
    prediction, cache = model_forward(batch, params, hyperparams, training=True, rng=rng)
    return mse(batch.target, prediction), backward(batch, params, cache), cache.running_stats


def predict(examples: ExampleSet, params: Mapping[str, np.ndarray], hyperparams: HyperParams) -> np.ndarray:
    """Inference-mode log2 lifetimes: dropout off, running batch-norm statistics."""
    prediction, _ = model_forward(examples, params, hyperparams, training=False)
    return prediction
