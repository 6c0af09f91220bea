"""
Layers of the recurrent network: LSTM cell and layer, bidirectional wrapper,
dense, embedding, batch normalization and concatenation, each with a backward pass.

Every layer is a pair of pure functions: ``*_forward`` returns the output and a cache,
``*_backward`` takes the upstream gradient and that cache.
"""
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..config import Activation
from ..exceptions import DimensionMismatch, VocabularyOverflow
from .activations import activate, derivative, sigmoid

logger = logging.getLogger(__name__)

GATES = ("f", "i", "c", "o")
MAX_DROPOUT = 0.99
BN_MOMENTUM = 0.99
BN_EPSILON = 1e-5


@dataclass(frozen=True)
class LstmParams:
    """Gate weights over the concatenated [x_t, h_{t-1}] and gate biases."""

    W_f: np.ndarray
    W_i: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        shape = self.W_f.shape
        for gate in GATES:
            if getattr(self, f"W_{gate}").shape != shape or getattr(self, f"b_{gate}").shape != (shape[0],):
                raise DimensionMismatch(f"gate {gate} parameters disagree with W_f {shape}")
        if shape[1] <= shape[0]:
            raise DimensionMismatch(f"LSTM weights {shape} leave no room for an input")

    @property
    def hidden_size(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_f.shape[1] - self.W_f.shape[0]

    @classmethod
    def from_mapping(cls, params: Mapping[str, np.ndarray], prefix: str) -> "LstmParams":
        return cls(**{f"{kind}_{g}": params[f"{prefix}.{kind}_{g}"] for kind in ("W", "b") for g in GATES})

    def to_mapping(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.{kind}_{g}": getattr(self, f"{kind}_{g}") for kind in ("W", "b") for g in GATES}


@dataclass
class LstmState:
    """
    Cell and hidden state after one step, with the gate activations kept for backprop.
    Gate fields are None for an initial state.
    """

    C: np.ndarray
    h: np.ndarray
    f: np.ndarray | None = None
    i: np.ndarray | None = None
    o: np.ndarray | None = None
    c_bar: np.ndarray | None = None
    xh: np.ndarray | None = None
    C_prev: np.ndarray | None = None
    act_C: np.ndarray | None = None

    @classmethod
    def zeros(cls, hidden_size: int, batch: int | None = None) -> "LstmState":
        shape = (hidden_size,) if batch is None else (batch, hidden_size)
        return cls(C=np.zeros(shape), h=np.zeros(shape))


@dataclass
class LstmCache:
    steps: list[LstmState]
    input_mask: np.ndarray | None
    recurrent_mask: np.ndarray | None
    activation: Activation
    input_size: int
    reverse: bool = False


@dataclass
class BiLstmCache:
    fwd: LstmCache
    bwd: LstmCache


def effective_rate(rate: float, name: str = "dropout_rate") -> float:
    """Rates of 1.0 would zero every connection; they are clamped."""
    if rate >= 1.0:
        logger.warning("%s=%s clamped to %s", name, rate, MAX_DROPOUT)
        return MAX_DROPOUT
    return rate


def dropout_mask(rng: np.random.Generator, shape: tuple[int, ...], rate: float) -> np.ndarray:
    """Inverted dropout: kept units are scaled by 1 / (1 - rate)."""
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(np.float64) / keep


# -- LSTM --------------------------------------------------------------------


def lstm_cell_forward(
    x_t: np.ndarray, prev: LstmState, params: LstmParams, activation: Activation = Activation.tanh
) -> LstmState:
    """
    One LSTM step. Works on a single vector or on a (batch, features) matrix.

    Raises:
        DimensionMismatch: If x_t and h_{t-1} do not match the weight shapes.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != params.input_size or prev.h.shape[-1] != params.hidden_size:
        raise DimensionMismatch(
            f"input width {x_t.shape[-1]} / hidden width {prev.h.shape[-1]} do not fit "
            f"weights for {params.input_size} inputs and {params.hidden_size} units"
        )
    xh = np.concatenate([x_t, np.broadcast_to(prev.h, x_t.shape[:-1] + prev.h.shape[-1:])], axis=-1)
    f = sigmoid(xh @ params.W_f.T + params.b_f)
    i = sigmoid(xh @ params.W_i.T + params.b_i)
    c_bar = np.tanh(xh @ params.W_c.T + params.b_c)
    o = sigmoid(xh @ params.W_o.T + params.b_o)
    C = f * prev.C + i * c_bar
    act_C = activate(activation, C)
    return LstmState(C=C, h=o * act_C, f=f, i=i, o=o, c_bar=c_bar, xh=xh, C_prev=prev.C, act_C=act_C)


def lstm_layer_forward(
    sequence: np.ndarray,
    params: LstmParams,
    dropout_rate: float = 0.0,
    recurrent_dropout_rate: float = 0.0,
    activation: Activation = Activation.tanh,
    training: bool = False,
    rng: np.random.Generator | None = None,
    reverse: bool = False,
) -> tuple[np.ndarray, LstmCache | None]:
    """
    Runs the cell over a (batch, steps, features) sequence and returns the final hidden state.

    Dropout masks are drawn once per sequence and only in training mode; the cache is
    returned only in training mode.
    """
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim != 3:
        raise DimensionMismatch(f"expected (batch, steps, features), got shape {sequence.shape}")
    batch, steps, width = sequence.shape
    if width != params.input_size:
        raise DimensionMismatch(f"sequence width {width} != LSTM input size {params.input_size}")
    input_mask = recurrent_mask = None
    if training:
        dropout_rate = effective_rate(dropout_rate)
        recurrent_dropout_rate = effective_rate(recurrent_dropout_rate, "recurrent_dropout_rate")
        if dropout_rate > 0.0:
            input_mask = dropout_mask(rng, (batch, width), dropout_rate)
        if recurrent_dropout_rate > 0.0:
            recurrent_mask = dropout_mask(rng, (batch, params.hidden_size), recurrent_dropout_rate)
    state = LstmState.zeros(params.hidden_size, batch)
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    cached = []
    for t in order:
        x_t = sequence[:, t, :] if input_mask is None else sequence[:, t, :] * input_mask
        prev = state if recurrent_mask is None else LstmState(C=state.C, h=state.h * recurrent_mask)
        state = lstm_cell_forward(x_t, prev, params, activation)
        cached.append(state)
    cache = LstmCache(cached, input_mask, recurrent_mask, activation, width, reverse) if training else None
    return state.h, cache


def lstm_layer_backward(
    dh_final: np.ndarray, cache: LstmCache, params: LstmParams
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """
    Backpropagation through time from the gradient of the final hidden state.

    Returns:
        Gradients keyed W_f..b_o, and the gradient of the (batch, steps, features) input.
    """
    grads = {f"{k}_{g}": np.zeros_like(getattr(params, f"{k}_{g}")) for k in ("W", "b") for g in GATES}
    steps = len(cache.steps)
    batch = dh_final.shape[0]
    d_seq = np.zeros((batch, steps, cache.input_size))
    D = cache.input_size
    dh = dh_final
    dC = np.zeros_like(dh_final)
    for s in range(steps - 1, -1, -1):
        st = cache.steps[s]
        do = dh * st.act_C
        dC = dC + dh * st.o * derivative(cache.activation, st.C, st.act_C)
        dz = {
            "f": dC * st.C_prev * st.f * (1.0 - st.f),
            "i": dC * st.c_bar * st.i * (1.0 - st.i),
            "c": dC * st.i * (1.0 - st.c_bar**2),
            "o": do * st.o * (1.0 - st.o),
        }
        dxh = np.zeros_like(st.xh)
        for g in GATES:
            W = getattr(params, f"W_{g}")
            grads[f"W_{g}"] += dz[g].T @ st.xh
            grads[f"b_{g}"] += dz[g].sum(axis=0)
            dxh += dz[g] @ W
        dx = dxh[:, :D]
        dh = dxh[:, D:]
        if cache.input_mask is not None:
            dx = dx * cache.input_mask
        if cache.recurrent_mask is not None:
            dh = dh * cache.recurrent_mask
        dC = dC * st.f
        t = steps - 1 - s if cache.reverse else s
        d_seq[:, t, :] = dx
    return grads, d_seq


def bilstm_forward(
    sequence: np.ndarray,
    fwd: LstmParams,
    bwd: LstmParams,
    dropout_rate: float = 0.0,
    recurrent_dropout_rate: float = 0.0,
    activation: Activation = Activation.tanh,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, BiLstmCache | None]:
    """Forward and reversed passes over the same sequence; final states concatenated [fwd, bwd]."""
    h_fwd, c_fwd = lstm_layer_forward(
        sequence, fwd, dropout_rate, recurrent_dropout_rate, activation, training, rng, reverse=False
    )
    h_bwd, c_bwd = lstm_layer_forward(
        sequence, bwd, dropout_rate, recurrent_dropout_rate, activation, training, rng, reverse=True
    )
    cache = BiLstmCache(c_fwd, c_bwd) if training else None
    return np.concatenate([h_fwd, h_bwd], axis=-1), cache


def bilstm_backward(
    dh: np.ndarray, cache: BiLstmCache, fwd: LstmParams, bwd: LstmParams
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray], np.ndarray]:
    H = fwd.hidden_size
    g_fwd, d_fwd = lstm_layer_backward(dh[:, :H], cache.fwd, fwd)
    g_bwd, d_bwd = lstm_layer_backward(dh[:, H:], cache.bwd, bwd)
    return g_fwd, g_bwd, d_fwd + d_bwd


# -- feed-forward layers -----------------------------------------------------


def dense_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.shape[-1] != W.shape[0]:
        raise DimensionMismatch(f"dense input width {x.shape[-1]} != weight rows {W.shape[0]}")
    return x @ W + b


def dense_backward(dy: np.ndarray, x: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dW, db)."""
    return dy @ W.T, x.T @ dy, dy.sum(axis=0)


def embedding_forward(indices: np.ndarray, table: np.ndarray, feature: str = "") -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    bad = (indices < 0) | (indices >= table.shape[0])
    if np.any(bad):
        raise VocabularyOverflow(int(indices[bad][0]), table.shape[0], feature)
    return table[indices]


def embedding_backward(dy: np.ndarray, indices: np.ndarray, table: np.ndarray) -> np.ndarray:
    d_table = np.zeros_like(table)
    np.add.at(d_table, np.asarray(indices, dtype=np.int64), dy)
    return d_table


@dataclass
class BatchNormCache:
    x_hat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray
    running_mean: np.ndarray = field(repr=False)
    running_var: np.ndarray = field(repr=False)


def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool = False,
) -> tuple[np.ndarray, BatchNormCache | None]:
    """
    Training mode normalizes with batch statistics and reports updated running
    statistics in the cache; inference mode uses the running statistics.
    """
    if not training:
        return gamma * (x - running_mean) / np.sqrt(running_var + BN_EPSILON) + beta, None
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + BN_EPSILON)
    x_hat = (x - mean) * inv_std
    cache = BatchNormCache(
        x_hat=x_hat,
        inv_std=inv_std,
        gamma=gamma,
        running_mean=BN_MOMENTUM * running_mean + (1.0 - BN_MOMENTUM) * mean,
        running_var=BN_MOMENTUM * running_var + (1.0 - BN_MOMENTUM) * var,
    )
    return gamma * x_hat + beta, cache


def batchnorm_backward(dy: np.ndarray, cache: BatchNormCache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dgamma, dbeta)."""
    n = dy.shape[0]
    d_gamma = (dy * cache.x_hat).sum(axis=0)
    d_beta = dy.sum(axis=0)
    dx_hat = dy * cache.gamma
    dx = cache.inv_std / n * (n * dx_hat - dx_hat.sum(axis=0) - cache.x_hat * (dx_hat * cache.x_hat).sum(axis=0))
    return dx, d_gamma, d_beta


def concatenate_forward(parts: list[np.ndarray]) -> tuple[np.ndarray, list[int]]:
    widths = [p.shape[-1] for p in parts]
    return np.concatenate(parts, axis=-1), widths


def concatenate_backward(dy: np.ndarray, widths: list[int]) -> list[np.ndarray]:
    return np.split(dy, np.cumsum(widths)[:-1], axis=-1)
