"""Parameterized layers on top of the autodiff engine.

Dense (optionally time-distributed by applying the same weights to every
row), a four-gate LSTM cell, a bidirectional LSTM layer, and an embedding
lookup table. Weight matrices are initialized uniform in [-s, s] with
s = sqrt(6 / (fan_in + fan_out)); biases start at zero except the LSTM
forget gate, which starts at +1.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


ACTIVATIONS = ("none", "tanh", "relu")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def apply_activation(x: Tensor, activation: str) -> Tensor:
    if activation == "none":
        return x
    if activation == "tanh":
        return ad.tanh(x)
    if activation == "relu":
        return ad.relu(x)
    raise ValueError(f"unknown activation {activation!r}, expected one of {ACTIVATIONS}")


class DenseLayer:
    """activation(x W + b), applied identically to every row of x."""

    def __init__(self, in_dim, out_dim, activation="none", rng=None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}, expected one of {ACTIVATIONS}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.W = Tensor(glorot_uniform(rng, in_dim, out_dim, (in_dim, out_dim)), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True)
        self.activation = activation

    @property
    def in_dim(self):
        return self.W.data.shape[0]

    @property
    def out_dim(self):
        return self.W.data.shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        return dense_forward(self, x)

    def named_tensors(self, prefix):
        return {f"{prefix}.W": self.W, f"{prefix}.b": self.b}


def dense_forward(layer: DenseLayer, x: Tensor) -> Tensor:
    if x.data.ndim != 2 or x.data.shape[1] != layer.in_dim:
        raise ValueError(
            f"dense input must be (rows, {layer.in_dim}), got {x.data.shape}"
        )
    return apply_activation(ad.add(ad.matmul(x, layer.W), layer.b), layer.activation)


class LstmCell:
    """Standard four-gate LSTM over concatenated [x_t ; h_prev].

    i, f, o = sigmoid(gates), g = tanh(candidate),
    c_t = f * c_prev + i * g,  h_t = o * tanh(c_t).
    """

    GATES = ("i", "f", "o", "g")

    def __init__(self, input_dim, hidden_dim, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        cat = input_dim + hidden_dim
        self.W = {}
        self.b = {}
        for gate in self.GATES:
            self.W[gate] = Tensor(glorot_uniform(rng, cat, hidden_dim, (cat, hidden_dim)), requires_grad=True)
            bias = np.zeros(hidden_dim)
            if gate == "f":
                bias += 1.0  # open forget gate at init
            self.b[gate] = Tensor(bias, requires_grad=True)

    def zero_state(self):
        return Tensor(np.zeros(self.hidden_dim)), Tensor(np.zeros(self.hidden_dim))

    def named_tensors(self, prefix):
        named = {}
        for gate in self.GATES:
            named[f"{prefix}.W_{gate}"] = self.W[gate]
            named[f"{prefix}.b_{gate}"] = self.b[gate]
        return named


def lstm_step(cell: LstmCell, x_t: Tensor, h_prev: Tensor, c_prev: Tensor):
    """One gated update; returns (h_t, c_t), both of shape (hidden_dim,)."""
    if x_t.data.shape != (cell.input_dim,):
        raise ValueError(f"lstm input must be ({cell.input_dim},), got {x_t.data.shape}")
    if h_prev.data.shape != (cell.hidden_dim,) or c_prev.data.shape != (cell.hidden_dim,):
        raise ValueError(
            f"lstm state must be ({cell.hidden_dim},), got h {h_prev.data.shape}, c {c_prev.data.shape}"
        )
    xh = ad.reshape(ad.concat([x_t, h_prev], axis=0), (1, cell.input_dim + cell.hidden_dim))

    def gate(name, act):
        z = ad.add(ad.matmul(xh, cell.W[name]), cell.b[name])
        return ad.reshape(act(z), (cell.hidden_dim,))

    i = gate("i", ad.sigmoid)
    f = gate("f", ad.sigmoid)
    o = gate("o", ad.sigmoid)
    g = gate("g", ad.tanh)
    c_t = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
    h_t = ad.mul(o, ad.tanh(c_t))
    return h_t, c_t


class BiLstmLayer:
    """Two LSTM cells scanning the sequence in opposite directions."""

    def __init__(self, input_dim, hidden_dim, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.forward = LstmCell(input_dim, hidden_dim, rng=rng)
        self.backward = LstmCell(input_dim, hidden_dim, rng=rng)

    @property
    def hidden_dim(self):
        return self.forward.hidden_dim

    @property
    def out_dim(self):
        return 2 * self.forward.hidden_dim

    def named_tensors(self, prefix):
        named = {}
        named.update(self.forward.named_tensors(f"{prefix}.fwd"))
        named.update(self.backward.named_tensors(f"{prefix}.bwd"))
        return named


def bilstm_forward(layer: BiLstmLayer, seq: Tensor):
    """Scan a (T, d) sequence both ways.

    Returns (outputs, final_states): outputs is (T, 2*hidden_dim) with
    outputs[t] = [h_fwd_t ; h_bwd_t]; final_states is a dict holding the
    last (h, c) of each direction.
    """
    if seq.data.ndim != 2 or seq.data.shape[0] < 1:
        raise ValueError(f"bilstm needs a non-empty (T, d) sequence, got {seq.data.shape}")
    steps = seq.data.shape[0]
    width = seq.data.shape[1]

    rows = [ad.reshape(ad.gather_rows(seq, [t]), (width,)) for t in range(steps)]

    h, c = layer.forward.zero_state()
    fwd = []
    for t in range(steps):
        h, c = lstm_step(layer.forward, rows[t], h, c)
        fwd.append(h)
    fwd_final = (h, c)

    h, c = layer.backward.zero_state()
    bwd = [None] * steps
    for t in reversed(range(steps)):
        h, c = lstm_step(layer.backward, rows[t], h, c)
        bwd[t] = h
    bwd_final = (h, c)

    out_rows = [
        ad.reshape(ad.concat([fwd[t], bwd[t]], axis=0), (1, layer.out_dim))
        for t in range(steps)
    ]
    outputs = out_rows[0] if steps == 1 else ad.concat(out_rows, axis=0)
    return outputs, {"forward": fwd_final, "backward": bwd_final}


class EmbeddingTable:
    """Token-index to vector lookup; rows receive gradient only when trainable."""

    def __init__(self, vocab_size, embed_dim, rng=None, trainable=True, matrix=None):
        if matrix is not None:
            matrix = np.asarray(matrix, dtype=np.float64)
            if matrix.shape != (vocab_size, embed_dim):
                raise ValueError(
                    f"embedding matrix shape {matrix.shape} does not match ({vocab_size}, {embed_dim})"
                )
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            matrix = rng.uniform(-0.05, 0.05, size=(vocab_size, embed_dim))
        self.matrix = Tensor(matrix, requires_grad=trainable)
        self.trainable = trainable

    @property
    def vocab_size(self):
        return self.matrix.data.shape[0]

    @property
    def embed_dim(self):
        return self.matrix.data.shape[1]

    def named_tensors(self, prefix):
        return {f"{prefix}.matrix": self.matrix}


def embed_lookup(table: EmbeddingTable, token_ids) -> Tensor:
    """Gather rows for the given ids; shape (len(token_ids), embed_dim)."""
    ids = np.asarray(token_ids, dtype=np.intp).reshape(-1)
    for tid in ids:
        if tid < 0 or tid >= table.vocab_size:
            raise IndexError(f"token id {int(tid)} out of range for vocabulary of {table.vocab_size}")
    return ad.gather_rows(table.matrix, ids)
