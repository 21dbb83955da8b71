"""The SSVC captioning network.

Pipeline: a time-distributed dense layer maps per-frame feature vectors
down, a stack of bidirectional LSTM layers encodes them, one additive
attention runs per encoder layer and their contexts are joined into a
single stacked context, an optional spatial hard pull projects the raw
time-distributed outputs straight into the decoding context, and a
single-layer LSTM decoder emits one vocabulary distribution per step.

Training uses teacher forcing (the ground-truth previous token feeds every
step); inference decodes greedily from the start marker until the end
marker or a length cap.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import PAD, START, END
from .layers import (
    ACTIVATIONS,
    BiLstmLayer,
    DenseLayer,
    EmbeddingTable,
    LstmCell,
    bilstm_forward,
    dense_forward,
    embed_lookup,
    glorot_uniform,
    lstm_step,
)


@dataclass
class SsvcConfig:
    frames_per_seq: int = 15
    feature_dim: int = 4096
    td_units: int = 128
    enc_units: int = 256
    enc_layers: int = 2
    dec_units: int = 512
    shp_units: int = 0
    embed_dim: int = 100
    vocab_size: int = 0
    max_caption_len: int = 20
    stack_activation: str = "relu"  # the stacked-context join; "tanh" is the alternative
    td_activation: str = "tanh"
    shp_activation: str = "relu"

    def __post_init__(self):
        if self.dec_units != 2 * self.enc_units:
            raise ValueError(
                f"dec_units must be twice enc_units, got {self.dec_units} vs 2*{self.enc_units}"
            )
        if not 1 <= self.enc_layers <= 3:
            raise ValueError(f"enc_layers must be in 1..3, got {self.enc_layers}")
        if self.shp_units < 0:
            raise ValueError(f"shp_units must be >= 0, got {self.shp_units}")
        if self.vocab_size < 5:
            raise ValueError(f"vocab_size must cover the reserved markers, got {self.vocab_size}")
        if self.max_caption_len < 3:
            raise ValueError(f"max_caption_len too small: {self.max_caption_len}")
        for name in ("stack_activation", "td_activation", "shp_activation"):
            if getattr(self, name) not in ACTIVATIONS:
                raise ValueError(f"{name} must be one of {ACTIVATIONS}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class AttentionParams:
    """Additive-attention parameters for one encoder layer.

    Scores one timestep as W2 . tanh(W1 [h_t ; ss] + b1) + b2, a scalar,
    so the per-sequence scores form a length-T distribution after softmax.
    """

    def __init__(self, h_width, state_width, hidden, rng):
        cat = h_width + state_width
        self.W1 = Tensor(glorot_uniform(rng, cat, hidden, (cat, hidden)), requires_grad=True)
        self.b1 = Tensor(np.zeros(hidden), requires_grad=True)
        self.W2 = Tensor(glorot_uniform(rng, hidden, 1, (hidden, 1)), requires_grad=True)
        self.b2 = Tensor(np.zeros(1), requires_grad=True)

    def named_tensors(self, prefix):
        return {
            f"{prefix}.W1": self.W1,
            f"{prefix}.b1": self.b1,
            f"{prefix}.W2": self.W2,
            f"{prefix}.b2": self.b2,
        }


class SsvcParams:
    """All learnable weights, addressable by unique name for checkpointing."""

    def __init__(self, config: SsvcConfig, rng: np.random.Generator | None = None,
                 embedding_matrix=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        c = config
        enc_out = 2 * c.enc_units

        self.td_dense = DenseLayer(c.feature_dim, c.td_units, activation=c.td_activation, rng=rng)
        self.encoder_layers = []
        in_dim = c.td_units
        for _ in range(c.enc_layers):
            self.encoder_layers.append(BiLstmLayer(in_dim, c.enc_units, rng=rng))
            in_dim = enc_out
        # attention hidden width follows the decoder state width
        self.attn_per_layer = [
            AttentionParams(enc_out, c.dec_units, c.dec_units, rng) for _ in range(c.enc_layers)
        ]
        join_in = c.enc_layers * enc_out
        self.stack_join = DenseLayer(join_in, c.dec_units, activation=c.stack_activation, rng=rng)
        if c.shp_units > 0:
            self.shp_dense = DenseLayer(
                c.frames_per_seq * c.td_units, c.shp_units, activation=c.shp_activation, rng=rng
            )
        else:
            self.shp_dense = None
        dec_in = c.embed_dim + c.dec_units + c.shp_units
        self.decoder_cell = LstmCell(dec_in, c.dec_units, rng=rng)
        self.output_dense = DenseLayer(c.dec_units, c.vocab_size, activation="none", rng=rng)
        self.embedding = EmbeddingTable(c.vocab_size, c.embed_dim, rng=rng,
                                        matrix=embedding_matrix)

    def named_tensors(self):
        named = {}
        named.update(self.td_dense.named_tensors("td_dense"))
        for i, layer in enumerate(self.encoder_layers):
            named.update(layer.named_tensors(f"encoder.{i}"))
        for i, attn in enumerate(self.attn_per_layer):
            named.update(attn.named_tensors(f"attn.{i}"))
        named.update(self.stack_join.named_tensors("stack_join"))
        if self.shp_dense is not None:
            named.update(self.shp_dense.named_tensors("shp_dense"))
        named.update(self.decoder_cell.named_tensors("decoder"))
        named.update(self.output_dense.named_tensors("output_dense"))
        named.update(self.embedding.named_tensors("embedding"))
        return named


@dataclass
class EncoderOutput:
    h_layers: list          # one (T, 2*enc_units) tensor per encoder layer
    td_outputs: Tensor      # (T, td_units), feeds the spatial hard pull
    final_state: tuple      # (h, c), each (2*enc_units,), from the last layer


def _as_tensor(frames) -> Tensor:
    return frames if isinstance(frames, Tensor) else Tensor(np.asarray(frames))


def encode(params: SsvcParams, config: SsvcConfig, frames) -> EncoderOutput:
    """Run the time-distributed dense layer and the bidirectional LSTM stack."""
    frames = _as_tensor(frames)
    if frames.data.shape != (config.frames_per_seq, config.feature_dim):
        raise ValueError(
            f"expected frames of shape ({config.frames_per_seq}, {config.feature_dim}), "
            f"got {frames.data.shape}"
        )
    td_outputs = dense_forward(params.td_dense, frames)
    h_layers = []
    x = td_outputs
    finals = None
    for layer in params.encoder_layers:
        x, finals = bilstm_forward(layer, x)
        h_layers.append(x)
    h_final = ad.concat([finals["forward"][0], finals["backward"][0]], axis=0)
    c_final = ad.concat([finals["forward"][1], finals["backward"][1]], axis=0)
    return EncoderOutput(h_layers=h_layers, td_outputs=td_outputs, final_state=(h_final, c_final))


def attention_one_layer(h: Tensor, ss: Tensor, attn: AttentionParams):
    """Score every timestep of h against the decoder state ss.

    The decoder state is repeated across the T rows of h, each [h_t ; ss]
    row is pushed through the tanh layer and projected to one scalar, and
    the softmax of those scalars weights the rows of h into the context.
    Returns (weights (T,), c_attn (h_width,)).
    """
    t_len = h.data.shape[0]
    if h.data.shape[1] + ss.data.shape[0] != attn.W1.data.shape[0]:
        raise ValueError(
            f"attention width mismatch: h rows {h.data.shape[1]} + state {ss.data.shape[0]} "
            f"!= W1 input {attn.W1.data.shape[0]}"
        )
    ss_rep = ad.repeat_rows(ss, t_len)
    joined = ad.concat([h, ss_rep], axis=1)
    hidden = ad.tanh(ad.add(ad.matmul(joined, attn.W1), attn.b1))
    scores = ad.reshape(ad.add(ad.matmul(hidden, attn.W2), attn.b2), (t_len,))
    weights = ad.stable_softmax(scores)
    c_attn = ad.weighted_sum(h, weights)
    return weights, c_attn


def stacked_attention(h_layers, ss, attn_per_layer, stack_join):
    """Join one attention context per encoder layer into the stacked context."""
    if len(h_layers) != len(attn_per_layer):
        raise ValueError(
            f"{len(h_layers)} encoder layers but {len(attn_per_layer)} attention parameter sets"
        )
    contexts = [attention_one_layer(h, ss, attn)[1] for h, attn in zip(h_layers, attn_per_layer)]
    joined = contexts[0] if len(contexts) == 1 else ad.concat(contexts, axis=0)
    row = ad.reshape(joined, (1, joined.data.shape[0]))
    return ad.reshape(dense_forward(stack_join, row), (stack_join.out_dim,))


def spatial_hard_pull(td_outputs: Tensor, shp_dense):
    """Flatten all time-distributed frame outputs and project them at once.

    Position-sensitive by construction: the flattening keeps per-frame
    ordering, so this is not an average over time. Computed once per video
    and held constant across decoder steps. Returns None when the pull
    path is disabled.
    """
    if shp_dense is None:
        return None
    t_len, td_units = td_outputs.data.shape
    flat = ad.reshape(td_outputs, (1, t_len * td_units))
    return ad.reshape(dense_forward(shp_dense, flat), (shp_dense.out_dim,))


def decode_step(params: SsvcParams, config: SsvcConfig, prev_token: int, dec_state, c_st, c_shp):
    """One decoder step: embed the previous token, append the contexts, update the LSTM.

    Returns (logits (vocab_size,), new_state). Softmax over the logits is
    applied only inside the loss / sampling, never here.
    """
    if not 0 <= prev_token < config.vocab_size:
        raise IndexError(f"token id {prev_token} out of range for vocabulary of {config.vocab_size}")
    emb = ad.reshape(embed_lookup(params.embedding, [prev_token]), (config.embed_dim,))
    parts = [emb, c_st]
    if c_shp is not None:
        parts.append(c_shp)
    x = ad.concat(parts, axis=0)
    h, c = lstm_step(params.decoder_cell, x, dec_state[0], dec_state[1])
    logits = ad.reshape(dense_forward(params.output_dense, ad.reshape(h, (1, config.dec_units))),
                        (config.vocab_size,))
    return logits, (h, c)


def _validate_target(target, config: SsvcConfig):
    target = list(int(t) for t in target)
    if not target or target[0] != START:
        raise ValueError("target caption must begin with the start marker")
    if END not in target:
        raise ValueError("target caption must contain the end marker")
    if len(target) > config.max_caption_len:
        raise ValueError(
            f"target caption of length {len(target)} exceeds max_caption_len {config.max_caption_len}"
        )
    end_pos = target.index(END)
    if any(t == PAD for t in target[1:end_pos]):
        raise ValueError("pad marker inside the caption body")
    if any(t != PAD for t in target[end_pos + 1:]):
        raise ValueError("non-pad tokens after the end marker")
    return target, end_pos


def teacher_forced_logits(params: SsvcParams, config: SsvcConfig, frames, target):
    """Decode every non-pad position with the ground-truth previous token.

    Returns (logit_matrix, predicted_positions): one logits row per
    position i in 1..end, where the input token is target[i-1]. Generated
    tokens never feed the decoder, so row i depends only on the prefix
    target[0..i-1].
    """
    target, end_pos = _validate_target(target, config)
    enc = encode(params, config, frames)
    c_shp = spatial_hard_pull(enc.td_outputs, params.shp_dense)
    state = enc.final_state
    rows = []
    predicted = list(range(1, end_pos + 1))
    for i in predicted:
        c_st = stacked_attention(enc.h_layers, state[0], params.attn_per_layer,
                                 params.stack_join)
        logits, state = decode_step(params, config, target[i - 1], state, c_st, c_shp)
        rows.append(ad.reshape(logits, (1, config.vocab_size)))
    logit_matrix = rows[0] if len(rows) == 1 else ad.concat(rows, axis=0)
    return logit_matrix, predicted


def caption_loss(params: SsvcParams, config: SsvcConfig, frames, target) -> Tensor:
    """Teacher-forced mean cross-entropy over the non-pad caption positions.

    Pad positions are never decoded, so they contribute exactly zero.
    """
    logit_matrix, predicted = teacher_forced_logits(params, config, frames, target)
    target = [int(t) for t in target]
    log_probs = ad.log_softmax(logit_matrix)
    picked = ad.take_per_row(log_probs, [target[i] for i in predicted])
    return ad.scale(ad.sum_all(picked), -1.0 / len(predicted))


def train_step(params: SsvcParams, config: SsvcConfig, frames, target_caption, optimizer) -> float:
    """One teacher-forced gradient step; returns the scalar loss value."""
    optimizer.zero_grad()
    loss = caption_loss(params, config, frames, target_caption)
    ad.backward(loss)
    optimizer.step()
    return float(loss.data)


def infer(params: SsvcParams, config: SsvcConfig, frames, max_len=None):
    """Greedy decoding from the start marker.

    Stops at the end marker or after max_len steps; the returned id
    sequence excludes the start/end/pad markers.
    """
    if max_len is None:
        max_len = config.max_caption_len
    enc = encode(params, config, frames)
    c_shp = spatial_hard_pull(enc.td_outputs, params.shp_dense)
    state = enc.final_state
    prev = START
    out = []
    for _ in range(max_len):
        c_st = stacked_attention(enc.h_layers, state[0], params.attn_per_layer,
                                 params.stack_join)
        logits, state = decode_step(params, config, prev, state, c_st, c_shp)
        tok = int(np.argmax(logits.data))
        if tok == END:
            break
        if tok not in (PAD, START):
            out.append(tok)
        prev = tok
    return out
