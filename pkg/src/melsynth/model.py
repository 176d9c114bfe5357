"""Mel-spectrogram prediction network with FiLM timbre conditioning.

The network maps an 88-key onset/frame piano roll to a Mel spectrogram in
the tanh-log domain: a pointwise input convolution, a FiLM layer driven by
a learned per-instrument embedding, a bidirectional LSTM, a second FiLM
layer, and a pointwise output convolution. Apart from the LSTM (and the
optional ReLU ablation) every stage is linear.

Ablation variants keep the trunk identical and toggle one factor each.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .dsp import tanh_log_compress, tanh_log_expand
from .nn import Module, glorot, zeros, DTYPE

VARIANTS = ("proposed", "frame_only", "onset_only", "film1_only", "film2_only",
            "fwd_lstm_only", "relu", "conv3", "conv5", "lstm2")

LOSS_KINDS = ("abs", "log", "tanhlog")

CLIP = 1.0 - 1e-6


@dataclass
class Mel2MelConfig:
    variant: str = "proposed"
    n_instruments: int = 10
    embedding_dim: int = 2
    width: int = 256
    lstm_hidden: int = 128
    n_mels: int = 80
    input_rows: int = 176

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def used_rows(self) -> slice:
        """Which piano-roll rows the variant consumes (onsets first half)."""
        half = self.input_rows // 2
        if self.variant == "onset_only":
            return slice(0, half)
        if self.variant == "frame_only":
            return slice(half, self.input_rows)
        return slice(0, self.input_rows)

    def to_dict(self) -> dict:
        return asdict(self)


class Film(Module):
    """Feature-wise linear modulation: x * (1 + f(z)) + h(z)."""

    def __init__(self, rng, width: int, emb_dim: int):
        self.wf = glorot(rng, (width, emb_dim))
        self.bf = zeros((width,))
        self.wh = glorot(rng, (width, emb_dim))
        self.bh = zeros((width,))

    def __call__(self, x: Tensor, z: Tensor) -> Tensor:
        f = ag.reshape(ag.conv1x1(z, self.wf, self.bf), (-1, z.shape[1], 1))
        h = ag.reshape(ag.conv1x1(z, self.wh, self.bh), (-1, z.shape[1], 1))
        return ag.add(ag.mul(x, ag.add_const(f, 1.0)), h)


class LstmCell(Module):
    def __init__(self, rng, in_dim: int, hidden: int):
        self.wx = glorot(rng, (4 * hidden, in_dim))
        self.wh = glorot(rng, (4 * hidden, hidden))
        b = np.zeros(4 * hidden, dtype=DTYPE)
        b[hidden:2 * hidden] = 1.0     # forget gate starts open
        self.b = ag.parameter(b)

    def __call__(self, x: Tensor) -> Tensor:
        return ag.lstm(x, self.wx, self.wh, self.b)


class BiLstm(Module):
    def __init__(self, rng, in_dim: int, hidden: int):
        self.fwd = LstmCell(rng, in_dim, hidden)
        self.bwd = LstmCell(rng, in_dim, hidden)

    def __call__(self, x: Tensor) -> Tensor:
        forward = self.fwd(x)
        backward = ag.flip_time(self.bwd(ag.flip_time(x)))
        return ag.concat_channels([forward, backward])


class Mel2Mel(Module):
    def __init__(self, config: Mel2MelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        c = config
        rows = c.used_rows.stop - c.used_rows.start

        self.embedding = glorot(rng, (c.embedding_dim, c.n_instruments))

        kernel = {"conv3": 3, "conv5": 5}.get(c.variant, 1)
        if kernel == 1:
            self.w_in = glorot(rng, (c.width, rows))
        else:
            self.w_in = glorot(rng, (c.width, rows, kernel))
        self.b_in = zeros((c.width,))

        self.film1 = None if c.variant == "film2_only" else Film(rng, c.width, c.embedding_dim)

        if c.variant == "fwd_lstm_only":
            self.lstms = [LstmCell(rng, c.width, 2 * c.lstm_hidden)]
        elif c.variant == "lstm2":
            self.lstms = [BiLstm(rng, c.width, c.lstm_hidden),
                          BiLstm(rng, 2 * c.lstm_hidden, c.lstm_hidden)]
        else:
            self.lstms = [BiLstm(rng, c.width, c.lstm_hidden)]

        self.film2 = None if c.variant == "film1_only" else Film(rng, c.width, c.embedding_dim)

        self.w_out = glorot(rng, (c.n_mels, c.width))
        self.b_out = zeros((c.n_mels,))

    def forward(self, roll: np.ndarray, instrument_ids: np.ndarray) -> Tensor:
        """roll (input_rows, B, T) float, ids (B,) int -> (n_mels, B, T)."""
        c = self.config
        x_in = Tensor(np.ascontiguousarray(roll[c.used_rows]))
        z = ag.embedding(self.embedding, np.asarray(instrument_ids))

        if self.w_in.data.ndim == 3:
            x = ag.conv1d(x_in, self.w_in, self.b_in, dilation=1, causal=False)
        else:
            x = ag.conv1x1(x_in, self.w_in, self.b_in)
        if c.variant == "relu":
            x = ag.relu(x)
        if self.film1 is not None:
            x = self.film1(x, z)
        for cell in self.lstms:
            x = cell(x)
        if self.film2 is not None:
            x = self.film2(x, z)
        return ag.conv1x1(x, self.w_out, self.b_out)

    def predict_mel(self, roll: np.ndarray, instrument_ids: np.ndarray) -> np.ndarray:
        """Linear-magnitude Mel prediction, (n_mels, B, T), floored at 1e-5."""
        with ag.no_grad():
            p = self.forward(roll.astype(DTYPE), instrument_ids)
        return tanh_log_expand(p.data)

    def embedding_vectors(self) -> np.ndarray:
        """Learned instrument coordinates, (embedding_dim, n_instruments)."""
        return self.embedding.data.copy()

    def forward_at(self, roll: np.ndarray, z_points: np.ndarray) -> np.ndarray:
        """Inference at explicit embedding coordinates z (E, B), bypassing the
        instrument table. Returns tanh-log output as ndarray."""
        c = self.config
        with ag.no_grad():
            x_in = Tensor(np.ascontiguousarray(roll[c.used_rows]).astype(DTYPE))
            z = Tensor(np.asarray(z_points, dtype=DTYPE))
            if self.w_in.data.ndim == 3:
                x = ag.conv1d(x_in, self.w_in, self.b_in, dilation=1, causal=False)
            else:
                x = ag.conv1x1(x_in, self.w_in, self.b_in)
            if c.variant == "relu":
                x = ag.relu(x)
            if self.film1 is not None:
                x = self.film1(x, z)
            for cell in self.lstms:
                x = cell(x)
            if self.film2 is not None:
                x = self.film2(x, z)
            return ag.conv1x1(x, self.w_out, self.b_out).data


def mel2mel_loss(pred: Tensor, target_mel: np.ndarray, kind: str = "tanhlog") -> Tensor:
    """Training losses over a linear-magnitude Mel target.

    The network output lives in the tanh-log domain; the log and abs losses
    map it back through 4 * artanh (clamped away from +-1) and exp.
    """
    target_mel = np.asarray(target_mel, dtype=pred.data.dtype)
    if kind == "tanhlog":
        return ag.mse(pred, tanh_log_compress(target_mel))
    clamped = ag.clip(pred, -CLIP, CLIP)
    log_pred = ag.scale(ag.arctanh(clamped), 4.0)
    if kind == "log":
        return ag.mse(log_pred, np.log(target_mel))
    if kind == "abs":
        return ag.mse(ag.exp(log_pred), target_mel)
    raise ValueError(f"unknown loss kind {kind!r}")
