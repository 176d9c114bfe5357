"""WaveNet vocoder: dilated causal convolutions over mu-law codes with
Mel-spectrogram conditioning, plus two inference engines.

Training runs the whole sequence as batched tensor ops. Generation is
autoregressive; the fast engine keeps per-layer ring buffers of past
activations (one matvec pass per sample), while the naive engine re-runs
the forward over the full receptive-field window for every emitted sample.
Both engines share the identical per-step arithmetic, so their outputs
match bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, asdict

import numpy as np

from . import autograd as ag
from .autograd import Tensor, _sigmoid
from .dsp import MULAW_LEVELS, SILENCE_CODE, mulaw_decode, tanh_log_compress
from .nn import Module, glorot, zeros, DTYPE

UPSAMPLE_FACTOR = 128


@dataclass
class WaveNetConfig:
    n_layers: int = 20
    cycle: int = 10                 # dilations double within a cycle, then reset
    residual_channels: int = 64
    skip_channels: int = 256
    n_mels: int = 80
    n_classes: int = MULAW_LEVELS

    @classmethod
    def paper(cls) -> "WaveNetConfig":
        return cls()

    @classmethod
    def desk(cls) -> "WaveNetConfig":
        return cls(n_layers=10, cycle=5, residual_channels=32, skip_channels=128)

    @property
    def dilations(self) -> list[int]:
        return [2 ** (i % self.cycle) for i in range(self.n_layers)]

    @property
    def receptive_field(self) -> int:
        return sum(self.dilations) + 1

    def to_dict(self) -> dict:
        return asdict(self)


class WaveNetLayer(Module):
    def __init__(self, rng, c: WaveNetConfig, dilation: int):
        r = c.residual_channels
        self.dilation = dilation
        self.w = glorot(rng, (2 * r, r, 2))
        self.b = zeros((2 * r,))
        self.wc = glorot(rng, (2 * r, c.n_mels))
        self.ws = glorot(rng, (c.skip_channels, r))
        self.bs = zeros((c.skip_channels,))
        self.wr = glorot(rng, (r, r))
        self.br = zeros((r,))


class WaveNet(Module):
    def __init__(self, config: WaveNetConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        c = config
        self.embedding = glorot(rng, (c.residual_channels, c.n_classes))
        self.layers = [WaveNetLayer(rng, c, d) for d in c.dilations]
        self.u1 = glorot(rng, (c.n_mels, c.n_mels, 16))
        self.ub1 = zeros((c.n_mels,))
        self.u2 = glorot(rng, (c.n_mels, c.n_mels, 32))
        self.ub2 = zeros((c.n_mels,))
        self.out1_w = glorot(rng, (c.skip_channels, c.skip_channels))
        self.out1_b = zeros((c.skip_channels,))
        # zero-init output head: initial logits vanish, so the starting
        # cross-entropy is exactly ln(n_classes)
        self.out2_w = zeros((c.n_classes, c.skip_channels))
        self.out2_b = zeros((c.n_classes,))

    @property
    def receptive_field(self) -> int:
        return self.config.receptive_field

    def upsample(self, mel: np.ndarray | Tensor) -> Tensor:
        """Mel frames (n_mels, B, F) -> sample-rate conditioning (n_mels, B, F*128)."""
        if not isinstance(mel, Tensor):
            mel = Tensor(np.asarray(mel, dtype=self.u1.data.dtype))
        x = mel
        x = ag.conv_transpose1d(x, self.u1, self.ub1, stride=8)
        return ag.conv_transpose1d(x, self.u2, self.ub2, stride=16)

    def forward(self, codes_prev: np.ndarray, cond: Tensor) -> Tensor:
        """codes_prev (B, T) int inputs (already shifted), cond (n_mels, B, T).

        Returns logits (n_classes, B, T); logits[:, b, t] scores code t.
        """
        r = self.config.residual_channels
        x = ag.embedding(self.embedding, np.asarray(codes_prev))
        skip_sum = None
        for layer in self.layers:
            pre = ag.conv1d(x, layer.w, layer.b, dilation=layer.dilation, causal=True)
            pre = ag.add(pre, ag.conv1x1(cond, layer.wc))
            z = ag.mul(ag.tanh(ag.channel_slice(pre, 0, r)),
                       ag.sigmoid(ag.channel_slice(pre, r, 2 * r)))
            s = ag.conv1x1(z, layer.ws, layer.bs)
            skip_sum = s if skip_sum is None else ag.add(skip_sum, s)
            x = ag.add(x, ag.conv1x1(z, layer.wr, layer.br))
        h = ag.relu(skip_sum)
        h = ag.relu(ag.conv1x1(h, self.out1_w, self.out1_b))
        return ag.conv1x1(h, self.out2_w, self.out2_b)

    def loss(self, codes: np.ndarray, mel: np.ndarray) -> Tensor:
        """Teacher-forced cross-entropy on (B, T) codes with (n_mels, B, F)
        Mel frames, T == F * 128. Inputs are the codes delayed one step,
        with the silence code filling position zero. Mel magnitudes are
        tanh-log compressed before upsampling so the conditioning lives in
        (-1, 1), same as the predictor's output domain."""
        codes = np.asarray(codes)
        mel = np.asarray(mel)
        if codes.shape[-1] != mel.shape[-1] * UPSAMPLE_FACTOR:
            raise ValueError(f"codes length {codes.shape[-1]} must equal "
                             f"frames * {UPSAMPLE_FACTOR} "
                             f"(got {mel.shape[-1]} Mel frames)")
        cond = self.upsample(tanh_log_compress(mel.astype(np.float64)))
        logits = self.forward(shift_codes(codes), cond)
        return ag.cross_entropy(logits, codes)


def shift_codes(codes: np.ndarray) -> np.ndarray:
    """Delay codes one step along the last axis, silence code in front."""
    codes = np.asarray(codes)
    shifted = np.empty_like(codes)
    shifted[..., 0] = SILENCE_CODE
    shifted[..., 1:] = codes[..., :-1]
    return shifted


# ---------------------------------------------------------------------------
# autoregressive engines


class _Weights:
    """Plain-ndarray views of the network parameters for the sampling loop."""

    def __init__(self, net: WaveNet, cond: np.ndarray):
        c = net.config
        self.r = c.residual_channels
        self.dilations = c.dilations
        self.table = net.embedding.data
        self.w_prev = [l.w.data[:, :, 0] for l in net.layers]
        self.w_cur = [l.w.data[:, :, 1] for l in net.layers]
        self.b = [l.b.data for l in net.layers]
        self.ws = [l.ws.data for l in net.layers]
        self.bs = [l.bs.data for l in net.layers]
        self.wr = [l.wr.data for l in net.layers]
        self.br = [l.br.data for l in net.layers]
        self.out1_w, self.out1_b = net.out1_w.data, net.out1_b.data
        self.out2_w, self.out2_b = net.out2_w.data, net.out2_b.data
        # conditioning projected once per layer; shared by both engines
        self.cond_cols = [l.wc.data @ cond for l in net.layers]
        self.t_max = cond.shape[1]


class _Rings:
    """Per-layer circular buffers of the last `dilation` layer inputs."""

    def __init__(self, w: _Weights):
        self.buf = [np.zeros((d, w.r), dtype=w.table.dtype) for d in w.dilations]
        self.pos = [0] * len(w.dilations)


def _step(w: _Weights, rings: _Rings, code: int, t: int) -> np.ndarray:
    """Advance one sample: input code at time t, return logits for time t."""
    r = w.r
    x = w.table[:, code].copy()
    skip = None
    for i in range(len(w.dilations)):
        buf, pos = rings.buf[i], rings.pos[i]
        # buf[pos] is a view into the ring; copy before the write below
        # replaces the d-steps-old input with the current one
        x_past = buf[pos].copy()
        buf[pos] = x
        rings.pos[i] = (pos + 1) % buf.shape[0]
        pre = w.w_cur[i] @ x + w.w_prev[i] @ x_past + w.b[i] + w.cond_cols[i][:, t]
        z = np.tanh(pre[:r]) * _sigmoid(pre[r:])
        s = w.ws[i] @ z + w.bs[i]
        skip = s if skip is None else skip + s
        x = x + w.wr[i] @ z + w.br[i]
    h = np.maximum(skip, 0.0)
    h = np.maximum(w.out1_w @ h + w.out1_b, 0.0)
    return w.out2_w @ h + w.out2_b


class FastSampler:
    """Incremental generation with cached layer inputs, O(layers) per sample."""

    def __init__(self, net: WaveNet, cond: np.ndarray):
        self.w = _Weights(net, np.asarray(cond, dtype=DTYPE))
        self.rf = net.receptive_field
        self.rings = _Rings(self.w)
        self.t = 0

    def step(self, prev_code: int) -> np.ndarray:
        logits = _step(self.w, self.rings, prev_code, self.t)
        self.t += 1
        return logits


class NaiveSampler:
    """Reference engine: re-runs the forward pass over the receptive-field
    window for every emitted sample. Same arithmetic as FastSampler."""

    def __init__(self, net: WaveNet, cond: np.ndarray):
        self.w = _Weights(net, np.asarray(cond, dtype=DTYPE))
        self.rf = net.receptive_field
        self.inputs: list[int] = []

    def prime(self, input_codes) -> None:
        """Record input history without emitting logits."""
        self.inputs.extend(int(c) for c in input_codes)

    def step(self, prev_code: int) -> np.ndarray:
        self.inputs.append(int(prev_code))
        t = len(self.inputs) - 1
        start = max(0, t - self.rf + 1)
        rings = _Rings(self.w)
        logits = None
        for tau in range(start, t + 1):
            logits = _step(self.w, rings, self.inputs[tau], tau)
        return logits


def sample_code(logits: np.ndarray, rng: np.random.Generator,
                temperature: float = 1.0) -> int:
    """Draw a mu-law code from the softmax over logits; 0 means argmax."""
    z = logits.astype(np.float64)
    if temperature <= 0.0:
        return int(z.argmax())
    z = z / temperature
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    return int(rng.choice(len(p), p=p))


def generate(net: WaveNet, mel: np.ndarray, seed: int = 0,
             temperature: float = 1.0, engine: str = "fast",
             primer: np.ndarray | None = None) -> np.ndarray:
    """Free-run the vocoder over a (n_mels, F) Mel spectrogram.

    Returns float samples of length F * 128, decoded from mu-law midpoints.
    An optional primer of known codes is teacher-forced before free running.
    """
    mel = np.asarray(mel)
    if mel.ndim != 2:
        raise ValueError("mel must be (n_mels, frames)")
    compressed = tanh_log_compress(mel.astype(np.float64))
    with ag.no_grad():
        cond = net.upsample(compressed[:, None, :].astype(DTYPE)).data[:, 0, :]
    n = cond.shape[1]
    sampler = {"fast": FastSampler, "naive": NaiveSampler}[engine](net, cond)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    codes = np.empty(n, dtype=np.int64)
    prev = SILENCE_CODE
    t0 = 0
    if primer is not None:
        primer = np.asarray(primer, dtype=np.int64)
        t0 = len(primer)
        codes[:t0] = primer
        for t in range(t0):
            sampler.step(prev)
            prev = int(primer[t])
    for t in range(t0, n):
        logits = sampler.step(prev)
        prev = sample_code(logits, rng, temperature)
        codes[t] = prev
    return mulaw_decode(codes)


def bench_engines(net: WaveNet, cond: np.ndarray, n_fast: int = 2048,
                  n_naive: int = 64) -> dict:
    """Steady-state samples/second for both engines on fixed conditioning.

    Both engines are primed past the receptive field first, so the naive
    engine pays its full window-replay cost on every timed sample.
    """
    rf = net.receptive_field
    rng = np.random.default_rng(np.random.SeedSequence(1234))
    prime = rng.integers(0, net.config.n_classes, size=rf + 1)

    fast = FastSampler(net, cond)
    for c in prime:
        fast.step(int(c))
    t0 = time.perf_counter()
    for t in range(n_fast):
        fast.step(int(prime[t % len(prime)]))
    fast_rate = n_fast / (time.perf_counter() - t0)

    naive = NaiveSampler(net, cond)
    naive.prime(prime)
    t0 = time.perf_counter()
    for t in range(n_naive):
        naive.step(int(prime[t % len(prime)]))
    naive_rate = n_naive / (time.perf_counter() - t0)

    return {"fast_samples_per_s": fast_rate,
            "naive_samples_per_s": naive_rate,
            "speedup": fast_rate / naive_rate}
