"""Vocoder: architecture contracts, receptive field, sampling engines."""

import numpy as np
import pytest

from melsynth import autograd as ag
from melsynth.dsp import SILENCE_CODE
from melsynth.wavenet import (UPSAMPLE_FACTOR, FastSampler, NaiveSampler,
                              WaveNet, WaveNetConfig, bench_engines, generate,
                              sample_code, shift_codes)

RF_TEST = WaveNetConfig(n_layers=6, cycle=3, residual_channels=8,
                        skip_channels=16)


def test_config_dilations_and_receptive_field():
    paper = WaveNetConfig.paper()
    assert paper.dilations[:10] == [1, 2, 4, 8, 16, 32, 64, 128, 256, 512]
    assert paper.dilations[10] == 1
    assert paper.receptive_field == 2 * 1023 + 1 == 2047
    desk = WaveNetConfig.desk()
    assert desk.dilations == [1, 2, 4, 8, 16] * 2
    assert desk.receptive_field == 63
    assert RF_TEST.dilations == [1, 2, 4, 1, 2, 4]
    assert RF_TEST.receptive_field == 15


def test_shift_codes():
    codes = np.array([[5, 6, 7], [1, 2, 3]])
    shifted = shift_codes(codes)
    assert shifted.tolist() == [[SILENCE_CODE, 5, 6], [SILENCE_CODE, 1, 2]]


def test_initial_loss_is_log_n_classes():
    net = WaveNet(RF_TEST, seed=0)
    rng = np.random.default_rng(0)
    codes = rng.integers(0, 256, (2, 256))
    mel = rng.uniform(0.001, 1.0, (80, 2, 2))
    assert net.loss(codes, mel).item() == pytest.approx(np.log(256.0), rel=1e-6)


def test_loss_validates_alignment():
    net = WaveNet(RF_TEST, seed=0)
    with pytest.raises(ValueError):
        net.loss(np.zeros((1, 256), dtype=np.int64), np.ones((80, 1, 3)))


def test_upsample_factor():
    net = WaveNet(RF_TEST, seed=0)
    out = net.upsample(np.random.default_rng(0).uniform(0, 1, (80, 2, 5)))
    assert out.data.shape == (80, 2, 5 * UPSAMPLE_FACTOR)


def test_forward_is_causal_with_exact_receptive_field():
    """Flipping an input code changes logits exactly up to 14 steps later."""
    net = WaveNet(RF_TEST, seed=1)
    rng = np.random.default_rng(2)
    for _, p in net.named_params():
        p.data = p.data.astype(np.float64)
    # the output head starts at zero (ln-256 init); give it signal so code
    # perturbations reach the logits
    net.out2_w.data = rng.uniform(-0.3, 0.3, net.out2_w.data.shape)
    t_len = 40
    codes_in = rng.integers(0, 256, (1, t_len))
    cond = ag.Tensor(rng.uniform(-0.5, 0.5, (80, 1, t_len)))

    with ag.no_grad():
        base = net.forward(codes_in, cond).data

    flip_at = 20
    changed = codes_in.copy()
    changed[0, flip_at] = (changed[0, flip_at] + 97) % 256
    with ag.no_grad():
        out = net.forward(changed, cond).data
    delta = np.abs(out - base).max(axis=(0, 1))

    assert (delta[:flip_at] == 0.0).all()                 # causal
    rf = net.receptive_field                              # 15
    assert (delta[flip_at:flip_at + rf] > 0.0).all()      # sensitive window
    assert (delta[flip_at + rf:] == 0.0).all()            # nothing beyond


def test_fast_equals_naive_engine():
    net = WaveNet(RF_TEST, seed=3)
    rng = np.random.default_rng(4)
    # the zero-init head maps every state to zero logits; randomize it so a
    # state mismatch between the engines is visible at the output
    net.out2_w.data = rng.uniform(-0.3, 0.3,
                                  net.out2_w.data.shape).astype(np.float32)
    cond = rng.uniform(-0.5, 0.5, (80, 60)).astype(np.float32)
    fast = FastSampler(net, cond)
    naive = NaiveSampler(net, cond)
    inputs = rng.integers(0, 256, 60)
    for t, c in enumerate(inputs):
        lf = fast.step(int(c))
        ln = naive.step(int(c))
        assert np.array_equal(lf, ln), f"diverged at step {t}"


def test_fast_engine_matches_teacher_forced_forward():
    net = WaveNet(RF_TEST, seed=5)
    rng = np.random.default_rng(6)
    # zero logits from the zero-init head would make this check vacuous
    net.out2_w.data = rng.uniform(-0.3, 0.3,
                                  net.out2_w.data.shape).astype(np.float32)
    t_len = 30
    codes_in = rng.integers(0, 256, (1, t_len))
    cond = rng.uniform(-0.5, 0.5, (80, t_len)).astype(np.float32)
    with ag.no_grad():
        batch_logits = net.forward(codes_in, ag.Tensor(cond[:, None, :])).data
    fast = FastSampler(net, cond)
    for t in range(t_len):
        logits = fast.step(int(codes_in[0, t]))
        assert np.allclose(logits, batch_logits[:, 0, t], atol=1e-5)


def test_generate_shape_and_determinism():
    net = WaveNet(RF_TEST, seed=7)
    mel = np.random.default_rng(8).uniform(0.001, 1.0, (80, 3))
    a = generate(net, mel, seed=11)
    b = generate(net, mel, seed=11)
    c = generate(net, mel, seed=12)
    assert len(a) == 3 * UPSAMPLE_FACTOR
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert (np.abs(a) <= 1.0).all()


def test_generate_primer_is_teacher_forced():
    net = WaveNet(RF_TEST, seed=7)
    mel = np.random.default_rng(8).uniform(0.001, 1.0, (80, 2))
    primer = np.full(64, 200, dtype=np.int64)
    from melsynth.dsp import mulaw_decode
    out = generate(net, mel, seed=0, primer=primer)
    assert np.allclose(out[:64], mulaw_decode(primer))


def test_sample_code_temperature():
    logits = np.array([0.0, 3.0, 1.0])
    rng = np.random.default_rng(0)
    assert sample_code(logits, rng, temperature=0.0) == 1
    draws = {sample_code(logits, np.random.default_rng(s), 1.0)
             for s in range(64)}
    assert len(draws) > 1


def test_bench_reports_speedup():
    net = WaveNet(RF_TEST, seed=0)
    cond = np.zeros((80, 64), dtype=np.float32)
    stats = bench_engines(net, cond, n_fast=32, n_naive=4)
    assert stats["fast_samples_per_s"] > 0
    assert stats["naive_samples_per_s"] > 0
    assert stats["speedup"] == pytest.approx(
        stats["fast_samples_per_s"] / stats["naive_samples_per_s"])


def _envelope(audio, win=64):
    return np.convolve(np.abs(audio), np.ones(win) / win, mode="same")


def _xcorr_peak_lag(a, b):
    a = a - a.mean()
    b = b - b.mean()
    m = len(a) + len(b) - 1
    nfft = 1 << (m - 1).bit_length()
    xc = np.fft.irfft(np.fft.rfft(a, nfft) * np.conj(np.fft.rfft(b, nfft)),
                      nfft)[:m]
    xc = np.concatenate([xc[-(len(b) - 1):], xc[:len(a)]])
    return int(np.argmax(xc)) - (len(b) - 1)


@pytest.mark.slow
def test_conditioning_alignment():
    """Dropping k leading Mel frames advances generated audio by exactly
    k * 128 samples, located by the envelope cross-correlation peak of an
    overfit model's free runs. The clip puts its onset mid-window so the
    envelope carries an alignment feature."""
    from melsynth.dsp import SAMPLE_RATE, mel_spectrogram, mulaw_encode
    from melsynth.training import train_wavenet, wavenet_config

    n = 4096
    audio = np.zeros(n)
    t = np.arange(n - 2048) / SAMPLE_RATE
    audio[2048:] = 0.5 * np.sin(2 * np.pi * 330.0 * t) * np.minimum(1.0, t * 200.0)
    codes = mulaw_encode(audio)
    mel = mel_spectrogram(audio)

    net, _ = train_wavenet(None, wavenet_config("desk", iterations=800),
                           fixed_example=(codes[None, :], mel[:, None, :]))
    base = generate(net, mel, seed=0, temperature=0.8)
    for k in (1, 2):
        lead = generate(net, mel[:, k:], seed=0, temperature=0.8)
        lag = _xcorr_peak_lag(_envelope(base), _envelope(lead))
        assert lag == k * UPSAMPLE_FACTOR
