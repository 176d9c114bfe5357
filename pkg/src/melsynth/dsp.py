"""Deterministic DSP kernels: mu-law codec, STFT, Mel filterbank, CQT,
spectral statistics and a Griffin-Lim preview inverter.

All audio is mono float at 16 kHz. Mel spectrograms are 80xT linear
magnitudes floored at 1e-5 (the -100 dB clip); CQT spectrograms are 84xT'
natural-log magnitudes with the same floor.
"""

from __future__ import annotations

import numpy as np

SAMPLE_RATE = 16000
WINDOW = 1024
HOP = 128
N_FREQ = WINDOW // 2 + 1
N_MELS = 80
MEL_FLOOR = 1e-5           # linear magnitude at -100 dB

CQT_BINS = 84
CQT_BINS_PER_OCTAVE = 12
CQT_FMIN = 32.70           # C1
CQT_HOP = 512

MULAW_LEVELS = 256
_LN_LEVELS = np.log(MULAW_LEVELS)


# ---------------------------------------------------------------------------
# mu-law companding


def mulaw_encode(x, saturation: list | None = None):
    """Compand [-1, 1] samples to integer codes 0..255.

    Out-of-range samples are clamped; when ``saturation`` is given, the clamp
    count is appended to it.
    """
    arr = np.asarray(x, dtype=np.float64)
    clipped = np.abs(arr) > 1.0
    if saturation is not None:
        saturation.append(int(np.count_nonzero(clipped)))
    arr = np.clip(arr, -1.0, 1.0)
    companded = np.sign(arr) * np.log1p((MULAW_LEVELS - 1) * np.abs(arr)) / _LN_LEVELS
    codes = np.floor((companded + 1.0) / 2.0 * (MULAW_LEVELS - 1) + 0.5).astype(np.int64)
    if np.isscalar(x) or np.ndim(x) == 0:
        return int(codes)
    return codes


def mulaw_decode(code):
    """Invert a code to the midpoint of its companded level."""
    arr = np.asarray(code)
    if np.any(arr < 0) or np.any(arr >= MULAW_LEVELS):
        raise ValueError("mu-law codes must lie in 0..255")
    companded = 2.0 * arr / (MULAW_LEVELS - 1) - 1.0
    x = np.sign(companded) * np.expm1(np.abs(companded) * _LN_LEVELS) / (MULAW_LEVELS - 1)
    if np.isscalar(code) or np.ndim(code) == 0:
        return float(x)
    return x


SILENCE_CODE = mulaw_encode(0.0)


# ---------------------------------------------------------------------------
# STFT and Mel projection


def _frame_count(n_samples: int, hop: int) -> int:
    return int(np.ceil(n_samples / hop))


def stft_mag(audio: np.ndarray, window: int = WINDOW, hop: int = HOP) -> np.ndarray:
    """Magnitude spectrogram of Hann-windowed, reflection-padded centered frames.

    Returns (window//2 + 1) x ceil(len/hop).
    """
    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim != 1:
        raise ValueError("audio must be 1-D")
    if len(audio) < window:
        raise ValueError(f"audio length {len(audio)} shorter than one window ({window})")
    t = _frame_count(len(audio), hop)
    pad = window // 2
    padded = np.pad(audio, pad, mode="reflect")
    starts = np.arange(t) * hop
    frames = np.lib.stride_tricks.as_strided(
        padded, shape=(t, window),
        strides=(padded.strides[0] * hop, padded.strides[0]), writeable=False)
    spec = np.fft.rfft(frames * np.hanning(window), axis=1)
    return np.abs(spec).T


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


_FILTERBANK_CACHE: dict = {}


def mel_filterbank(n_mels: int = N_MELS, n_fft: int = WINDOW,
                   sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular filters evenly spaced on the Mel scale from 0 to Nyquist.

    Each row is scaled to sum to 1 over the DFT bins (area normalization).
    """
    key = (n_mels, n_fft, sample_rate)
    if key not in _FILTERBANK_CACHE:
        nyquist = sample_rate / 2.0
        mel_points = np.linspace(0.0, hz_to_mel(nyquist), n_mels + 2)
        hz_points = mel_to_hz(mel_points)
        bin_freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
        fb = np.zeros((n_mels, len(bin_freqs)))
        for k in range(n_mels):
            left, center, right = hz_points[k], hz_points[k + 1], hz_points[k + 2]
            up = (bin_freqs - left) / (center - left)
            down = (right - bin_freqs) / (right - center)
            fb[k] = np.maximum(0.0, np.minimum(up, down))
            fb[k] /= fb[k].sum()
        _FILTERBANK_CACHE[key] = (fb, hz_points[1:-1].copy())
    return _FILTERBANK_CACHE[key][0]


def mel_center_frequencies(n_mels: int = N_MELS) -> np.ndarray:
    """Center frequency in Hz of each Mel filter."""
    mel_filterbank(n_mels)
    return _FILTERBANK_CACHE[(n_mels, WINDOW, SAMPLE_RATE)][1]


def mel_spectrogram(audio: np.ndarray) -> np.ndarray:
    """80xT linear-magnitude Mel spectrogram, floored at 1e-5."""
    return np.maximum(mel_filterbank() @ stft_mag(audio), MEL_FLOOR)


def tanh_log_compress(s: np.ndarray) -> np.ndarray:
    """tanh(log(S)/4): maps [1e-5, inf) into (-1, 1), strictly increasing.

    Inputs below the 1e-5 magnitude floor are clamped to it first."""
    return np.tanh(0.25 * np.log(np.maximum(s, MEL_FLOOR)))


def tanh_log_expand(p: np.ndarray) -> np.ndarray:
    """Inverse of tanh_log_compress, clamped away from +-1 and floored."""
    p = np.clip(p, -(1.0 - 1e-6), 1.0 - 1e-6)
    return np.maximum(np.exp(4.0 * np.arctanh(p)), MEL_FLOOR)


# ---------------------------------------------------------------------------
# Constant-Q transform


_CQT_KERNEL_CACHE: dict = {}


def cqt_frequencies(n_bins: int = CQT_BINS) -> np.ndarray:
    return CQT_FMIN * 2.0 ** (np.arange(n_bins) / CQT_BINS_PER_OCTAVE)


def _cqt_kernels(sample_rate: int):
    if sample_rate not in _CQT_KERNEL_CACHE:
        q = 1.0 / (2.0 ** (1.0 / CQT_BINS_PER_OCTAVE) - 1.0)
        kernels = []
        for f in cqt_frequencies():
            n = int(round(q * sample_rate / f))
            win = np.hanning(n)
            phase = 2.0 * np.pi * f * np.arange(n) / sample_rate
            norm = win.sum() / 2.0     # unit response to a matched unit sine
            kernels.append(((win * np.cos(phase)) / norm, (win * np.sin(phase)) / norm))
        _CQT_KERNEL_CACHE[sample_rate] = kernels
    return _CQT_KERNEL_CACHE[sample_rate]


def cqt_log_mag(audio: np.ndarray, hop: int = CQT_HOP,
                sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """84-bin log-magnitude constant-Q transform with 12 bins per octave.

    Direct method: per-bin Hann-windowed complex kernels on zero-padded
    centered frames. Natural log, floored at 1e-5.
    """
    audio = np.asarray(audio, dtype=np.float64)
    kernels = _cqt_kernels(sample_rate)
    longest = len(kernels[0][0])
    if len(audio) < longest:
        raise ValueError(f"audio length {len(audio)} shorter than the longest "
                         f"CQT kernel ({longest})")
    t = _frame_count(len(audio), hop)
    pad = longest // 2 + 1
    padded = np.pad(audio, pad)
    centers = np.arange(t) * hop + pad
    out = np.empty((CQT_BINS, t))
    for k, (kc, ks) in enumerate(kernels):
        n = len(kc)
        starts = centers - n // 2
        frames = np.lib.stride_tricks.sliding_window_view(padded, n)[starts]
        out[k] = np.hypot(frames @ kc, frames @ ks)
    return np.log(np.maximum(out, MEL_FLOOR))


# ---------------------------------------------------------------------------
# statistics


def pearson(a, b) -> float:
    """Sample Pearson correlation of two equal-length sequences."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if len(a) != len(b) or len(a) == 0:
        raise ValueError("sequences must have equal nonzero length")
    da = a - a.mean()
    db = b - b.mean()
    va = float(da @ da)
    vb = float(db @ db)
    if va <= 0.0 or vb <= 0.0:
        raise ValueError("zero variance makes the correlation degenerate")
    return float((da @ db) / np.sqrt(va * vb))


def spectral_centroid(mel: np.ndarray) -> float:
    """Energy-weighted mean of the Mel filter center frequencies, in Hz."""
    mel = np.asarray(mel)
    energy = mel.sum(axis=1) if mel.ndim == 2 else mel
    freqs = mel_center_frequencies(len(energy))
    return float((freqs @ energy) / energy.sum())


def mean_energy(mel: np.ndarray) -> float:
    """20*log10 of the mean linear magnitude, in dB."""
    return float(20.0 * np.log10(np.asarray(mel).mean()))


# ---------------------------------------------------------------------------
# Griffin-Lim preview inversion


_PINV_CACHE: dict = {}


def _mel_pinv() -> np.ndarray:
    if "pinv" not in _PINV_CACHE:
        _PINV_CACHE["pinv"] = np.linalg.pinv(mel_filterbank())
    return _PINV_CACHE["pinv"]


def _istft(spec: np.ndarray, n_samples: int, window: int = WINDOW, hop: int = HOP) -> np.ndarray:
    win = np.hanning(window)
    frames = np.fft.irfft(spec.T, n=window, axis=1) * win
    t = spec.shape[1]
    pad = window // 2
    total = (t - 1) * hop + window
    acc = np.zeros(total)
    norm = np.zeros(total)
    for i in range(t):
        acc[i * hop:i * hop + window] += frames[i]
        norm[i * hop:i * hop + window] += win ** 2
    acc /= np.maximum(norm, 1e-8)
    return acc[pad:pad + n_samples]


def griffin_lim(mel: np.ndarray, iterations: int = 60) -> np.ndarray:
    """Pseudo-invert the Mel projection and reconstruct phase iteratively.

    Deterministic (zero initial phase). Returns raw, un-normalized samples of
    length T*hop.
    """
    mel = np.asarray(mel, dtype=np.float64)
    target = np.maximum(_mel_pinv() @ mel, 0.0)
    n_samples = mel.shape[1] * HOP
    spec = target.astype(np.complex128)
    for _ in range(iterations):
        audio = _istft(spec, n_samples)
        analysis = np.fft.rfft(
            np.lib.stride_tricks.sliding_window_view(np.pad(audio, WINDOW // 2, mode="reflect"),
                                                     WINDOW)[::HOP][:mel.shape[1]] * np.hanning(WINDOW),
            axis=1).T
        spec = target * np.exp(1j * np.angle(analysis))
    return _istft(spec, n_samples)


def griffin_lim_preview(mel: np.ndarray, iterations: int = 60) -> np.ndarray:
    """Fast preview waveform for a linear Mel spectrogram, peak-normalized
    to 0.95. Gain is capped at 100x so a silent (floor-valued) Mel comes
    back as near-silence instead of amplified reconstruction noise."""
    audio = griffin_lim(mel, iterations)
    peak = np.max(np.abs(audio))
    if peak > 0.0:
        audio = audio * min(0.95 / peak, 100.0)
    return audio
