"""Signal-processing oracles: every expected value here is computed from a
closed form or a first-principles property, not from the implementation."""

import numpy as np
import pytest

from melsynth import dsp


def sine(freq: float, seconds: float = 1.0, amp: float = 1.0) -> np.ndarray:
    t = np.arange(int(seconds * dsp.SAMPLE_RATE)) / dsp.SAMPLE_RATE
    return amp * np.sin(2.0 * np.pi * freq * t)


# -- mu-law -----------------------------------------------------------------


def test_mulaw_roundtrip_identity_all_codes():
    codes = np.arange(dsp.MULAW_LEVELS)
    assert np.array_equal(dsp.mulaw_encode(dsp.mulaw_decode(codes)), codes)


def test_mulaw_known_codes():
    # mu=255: y(0.5) = ln(1 + 127.5)/ln(256) -> code floor((y+1)/2*255 + .5)
    y = np.log(1 + 255 * 0.5) / np.log(256)
    expected = int(np.floor((y + 1) / 2 * 255 + 0.5))
    assert expected == 239
    assert dsp.mulaw_encode(0.5) == expected
    assert dsp.mulaw_encode(0.0) == 128 == dsp.SILENCE_CODE
    assert dsp.mulaw_encode(1.0) == 255
    assert dsp.mulaw_encode(-1.0) == 0


def test_mulaw_clips_out_of_range():
    assert dsp.mulaw_encode(2.0) == 255
    assert dsp.mulaw_encode(-2.0) == 0


def test_mulaw_decode_validates_codes():
    with pytest.raises(ValueError):
        dsp.mulaw_decode(np.array([256]))
    with pytest.raises(ValueError):
        dsp.mulaw_decode(np.array([-1]))


def test_mulaw_quantization_error_bound():
    x = np.linspace(-1, 1, 4001)
    back = dsp.mulaw_decode(dsp.mulaw_encode(x))
    # companding: error shrinks near zero, bounded by half a step at peak
    assert np.abs(back - x).max() < np.log(256) / 255 * 1.2
    assert np.abs(back[2000] - x[2000]) < 1e-3


# -- STFT / Mel ---------------------------------------------------------------


def test_stft_shape_and_frame_count():
    for n in (16000, 16001, 12345):
        mag = dsp.stft_mag(np.zeros(n))
        assert mag.shape == (dsp.WINDOW // 2 + 1, int(np.ceil(n / dsp.HOP)))


def test_stft_peak_scale_on_sine():
    # a unit sine under a Hann window peaks at ~ sum(window)/2 on its bin
    mag = dsp.stft_mag(sine(1000.0))
    peak = mag[:, 50].max()
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(dsp.WINDOW) / dsp.WINDOW)
    assert abs(peak - window.sum() / 2) / (window.sum() / 2) < 0.05


def test_mel_filterbank_row_sums_one():
    fb = dsp.mel_filterbank()
    assert fb.shape == (dsp.N_MELS, dsp.WINDOW // 2 + 1)
    assert np.abs(fb.sum(axis=1) - 1.0).max() < 1e-6
    assert (fb >= 0).all()


def test_mel_scale_closed_form():
    assert np.isclose(dsp.hz_to_mel(700.0), 2595.0 * np.log10(2.0))
    assert np.isclose(dsp.mel_to_hz(dsp.hz_to_mel(440.0)), 440.0)


def test_mel_peak_tracks_sine_frequency():
    centers = dsp.mel_center_frequencies()
    for freq in (261.63, 1000.0, 3000.0):
        mel = dsp.mel_spectrogram(sine(freq))
        assert mel[:, 40].argmax() == np.abs(centers - freq).argmin()


def test_mel_floor():
    mel = dsp.mel_spectrogram(np.zeros(16000))
    assert (mel == dsp.MEL_FLOOR).all()


# -- tanh-log domain ----------------------------------------------------------


def test_tanh_log_floor_value():
    expected = np.tanh(np.log(dsp.MEL_FLOOR) / 4.0)
    out = dsp.tanh_log_compress(np.array([0.0, dsp.MEL_FLOOR / 10, dsp.MEL_FLOOR]))
    assert np.allclose(out, expected)


def test_tanh_log_roundtrip():
    s = np.logspace(-5, 2, 50)
    assert np.allclose(dsp.tanh_log_expand(dsp.tanh_log_compress(s)), s,
                       rtol=1e-10)
    p = np.linspace(-0.99, 0.99, 41)
    assert np.allclose(dsp.tanh_log_compress(dsp.tanh_log_expand(p)), p,
                       rtol=1e-10)


def test_tanh_log_monotone_and_bounded():
    s = np.logspace(-5, 3, 100)
    p = dsp.tanh_log_compress(s)
    assert (np.diff(p) > 0).all()
    assert (np.abs(p) < 1).all()


# -- CQT ----------------------------------------------------------------------


def test_cqt_frequencies_geometric():
    freqs = dsp.cqt_frequencies()
    assert freqs.shape == (dsp.CQT_BINS,)
    assert np.isclose(freqs[0], 32.70)
    assert np.allclose(freqs[12] / freqs[0], 2.0)


def test_cqt_octave_shift_property():
    # acceptance oracle: shifting a tone by +-1 octave moves the peak +-12 bins
    base = dsp.cqt_log_mag(sine(220.0))
    up = dsp.cqt_log_mag(sine(440.0))
    down = dsp.cqt_log_mag(sine(110.0))
    col = base.shape[1] // 2
    assert up[:, col].argmax() - base[:, col].argmax() == 12
    assert base[:, col].argmax() - down[:, col].argmax() == 12


def test_cqt_shape_and_floor():
    out = dsp.cqt_log_mag(np.zeros(16000))
    assert out.shape[0] == dsp.CQT_BINS
    assert np.allclose(out, np.log(1e-5))


def test_cqt_rejects_too_short_input():
    with pytest.raises(ValueError):
        dsp.cqt_log_mag(np.zeros(4096))


# -- statistics ---------------------------------------------------------------


def test_pearson_closed_form():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    y = np.array([1.0, 2.0, 3.0, 5.0])
    expected = 6.5 / np.sqrt(5.0 * 8.75)
    assert abs(dsp.pearson(x, y) - expected) < 1e-4
    assert abs(dsp.pearson(x, 2.0 * x + 1.0) - 1.0) < 1e-12
    assert abs(dsp.pearson(x, -x) + 1.0) < 1e-12


def test_pearson_zero_variance_raises():
    with pytest.raises(ValueError):
        dsp.pearson(np.ones(4), np.arange(4.0))


def test_spectral_centroid_tracks_sine():
    mel = dsp.mel_spectrogram(sine(1000.0))
    assert abs(dsp.spectral_centroid(mel) - 1000.0) < 50.0
    bright = dsp.spectral_centroid(dsp.mel_spectrogram(sine(3000.0)))
    dark = dsp.spectral_centroid(dsp.mel_spectrogram(sine(200.0)))
    assert bright > dark


def test_mean_energy_closed_form():
    assert np.isclose(dsp.mean_energy(np.full((80, 7), 0.5)),
                      20.0 * np.log10(0.5))


# -- Griffin-Lim ---------------------------------------------------------------


def test_griffin_lim_reconstructs_sine_spectrum():
    audio = sine(440.0, seconds=0.5, amp=0.8)
    mel = dsp.mel_spectrogram(audio)
    rec = dsp.griffin_lim_preview(mel)
    assert len(rec) == mel.shape[1] * dsp.HOP
    assert np.isclose(np.abs(rec).max(), 0.95, atol=1e-6)
    mel_rec = dsp.mel_spectrogram(rec[:len(audio)])
    r = dsp.pearson(np.log(mel).ravel(),
                    np.log(mel_rec[:, :mel.shape[1]]).ravel())
    assert r > 0.9


def test_griffin_lim_silence_is_silent():
    rec = dsp.griffin_lim_preview(np.full((dsp.N_MELS, 10), dsp.MEL_FLOOR))
    assert np.abs(rec).max() < 1e-3
