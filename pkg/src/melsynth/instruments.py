"""Deterministic additive-synthesis instrument bank.

A patch is a sparse set of harmonic partials with a dB-per-octave spectral
tilt, shaped by an ADSR envelope. The ten built-in patches span two
perceptual axes: transient versus sustained envelopes and dark versus
bright spectra. Rendering is pure numpy and fully determined by the note
list and patch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import SAMPLE_RATE
from .midi import NoteEvent

PATCH_BANK_VERSION = 1


@dataclass(frozen=True)
class Patch:
    name: str
    partials: tuple[tuple[int, float], ...]  # (harmonic index, relative amplitude)
    attack: float        # seconds
    decay_rate: float    # 1/seconds, exponential approach to the sustain level
    sustain: float       # level in [0, 1]; 0 makes a pluck
    release: float       # seconds of exponential tail after note-off
    rolloff: float       # extra spectral tilt, dB per octave

    def __post_init__(self):
        if any(k < 1 or a < 0 for k, a in self.partials):
            raise ValueError("partials need index >= 1 and nonnegative amplitude")
        if self.attack < 0 or self.release < 0 or not 0 <= self.sustain <= 1:
            raise ValueError("invalid envelope for patch " + self.name)


def _all(n: int) -> tuple[tuple[int, float], ...]:
    return tuple((k, 1.0) for k in range(1, n + 1))


def _odd(n: int) -> tuple[tuple[int, float], ...]:
    return tuple((k, 1.0 / k) for k in range(1, n + 1, 2))


def builtin_patch_bank() -> tuple[Patch, ...]:
    """Ten patches covering transient<->sustained and dark<->bright."""
    return (
        Patch("epiano", ((1, 1.0), (2, 0.40), (3, 0.25), (4, 0.20), (5, 0.12),
                         (6, 0.08), (7, 0.05), (8, 0.04)),
              attack=0.004, decay_rate=1.8, sustain=0.0, release=0.15, rolloff=4.0),
        Patch("pluck_dark", ((1, 1.0), (2, 0.50), (3, 0.30), (4, 0.20)),
              attack=0.002, decay_rate=6.0, sustain=0.0, release=0.08, rolloff=9.0),
        Patch("pluck_bright", _all(16),
              attack=0.002, decay_rate=2.5, sustain=0.0, release=0.12, rolloff=3.0),
        Patch("marimba", ((1, 1.0), (3, 0.40), (8, 0.15)),
              attack=0.002, decay_rate=9.0, sustain=0.0, release=0.05, rolloff=6.0),
        Patch("organ", ((1, 1.0), (2, 0.70), (3, 0.45), (4, 0.50), (5, 0.20),
                        (6, 0.25), (8, 0.30)),
              attack=0.010, decay_rate=4.0, sustain=1.0, release=0.05, rolloff=2.0),
        Patch("flute_soft", ((1, 1.0), (2, 0.25), (3, 0.08), (4, 0.03)),
              attack=0.080, decay_rate=3.0, sustain=0.90, release=0.10, rolloff=10.0),
        Patch("brass_bright", _all(20),
              attack=0.030, decay_rate=5.0, sustain=0.85, release=0.12, rolloff=2.5),
        Patch("strings", _all(12),
              attack=0.120, decay_rate=4.0, sustain=0.80, release=0.25, rolloff=4.5),
        Patch("square_lead", _odd(15),
              attack=0.008, decay_rate=5.0, sustain=0.90, release=0.06, rolloff=1.0),
        Patch("sub_sine", ((1, 1.0), (2, 0.05)),
              attack=0.006, decay_rate=3.0, sustain=0.70, release=0.09, rolloff=12.0),
    )


PATCHES = builtin_patch_bank()
N_INSTRUMENTS = len(PATCHES)
PATCH_INDEX = {p.name: i for i, p in enumerate(PATCHES)}


def _adsr(n_on: int, n_rel: int, patch: Patch, sr: int) -> np.ndarray:
    idx = np.arange(n_on)
    na = max(1, int(round(patch.attack * sr)))
    attack = np.minimum(idx / na, 1.0)
    decay = patch.sustain + (1.0 - patch.sustain) * np.exp(
        -patch.decay_rate * np.maximum(idx - na, 0) / sr)
    env = np.empty(n_on + n_rel)
    env[:n_on] = attack * decay
    level = env[n_on - 1] if n_on else 0.0
    if n_rel:
        env[n_on:] = level * np.exp(-5.0 * np.arange(1, n_rel + 1) / n_rel)
    return env


def pitch_to_hz(pitch: int) -> float:
    return 440.0 * 2.0 ** ((pitch - 69) / 12.0)


def render_note(note: NoteEvent, patch: Patch,
                sr: int = SAMPLE_RATE) -> tuple[int, np.ndarray]:
    """Render one note; returns (start sample, samples incl. release tail).

    Amplitude is linear in velocity/127; this is the pre-normalization level.
    """
    start = int(round(note.onset_time * sr))
    n_on = max(1, int(round((note.offset_time - note.onset_time) * sr)))
    n_rel = int(round(patch.release * sr))
    env = _adsr(n_on, n_rel, patch, sr)
    f0 = pitch_to_hz(note.pitch)
    t = np.arange(len(env)) / sr
    out = np.zeros(len(env))
    nyquist = sr / 2.0
    for k, a in patch.partials:
        fk = f0 * k
        if fk >= nyquist or a == 0.0:
            continue
        tilt = 10.0 ** (-patch.rolloff * np.log2(k) / 20.0)
        out += a * tilt * np.sin(2.0 * np.pi * fk * t)
    out *= env * (note.velocity / 127.0)
    return start, out


def render_track(events, instrument: int | str, n_samples: int,
                 sr: int = SAMPLE_RATE, normalize: bool = True) -> np.ndarray:
    """Mix all notes of one patch into a fixed-length buffer.

    The polyphonic sum is peak-normalized to 0.9 (skipped for silence, or
    when normalize=False for inspecting raw levels). Release tails are kept
    but truncated at the buffer end.
    """
    patch = PATCHES[PATCH_INDEX[instrument]] if isinstance(instrument, str) \
        else PATCHES[instrument]
    out = np.zeros(n_samples)
    for note in events:
        start, samples = render_note(note, patch, sr)
        if start >= n_samples:
            continue
        stop = min(start + len(samples), n_samples)
        out[start:stop] += samples[:stop - start]
    if normalize and n_samples:
        peak = np.max(np.abs(out))
        if peak > 0.0:
            out *= 0.9 / peak
    return out


PROBE_PITCH = 60       # C4
PROBE_VELOCITY = 100
PROBE_HELD = 1.0       # seconds held
PROBE_TOTAL = 1.5      # seconds rendered


def probe_events() -> list[NoteEvent]:
    """The fixed probe note used for patch margins and the embedding grid."""
    return [NoteEvent(pitch=PROBE_PITCH, velocity=PROBE_VELOCITY,
                      onset_time=0.0, offset_time=PROBE_HELD)]


def patch_margins() -> list[dict]:
    """Pairwise (spectral centroid, mean energy) separation of all patches
    on the fixed probe note."""
    from .dsp import mel_spectrogram, spectral_centroid, mean_energy

    n = int(PROBE_TOTAL * SAMPLE_RATE)
    stats = []
    for i, p in enumerate(PATCHES):
        mel = mel_spectrogram(render_track(probe_events(), i, n))
        stats.append((p.name, spectral_centroid(mel), mean_energy(mel)))
    margins = []
    for i in range(len(stats)):
        for j in range(i + 1, len(stats)):
            margins.append({
                "a": stats[i][0], "b": stats[j][0],
                "centroid_delta_hz": abs(stats[i][1] - stats[j][1]),
                "energy_delta_db": abs(stats[i][2] - stats[j][2]),
            })
    return margins
