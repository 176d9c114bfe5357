"""Evaluation analyses: CQT degradation curves, per-instrument breakdowns,
embedding-space grid maps, and morph paths.

Degradation compares each pipeline stage's audio to the original through
per-CQT-bin Pearson correlation over time, smoothed per octave. Bins whose
log-CQT is constant (all-floor) have undefined correlation and are carried
as NaN, then excluded from octave means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .dsp import (CQT_BINS_PER_OCTAVE, cqt_log_mag, mel_center_frequencies,
                  mulaw_decode, mulaw_encode, tanh_log_expand)
from .instruments import probe_events
from .midi import DEFAULT_STEP_SECONDS, concat_input, encode_piano_roll
from .model import Mel2Mel
from .nn import DTYPE
from .wavenet import WaveNet, generate

STAGES = ("original", "mulaw_roundtrip", "wavenet_ground_truth_mel",
          "wavenet_predicted_mel")


@dataclass
class CorrelationCurve:
    stage: str
    instrument: int | None          # None marks the aggregate curve
    bins: np.ndarray                # (84,) Pearson per CQT bin, NaN degenerate
    octaves: np.ndarray             # (7,) NaN-aware mean per 12-bin group


def rowwise_pearson(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pearson per row over the time axis; zero-variance rows give NaN."""
    da = a - a.mean(axis=1, keepdims=True)
    db = b - b.mean(axis=1, keepdims=True)
    va = (da * da).sum(axis=1)
    vb = (db * db).sum(axis=1)
    out = np.full(a.shape[0], np.nan)
    ok = (va > 0) & (vb > 0)
    out[ok] = (da * db).sum(axis=1)[ok] / np.sqrt(va[ok] * vb[ok])
    return out


def nan_mean(values: np.ndarray, axis=None) -> np.ndarray:
    """nanmean without the empty-slice warning; all-NaN groups stay NaN."""
    mask = np.isfinite(values)
    total = np.where(mask, values, 0.0).sum(axis=axis)
    count = mask.sum(axis=axis)
    return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def octave_means(bins: np.ndarray) -> np.ndarray:
    return nan_mean(bins.reshape(-1, CQT_BINS_PER_OCTAVE), axis=1)


def correlation_bins(original: np.ndarray, other: np.ndarray) -> np.ndarray:
    return rowwise_pearson(cqt_log_mag(original), cqt_log_mag(other))


def predict_entry_mel(model: Mel2Mel, corpus: Corpus, entry_index: int) -> np.ndarray:
    """Linear-magnitude Mel predicted from one entry's roll and instrument."""
    e = corpus.entries[entry_index]
    roll = corpus.rolls[e.track][:, None, :]
    return model.predict_mel(roll, np.asarray([e.instrument]))[:, 0, :]


def stage_audio(stage: str, corpus: Corpus, entry_index: int,
                mel2mel: Mel2Mel | None = None, wavenet: WaveNet | None = None,
                seed: int = 0) -> np.ndarray:
    e = corpus.entries[entry_index]
    audio = e.audio.astype(np.float64)
    if stage == "original":
        return audio
    if stage == "mulaw_roundtrip":
        return mulaw_decode(mulaw_encode(audio))
    if stage == "wavenet_ground_truth_mel":
        if wavenet is None:
            raise ValueError(f"stage {stage!r} needs a wavenet checkpoint")
        return generate(wavenet, e.mel, seed=seed)
    if stage == "wavenet_predicted_mel":
        if wavenet is None or mel2mel is None:
            raise ValueError(f"stage {stage!r} needs both checkpoints")
        mel = predict_entry_mel(mel2mel, corpus, entry_index)
        return generate(wavenet, mel, seed=seed)
    raise ValueError(f"unknown stage {stage!r}")


def degradation_curves(corpus: Corpus, stages=STAGES,
                       mel2mel: Mel2Mel | None = None,
                       wavenet: WaveNet | None = None,
                       entry_indices=None, seed: int = 0,
                       progress=None) -> list[CorrelationCurve]:
    """One curve per (stage, instrument) plus a per-stage aggregate.

    Per entry, Pearson is computed against that entry's original audio; the
    instrument curve is the NaN-aware mean over its entries, the aggregate
    the mean over all entries (so instruments weight by track count)."""
    if entry_indices is None:
        entry_indices = corpus.indices("validation") or corpus.indices("all")
    per_entry: dict[str, list[tuple[int, np.ndarray]]] = {s: [] for s in stages}
    for idx in entry_indices:
        original = corpus.entries[idx].audio.astype(np.float64)
        cqt_orig = cqt_log_mag(original)
        for stage in stages:
            if stage == "original":
                bins = rowwise_pearson(cqt_orig, cqt_orig)
            else:
                audio = stage_audio(stage, corpus, idx, mel2mel, wavenet, seed)
                bins = rowwise_pearson(cqt_orig, cqt_log_mag(audio))
            per_entry[stage].append((corpus.entries[idx].instrument, bins))
            if progress is not None:
                progress(f"{stage} entry {idx}")
    curves = []
    for stage in stages:
        rows = per_entry[stage]
        instruments = sorted({i for i, _ in rows})
        for inst in instruments:
            mean = nan_mean(np.stack([b for i, b in rows if i == inst]), axis=0)
            curves.append(CorrelationCurve(stage, inst, mean, octave_means(mean)))
        aggregate = nan_mean(np.stack([b for _, b in rows]), axis=0)
        curves.append(CorrelationCurve(stage, None, aggregate,
                                       octave_means(aggregate)))
    return curves


def per_instrument_breakdown(curves: list[CorrelationCurve],
                             stage: str = "wavenet_predicted_mel") -> list[CorrelationCurve]:
    return [c for c in curves if c.stage == stage and c.instrument is not None]


def aggregate_mean(curves: list[CorrelationCurve], stage: str) -> float:
    """NaN-aware mean over the aggregate curve's octave values."""
    for c in curves:
        if c.stage == stage and c.instrument is None:
            return float(nan_mean(c.octaves))
    raise ValueError(f"no aggregate curve for stage {stage!r}")


# ---------------------------------------------------------------------------
# embedding grid and morphing


def probe_roll(total_seconds: float = 1.5) -> np.ndarray:
    """(176, T) roll of the fixed probe note (C4, velocity 100, 1 s held)."""
    t_steps = int(np.ceil(total_seconds / DEFAULT_STEP_SECONDS))
    return concat_input(encode_piano_roll(probe_events(), t_steps=t_steps))


@dataclass
class GridResult:
    centroid: np.ndarray        # (res, res), Hz; rows index y, columns x
    energy: np.ndarray          # (res, res), dB
    x_coords: np.ndarray        # (res,) embedding x per column (pixel centers)
    y_coords: np.ndarray        # (res,) embedding y per row
    embeddings: np.ndarray      # (2, n_instruments) learned coordinates
    pixels: np.ndarray          # (n_instruments, 2) fractional (col, row)

    @property
    def resolution(self) -> int:
        return self.centroid.shape[0]


def grid_bounds(embeddings: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bounding box of the embeddings expanded 10% (5% per side)."""
    lo = embeddings.min(axis=1)
    hi = embeddings.max(axis=1)
    span = hi - lo
    pad = np.where(span > 0, 0.05 * span, np.maximum(0.05 * np.abs(lo), 1e-3))
    return lo - pad, hi + pad


def _mel_stats(p_compressed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spectral centroid (Hz) and mean energy (dB) per batch column of a
    (80, B, T) tanh-log prediction."""
    mel = tanh_log_expand(p_compressed.astype(np.float64))
    freqs = mel_center_frequencies(mel.shape[0])
    energy_per_filter = mel.sum(axis=2)
    total = energy_per_filter.sum(axis=0)
    centroid = freqs @ energy_per_filter / total
    energy_db = 20.0 * np.log10(mel.mean(axis=(0, 2)))
    return centroid, energy_db


def embedding_grid(model: Mel2Mel, resolution: int = 320,
                   roll: np.ndarray | None = None,
                   progress=None) -> GridResult:
    """Forward the probe at every pixel of the expanded embedding bbox."""
    if model.config.embedding_dim != 2:
        raise ValueError("grid rendering needs a 2-D embedding space; project "
                         "higher-dimensional models down before gridding")
    if roll is None:
        roll = probe_roll()
    emb = model.embedding_vectors()
    lo, hi = grid_bounds(emb)
    x = lo[0] + (np.arange(resolution) + 0.5) * (hi[0] - lo[0]) / resolution
    y = lo[1] + (np.arange(resolution) + 0.5) * (hi[1] - lo[1]) / resolution
    roll_row = np.broadcast_to(roll[:, None, :].astype(DTYPE),
                               (roll.shape[0], resolution, roll.shape[1]))
    roll_row = np.ascontiguousarray(roll_row)
    centroid = np.empty((resolution, resolution))
    energy = np.empty((resolution, resolution))
    for row in range(resolution):
        z = np.stack([x, np.full(resolution, y[row])], axis=0)
        p = model.forward_at(roll_row, z)
        centroid[row], energy[row] = _mel_stats(p)
        if progress is not None and (row + 1) % 32 == 0:
            progress(f"grid row {row + 1}/{resolution}")
    pixels = np.stack([(emb[0] - lo[0]) / (hi[0] - lo[0]) * resolution - 0.5,
                       (emb[1] - lo[1]) / (hi[1] - lo[1]) * resolution - 0.5],
                      axis=1)
    return GridResult(centroid, energy, x, y, emb, pixels)


def grid_point_stats(model: Mel2Mel, z: np.ndarray,
                     roll: np.ndarray | None = None) -> tuple[float, float]:
    """Direct (centroid, energy) evaluation at one embedding point."""
    if roll is None:
        roll = probe_roll()
    p = model.forward_at(roll[:, None, :].astype(DTYPE),
                         np.asarray(z, dtype=DTYPE).reshape(2, 1))
    c, e = _mel_stats(p)
    return float(c[0]), float(e[0])


def morph_path(model: Mel2Mel, a: np.ndarray, b: np.ndarray, steps: int,
               roll: np.ndarray | None = None) -> list[np.ndarray]:
    """Tanh-log Mel predictions at evenly spaced points from a to b.

    Each step runs its own single-item forward, so the endpoints reproduce
    stand-alone evaluations of a and b exactly."""
    if steps < 2:
        raise ValueError("steps must be at least 2")
    if roll is None:
        roll = probe_roll()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = []
    for lam in np.linspace(0.0, 1.0, steps):
        z = ((1.0 - lam) * a + lam * b).reshape(2, 1)
        p = model.forward_at(roll[:, None, :].astype(DTYPE), z.astype(DTYPE))
        out.append(p[:, 0, :])
    return out
