"""End-to-end synthesis shared by the CLI and the HTTP service.

A request names exactly one embedding source (instrument id, raw coordinate,
or a morph between two instruments), a MIDI payload or the built-in probe
note, and a vocoder. The Mel prediction is returned in the compressed
tanh-log domain; both front ends dump it through the same matrix writer, so
their bytes agree.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dsp import griffin_lim_preview, tanh_log_expand
from .evaluate import probe_roll
from .midi import concat_input, encode_piano_roll, parse_midi
from .model import Mel2Mel
from .nn import DTYPE
from .wavenet import WaveNet, generate

VOCODERS = ("preview", "wavenet", "none")


@dataclass
class SynthesisRequest:
    midi_data: bytes | None = None          # None selects the probe note
    instrument: int | None = None
    embedding: np.ndarray | None = None
    morph: tuple[int, int, float] | None = None   # (a, b, lambda)
    vocoder: str = "preview"
    temperature: float = 1.0
    seed: int = 0


@dataclass
class SynthesisResult:
    mel: np.ndarray                          # (80, T) float32, tanh-log domain
    wav: np.ndarray | None                   # float samples, len == T * 128
    timings_ms: dict = field(default_factory=dict)


def resolve_embedding(model: Mel2Mel, request: SynthesisRequest) -> np.ndarray:
    """Exactly one of instrument / embedding / morph must be present."""
    given = [request.instrument is not None, request.embedding is not None,
             request.morph is not None]
    if sum(given) != 1:
        raise ValueError("specify exactly one of instrument, embedding, morph")
    table = model.embedding_vectors()
    n = table.shape[1]
    if request.instrument is not None:
        if not 0 <= request.instrument < n:
            raise ValueError(f"instrument id outside 0..{n - 1}")
        return table[:, request.instrument].astype(np.float64)
    if request.embedding is not None:
        z = np.asarray(request.embedding, dtype=np.float64).ravel()
        if z.shape != (table.shape[0],):
            raise ValueError(f"embedding must have dimension {table.shape[0]}, "
                             f"got {z.shape[0]}")
        return z
    a, b, lam = request.morph
    if not (0 <= a < n and 0 <= b < n):
        raise ValueError(f"morph endpoints outside 0..{n - 1}")
    return (1.0 - lam) * table[:, a] + lam * table[:, b]


def synthesize(mel2mel: Mel2Mel, wavenet: WaveNet | None,
               request: SynthesisRequest) -> SynthesisResult:
    if request.vocoder not in VOCODERS:
        raise ValueError(f"unknown vocoder {request.vocoder!r}")
    timings = {}
    t0 = time.perf_counter()
    if request.midi_data is None:
        roll = probe_roll()
    else:
        roll = concat_input(encode_piano_roll(parse_midi(request.midi_data)))
    z = resolve_embedding(mel2mel, request)
    timings["prepare"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    p = mel2mel.forward_at(roll[:, None, :].astype(DTYPE),
                           z.reshape(-1, 1).astype(DTYPE))[:, 0, :]
    timings["mel2mel"] = (time.perf_counter() - t0) * 1e3

    wav = None
    t0 = time.perf_counter()
    if request.vocoder == "preview":
        wav = griffin_lim_preview(tanh_log_expand(p.astype(np.float64)))
    elif request.vocoder == "wavenet":
        if wavenet is None:
            raise RuntimeError("no wavenet checkpoint loaded")
        wav = generate(wavenet, tanh_log_expand(p.astype(np.float64)),
                       seed=request.seed, temperature=request.temperature)
    timings["vocoder"] = (time.perf_counter() - t0) * 1e3
    return SynthesisResult(mel=p.astype(np.float32), wav=wav, timings_ms=timings)
