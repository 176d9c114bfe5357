"""HTTP synthesis service.

Endpoints:
  POST /synthesize   JSON request (MIDI as base64) -> JSON with the Mel
                     matrix and optional WAV as base64; ?format=mel or
                     ?format=wav returns the raw binary attachment instead.
  GET  /embeddings   instrument names and learned 2-D coordinates.
  GET  /grid         precomputed centroid/energy maps (?map=centroid|energy)
                     in the binary matrix format.
  GET  /health       status plus checkpoint metadata.

Static files (the UI bundle) are served from the directory given to
create_app, when present. Checkpoints are read from the directory in the
MELSYNTH_CHECKPOINTS environment variable unless given explicitly:
mel2mel.bin (required), wavenet.bin, grid_centroid.mat, grid_energy.mat.
"""

from __future__ import annotations

import base64
import os
import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .checkpoint import load_model
from .dsp import SAMPLE_RATE
from .formats import matrix_to_bytes, wav_to_bytes
from .instruments import PATCHES
from .midi import MidiParseError
from .model import Mel2Mel
from .synthesis import SynthesisRequest, synthesize
from .wavenet import WaveNet

CHECKPOINT_ENV = "MELSYNTH_CHECKPOINTS"
MEL2MEL_FILE = "mel2mel.bin"
WAVENET_FILE = "wavenet.bin"
GRID_FILES = {"centroid": "grid_centroid.mat", "energy": "grid_energy.mat"}


@dataclass
class ServiceState:
    mel2mel: Mel2Mel
    mel2mel_meta: dict
    wavenet: WaveNet | None = None
    wavenet_meta: dict | None = None
    grid: dict[str, bytes] = field(default_factory=dict)
    max_wavenet_streams: int = 1

    def __post_init__(self):
        # caps concurrent autoregressive sampling streams; preview requests
        # run unrestricted over the read-only snapshot
        self._wavenet_gate = threading.BoundedSemaphore(self.max_wavenet_streams)


def load_state(directory: str | None = None,
               max_wavenet_streams: int = 1) -> ServiceState:
    directory = directory or os.environ.get(CHECKPOINT_ENV)
    if not directory:
        raise RuntimeError(f"no checkpoint directory; set {CHECKPOINT_ENV} "
                           "or pass --checkpoints")
    mel_path = os.path.join(directory, MEL2MEL_FILE)
    if not os.path.exists(mel_path):
        raise RuntimeError(f"missing {mel_path}")
    mel2mel, mel_meta, _ = load_model(mel_path)
    wavenet = wn_meta = None
    wn_path = os.path.join(directory, WAVENET_FILE)
    if os.path.exists(wn_path):
        wavenet, wn_meta, _ = load_model(wn_path)
    grid = {}
    for name, filename in GRID_FILES.items():
        path = os.path.join(directory, filename)
        if os.path.exists(path):
            with open(path, "rb") as fh:
                grid[name] = fh.read()
    return ServiceState(mel2mel, mel_meta, wavenet, wn_meta, grid,
                        max_wavenet_streams)


class MorphBody(BaseModel):
    a: int
    b: int
    lam: float = 0.5


class SynthesizeBody(BaseModel):
    midi_b64: str | None = None
    instrument: int | None = None
    embedding: list[float] | None = None
    morph: MorphBody | None = None
    vocoder: str = "preview"
    temperature: float = 1.0
    seed: int = 0


def _meta_summary(meta: dict | None) -> dict | None:
    if meta is None:
        return None
    return {"kind": meta.get("kind"), "config": meta.get("config"),
            "iteration": meta.get("iteration")}


def create_app(state: ServiceState, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="melsynth")

    @app.get("/health")
    def health():
        return {"status": "ok",
                "sample_rate": SAMPLE_RATE,
                "mel2mel": _meta_summary(state.mel2mel_meta),
                "wavenet": _meta_summary(state.wavenet_meta),
                "grid_maps": sorted(state.grid)}

    @app.get("/embeddings")
    def embeddings():
        table = state.mel2mel.embedding_vectors()
        return {"dim": int(table.shape[0]),
                "names": [p.name for p in PATCHES[:table.shape[1]]],
                "coordinates": table.T.tolist()}

    @app.get("/grid")
    def grid(map: str = "centroid"):
        if map not in GRID_FILES:
            raise HTTPException(400, f"map must be one of {sorted(GRID_FILES)}")
        if map not in state.grid:
            raise HTTPException(404, f"grid map {map!r} not precomputed; run "
                                     "`melsynth eval grid` into the checkpoint "
                                     "directory")
        return Response(state.grid[map], media_type="application/octet-stream")

    @app.post("/synthesize")
    def synthesize_endpoint(body: SynthesizeBody, format: str = "json"):
        if format not in ("json", "mel", "wav"):
            raise HTTPException(400, "format must be json, mel or wav")
        midi_data = None
        if body.midi_b64 is not None:
            try:
                midi_data = base64.b64decode(body.midi_b64, validate=True)
            except Exception:
                raise HTTPException(400, "midi_b64 is not valid base64")
        request = SynthesisRequest(
            midi_data=midi_data,
            instrument=body.instrument,
            embedding=None if body.embedding is None else np.asarray(body.embedding),
            morph=None if body.morph is None else (body.morph.a, body.morph.b,
                                                   body.morph.lam),
            vocoder=body.vocoder,
            temperature=body.temperature,
            seed=body.seed)
        if request.vocoder == "wavenet" and state.wavenet is None:
            raise HTTPException(503, "no wavenet checkpoint loaded")
        try:
            if request.vocoder == "wavenet":
                with state._wavenet_gate:
                    result = synthesize(state.mel2mel, state.wavenet, request)
            else:
                result = synthesize(state.mel2mel, state.wavenet, request)
        except MidiParseError as err:
            raise HTTPException(400, {"error": str(err), "offset": err.offset})
        except ValueError as err:
            raise HTTPException(400, str(err))

        mel_bytes = matrix_to_bytes(result.mel)
        if format == "mel":
            return Response(mel_bytes, media_type="application/octet-stream")
        if format == "wav":
            if result.wav is None:
                raise HTTPException(400, "no waveform for vocoder 'none'")
            return Response(wav_to_bytes(result.wav), media_type="audio/wav")
        return JSONResponse({
            "frames": int(result.mel.shape[1]),
            "sample_rate": SAMPLE_RATE,
            "mel_b64": base64.b64encode(mel_bytes).decode("ascii"),
            "wav_b64": None if result.wav is None
            else base64.b64encode(wav_to_bytes(result.wav)).decode("ascii"),
            "timings_ms": result.timings_ms})

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
