"""HTTP service endpoints, exercised in-process."""

import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from melsynth.checkpoint import save_model
from melsynth.formats import matrix_from_bytes, matrix_to_bytes, write_matrix
from melsynth.midi import NoteEvent, midi_bytes
from melsynth.model import Mel2Mel, Mel2MelConfig
from melsynth.service import (GRID_FILES, ServiceState, create_app, load_state)
from melsynth.synthesis import SynthesisRequest, synthesize
from melsynth.wavenet import WaveNet, WaveNetConfig

TINY_WN = WaveNetConfig(n_layers=4, cycle=2, residual_channels=8,
                        skip_channels=16)


@pytest.fixture(scope="module")
def model():
    return Mel2Mel(Mel2MelConfig(width=32, lstm_hidden=16, embedding_dim=2),
                   seed=8)


@pytest.fixture(scope="module")
def client(model):
    grid = {"centroid": matrix_to_bytes(np.arange(12, dtype=np.float32).reshape(3, 4))}
    state = ServiceState(model, {"kind": "mel2mel", "iteration": 42},
                         wavenet=WaveNet(TINY_WN, seed=0),
                         wavenet_meta={"kind": "wavenet"}, grid=grid)
    return TestClient(create_app(state))


@pytest.fixture(scope="module")
def client_no_wavenet(model):
    state = ServiceState(model, {"kind": "mel2mel"})
    return TestClient(create_app(state))


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["sample_rate"] == 16000
    assert body["mel2mel"]["iteration"] == 42
    assert body["wavenet"]["kind"] == "wavenet"
    assert body["grid_maps"] == ["centroid"]


def test_embeddings(client, model):
    r = client.get("/embeddings")
    assert r.status_code == 200
    body = r.json()
    assert body["dim"] == 2
    assert len(body["names"]) == 10
    assert len(set(body["names"])) == 10
    coords = np.asarray(body["coordinates"])
    assert coords.shape == (10, 2)
    assert coords == pytest.approx(model.embedding_vectors().T)


def test_grid_endpoint(client):
    assert client.get("/grid", params={"map": "blur"}).status_code == 400
    assert client.get("/grid", params={"map": "energy"}).status_code == 404
    r = client.get("/grid", params={"map": "centroid"})
    assert r.status_code == 200
    assert r.headers["content-type"] == "application/octet-stream"
    assert matrix_from_bytes(r.content).shape == (3, 4)


def test_synthesize_json(client):
    r = client.post("/synthesize", json={"instrument": 2})
    assert r.status_code == 200
    body = r.json()
    assert body["frames"] == 188             # probe note default
    assert body["sample_rate"] == 16000
    mel = matrix_from_bytes(base64.b64decode(body["mel_b64"]))
    assert mel.shape == (80, 188)
    wav = base64.b64decode(body["wav_b64"])
    assert wav[:4] == b"RIFF"
    assert set(body["timings_ms"]) == {"prepare", "mel2mel", "vocoder"}


def test_synthesize_mel_format_matches_library(client, model):
    r = client.post("/synthesize", params={"format": "mel"},
                    json={"instrument": 2, "vocoder": "none"})
    assert r.status_code == 200
    direct = synthesize(model, None, SynthesisRequest(instrument=2,
                                                      vocoder="none"))
    assert r.content == matrix_to_bytes(direct.mel)


def test_synthesize_wav_format(client):
    midi = base64.b64encode(midi_bytes([NoteEvent(64, 90, 0.0, 0.3)])).decode()
    r = client.post("/synthesize", params={"format": "wav"},
                    json={"midi_b64": midi, "instrument": 0})
    assert r.status_code == 200
    assert r.headers["content-type"] == "audio/wav"
    assert r.content[:4] == b"RIFF"
    r = client.post("/synthesize", params={"format": "wav"},
                    json={"instrument": 0, "vocoder": "none"})
    assert r.status_code == 400               # nothing to return


def test_synthesize_bad_format(client):
    r = client.post("/synthesize", params={"format": "flac"},
                    json={"instrument": 0})
    assert r.status_code == 400


def test_synthesize_bad_base64(client):
    r = client.post("/synthesize", json={"midi_b64": "@@not-base64@@",
                                         "instrument": 0})
    assert r.status_code == 400
    assert "base64" in r.json()["detail"]


def test_synthesize_malformed_midi_reports_offset(client):
    bad = base64.b64encode(b"MThd" + b"\x00" * 12).decode()
    r = client.post("/synthesize", json={"midi_b64": bad, "instrument": 0})
    assert r.status_code == 400
    detail = r.json()["detail"]
    assert "offset" in detail
    assert isinstance(detail["offset"], int)


def test_synthesize_embedding_errors(client):
    r = client.post("/synthesize", json={})
    assert r.status_code == 400
    assert "exactly one" in r.json()["detail"]
    r = client.post("/synthesize", json={"instrument": 99})
    assert r.status_code == 400
    r = client.post("/synthesize", json={"embedding": [0.1, 0.2, 0.3]})
    assert r.status_code == 400


def test_synthesize_morph(client):
    r = client.post("/synthesize", json={"morph": {"a": 0, "b": 3, "lam": 0.25},
                                         "vocoder": "none"})
    assert r.status_code == 200
    assert r.json()["wav_b64"] is None


def test_wavenet_unavailable_gives_503(client_no_wavenet):
    r = client_no_wavenet.post("/synthesize", json={"instrument": 0,
                                                    "vocoder": "wavenet"})
    assert r.status_code == 503


def test_wavenet_vocoder_over_http(client):
    midi = base64.b64encode(midi_bytes([NoteEvent(60, 90, 0.0, 0.15)])).decode()
    r = client.post("/synthesize", json={"midi_b64": midi, "instrument": 0,
                                         "vocoder": "wavenet", "seed": 3})
    assert r.status_code == 200
    assert r.json()["wav_b64"] is not None


def test_load_state_from_directory(tmp_path, model):
    save_model(tmp_path / "mel2mel.bin", model, extra_meta={"iteration": 9})
    save_model(tmp_path / "wavenet.bin", WaveNet(TINY_WN, seed=0))
    write_matrix(tmp_path / GRID_FILES["energy"], np.zeros((2, 2), np.float32))
    state = load_state(str(tmp_path))
    assert state.mel2mel_meta["iteration"] == 9
    assert state.wavenet is not None
    assert list(state.grid) == ["energy"]

    with pytest.raises(RuntimeError, match="missing"):
        load_state(str(tmp_path / "empty"))


def test_load_state_needs_directory(monkeypatch):
    monkeypatch.delenv("MELSYNTH_CHECKPOINTS", raising=False)
    with pytest.raises(RuntimeError, match="MELSYNTH_CHECKPOINTS"):
        load_state(None)


def test_static_mount(tmp_path, model):
    (tmp_path / "index.html").write_text("<html><body>ui</body></html>")
    state = ServiceState(model, {})
    app = create_app(state, static_dir=str(tmp_path))
    c = TestClient(app)
    r = c.get("/")
    assert r.status_code == 200
    assert "ui" in r.text
    assert c.get("/health").status_code == 200   # API wins over static
