"""Checkpoint container: binary layout, model save/load, optimizer blobs."""

import struct

import numpy as np
import pytest

from melsynth.checkpoint import (MAGIC, VERSION, load_checkpoint, load_model,
                                 save_checkpoint, save_model)
from melsynth.model import Mel2Mel, Mel2MelConfig
from melsynth.nn import Adam
from melsynth.wavenet import WaveNet, WaveNetConfig

TINY_MEL2MEL = Mel2MelConfig(width=16, lstm_hidden=8, n_mels=6,
                             input_rows=12, embedding_dim=2)
TINY_WAVENET = WaveNetConfig(n_layers=4, cycle=2, residual_channels=8,
                             skip_channels=16)


def test_blob_roundtrip_exact(tmp_path):
    path = tmp_path / "x.bin"
    blobs = {"a": np.arange(6, dtype=np.float32).reshape(2, 3),
             "b": np.float32(np.pi).reshape(()),
             "c": np.random.default_rng(0).standard_normal(5).astype(np.float32)}
    save_checkpoint(path, {"kind": "test", "note": 7}, blobs)
    meta, loaded = load_checkpoint(path)
    assert meta["kind"] == "test" and meta["note"] == 7
    assert list(loaded) == list(blobs)
    for k in blobs:
        assert loaded[k].dtype == np.float32
        assert np.array_equal(loaded[k], blobs[k])


def test_float64_blobs_stored_as_float32(tmp_path):
    path = tmp_path / "x.bin"
    save_checkpoint(path, {}, {"a": np.array([1.0, 2.0])})
    _, loaded = load_checkpoint(path)
    assert loaded["a"].dtype == np.float32


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"JUNK" + b"\x00" * 32)
    with pytest.raises(ValueError, match="not a checkpoint"):
        load_checkpoint(path)


def test_bad_version_rejected(tmp_path):
    path = tmp_path / "x.bin"
    save_checkpoint(path, {}, {"a": np.zeros(2, dtype=np.float32)})
    data = bytearray(path.read_bytes())
    data[4:8] = struct.pack("<I", VERSION + 1)
    path.write_bytes(bytes(data))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "x.bin"
    save_checkpoint(path, {}, {"a": np.zeros(2, dtype=np.float32)})
    path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
    with pytest.raises(ValueError, match="trailing"):
        load_checkpoint(path)


def test_save_load_mel2mel(tmp_path):
    path = tmp_path / "m.bin"
    model = Mel2Mel(TINY_MEL2MEL, seed=3)
    save_model(path, model, extra_meta={"iteration": 17})
    loaded, meta, extra = load_model(path)
    assert meta["kind"] == "mel2mel"
    assert meta["iteration"] == 17
    assert extra == {}
    assert loaded.config == model.config
    for (na, pa), (nb, pb) in zip(model.named_params(), loaded.named_params()):
        assert na == nb
        assert np.array_equal(pa.data, pb.data)


def test_save_load_wavenet(tmp_path):
    path = tmp_path / "w.bin"
    model = WaveNet(TINY_WAVENET, seed=3)
    save_model(path, model)
    loaded, meta, _ = load_model(path)
    assert meta["kind"] == "wavenet"
    assert loaded.config == model.config
    state = dict(model.state_dict())
    for name, value in loaded.state_dict().items():
        assert np.array_equal(value, state[name])


def test_save_model_rejects_unknown_type(tmp_path):
    with pytest.raises(TypeError):
        save_model(tmp_path / "x.bin", object())


def test_load_model_rejects_unknown_kind(tmp_path):
    path = tmp_path / "x.bin"
    save_checkpoint(path, {"kind": "mystery", "config": {}}, {})
    with pytest.raises(ValueError, match="kind"):
        load_model(path)


def test_optimizer_blobs_roundtrip(tmp_path):
    path = tmp_path / "m.bin"
    model = Mel2Mel(TINY_MEL2MEL, seed=3)
    named = model.named_params()
    opt = Adam([p for _, p in named])
    # one fake step so the moments are nonzero
    for _, p in named:
        p.grad = np.ones_like(p.data)
    opt.step(lr=1e-3)
    save_model(path, model, extra_blobs=opt.state_blobs(named))
    _, _, extra = load_model(path)
    assert any(k.startswith("adam_m.") for k in extra)
    assert any(k.startswith("adam_v.") for k in extra)
    blobs = opt.state_blobs(named)
    for k, v in extra.items():
        assert np.allclose(v, blobs[k], atol=1e-7)
