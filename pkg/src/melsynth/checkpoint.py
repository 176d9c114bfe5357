"""Binary checkpoint container shared by both models.

Layout: magic ``MSCK`` + u32 version + u64 metadata length + UTF-8 JSON
metadata + concatenated raw float32 little-endian blobs. The metadata lists
every blob's name and shape in order, plus the model kind and config, so a
file is self-describing.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"MSCK"
VERSION = 1


def save_checkpoint(path, meta: dict, blobs: dict[str, np.ndarray]) -> None:
    meta = dict(meta)
    meta["blobs"] = [{"name": k, "shape": list(v.shape)} for k, v in blobs.items()]
    encoded = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(encoded)))
        fh.write(encoded)
        for v in blobs.values():
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version = struct.unpack_from("<I", data, 4)[0]
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    meta_len = struct.unpack_from("<Q", data, 8)[0]
    meta = json.loads(data[16:16 + meta_len].decode("utf-8"))
    pos = 16 + meta_len
    blobs = {}
    for spec in meta.pop("blobs"):
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        blobs[spec["name"]] = arr.reshape(spec["shape"]).copy()
        pos += 4 * count
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return meta, blobs


def save_model(path, model, extra_meta: dict | None = None,
               extra_blobs: dict[str, np.ndarray] | None = None) -> None:
    """Model params (and optionally optimizer state) in one container."""
    from .model import Mel2Mel
    from .wavenet import WaveNet

    if isinstance(model, Mel2Mel):
        kind = "mel2mel"
    elif isinstance(model, WaveNet):
        kind = "wavenet"
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    meta = {"kind": kind, "config": model.config.to_dict()}
    meta.update(extra_meta or {})
    blobs = dict(model.state_dict())
    blobs.update(extra_blobs or {})
    save_checkpoint(path, meta, blobs)


def load_model(path):
    """Returns (model, meta, extra_blobs). Extra blobs are any that are not
    model parameters (optimizer state etc.)."""
    from .model import Mel2Mel, Mel2MelConfig
    from .wavenet import WaveNet, WaveNetConfig

    meta, blobs = load_checkpoint(path)
    if meta["kind"] == "mel2mel":
        model = Mel2Mel(Mel2MelConfig(**meta["config"]))
    elif meta["kind"] == "wavenet":
        model = WaveNet(WaveNetConfig(**meta["config"]))
    else:
        raise ValueError(f"{path}: unknown model kind {meta['kind']!r}")
    names = {name for name, _ in model.named_params()}
    model.load_state_dict({k: v for k, v in blobs.items() if k in names})
    extra = {k: v for k, v in blobs.items() if k not in names}
    return model, meta, extra
