"""Shared on-disk formats: binary matrix dumps, 16 kHz PCM WAV, flat key=value configs.

Matrix dump layout (little-endian):
    bytes 0..3   uint32  rows
    bytes 4..7   uint32  cols
    bytes 8..    float32 row-major cell data (rows*cols values)
"""

from __future__ import annotations

import json
import struct
import wave
from pathlib import Path

import numpy as np

SAMPLE_RATE = 16000

_MATRIX_HEADER = struct.Struct("<II")


def matrix_to_bytes(matrix: np.ndarray) -> bytes:
    m = np.ascontiguousarray(matrix, dtype="<f4")
    if m.ndim != 2:
        raise ValueError(f"matrix dump requires a 2-D array, got shape {m.shape}")
    return _MATRIX_HEADER.pack(m.shape[0], m.shape[1]) + m.tobytes()


def matrix_from_bytes(blob: bytes) -> np.ndarray:
    if len(blob) < _MATRIX_HEADER.size:
        raise ValueError("matrix dump shorter than its 8-byte header")
    rows, cols = _MATRIX_HEADER.unpack_from(blob)
    expected = _MATRIX_HEADER.size + 4 * rows * cols
    if len(blob) != expected:
        raise ValueError(f"matrix dump size mismatch: header says {rows}x{cols} "
                         f"({expected} bytes), got {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=_MATRIX_HEADER.size)
    return data.reshape(rows, cols).copy()


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    Path(path).write_bytes(matrix_to_bytes(matrix))


def read_matrix(path: str | Path) -> np.ndarray:
    return matrix_from_bytes(Path(path).read_bytes())


def wav_to_bytes(samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> bytes:
    """Encode float samples in [-1, 1] as 16-bit mono RIFF bytes."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.floor(x * 32767.0 + 0.5).astype("<i2")
    import io

    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())
    return buf.getvalue()


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    Path(path).write_bytes(wav_to_bytes(samples, sample_rate))


def read_wav(path: str | Path, expect_rate: int | None = SAMPLE_RATE) -> np.ndarray:
    """Read a 16-bit mono WAV back to float64 in [-1, 1].

    Inputs must already be at the engine rate; there is no resampling.
    """
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit mono PCM")
        rate = w.getframerate()
        if expect_rate is not None and rate != expect_rate:
            raise ValueError(f"{path}: sample rate {rate} != required {expect_rate}")
        raw = w.readframes(w.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0


def load_config(path: str | Path) -> dict:
    """Parse a flat ``key = value`` config file.

    Blank lines and lines starting with '#' are ignored. Values are parsed as
    JSON literals when possible (numbers, true/false, quoted strings, lists),
    otherwise kept as bare strings.
    """
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        try:
            values[key] = json.loads(raw)
        except json.JSONDecodeError:
            values[key] = raw
    return values


def save_config(path: str | Path, values: dict) -> None:
    lines = []
    for key, val in values.items():
        if isinstance(val, str):
            lines.append(f"{key} = {val}")
        else:
            lines.append(f"{key} = {json.dumps(val)}")
    Path(path).write_text("\n".join(lines) + "\n")
