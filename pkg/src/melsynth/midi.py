"""Standard MIDI file parsing and dual onset/frame piano-roll encoding."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .formats import write_matrix

PITCH_MIN = 21          # A0, lowest of the 88 keys
PITCH_MAX = 108         # C8
N_KEYS = 88
INPUT_ROWS = 2 * N_KEYS
DEFAULT_STEP_SECONDS = 0.008
DEFAULT_TEMPO = 500000  # microseconds per quarter note (120 BPM)


class MidiParseError(ValueError):
    """Malformed SMF content; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class NoteEvent:
    pitch: int
    velocity: int
    onset_time: float
    offset_time: float

    def __post_init__(self):
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside 1..127")
        if self.offset_time <= self.onset_time:
            raise ValueError("offset_time must exceed onset_time")


@dataclass
class PianoRoll:
    """88xT onset and frame matrices with velocities scaled to [0, 1]."""

    onset: np.ndarray
    frame: np.ndarray
    step_seconds: float = DEFAULT_STEP_SECONDS
    dropped_notes: int = 0

    @property
    def t_steps(self) -> int:
        return self.onset.shape[1]


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def ensure(self, n: int, what: str):
        if self.pos + n > len(self.data):
            raise MidiParseError(f"truncated {what}", self.pos)

    def bytes(self, n: int, what: str = "data") -> bytes:
        self.ensure(n, what)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str = "byte") -> int:
        return self.bytes(1, what)[0]

    def u16(self, what: str = "u16") -> int:
        return struct.unpack(">H", self.bytes(2, what))[0]

    def u32(self, what: str = "u32") -> int:
        return struct.unpack(">I", self.bytes(4, what))[0]

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            b = self.u8("variable-length quantity")
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise MidiParseError("variable-length quantity longer than 4 bytes", self.pos)


_CHANNEL_DATA_LEN = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def _parse_track(r: _Reader, end: int):
    """Collect (tick, pitch, velocity|0) note events and (tick, tempo) changes."""
    notes = []
    tempos = []
    tick = 0
    running = None
    while r.pos < end:
        tick += r.varlen()
        status = r.u8("event status")
        if status < 0x80:
            if running is None:
                raise MidiParseError("data byte with no running status", r.pos - 1)
            r.pos -= 1
            status = running
        if status == 0xFF:
            meta = r.u8("meta type")
            length = r.varlen()
            payload = r.bytes(length, "meta payload")
            if meta == 0x51 and length == 3:
                tempos.append((tick, int.from_bytes(payload, "big")))
            elif meta == 0x2F:
                break
            continue
        if status in (0xF0, 0xF7):
            r.bytes(r.varlen(), "sysex payload")
            running = None
            continue
        kind = status & 0xF0
        if kind not in _CHANNEL_DATA_LEN:
            raise MidiParseError(f"unknown status byte 0x{status:02x}", r.pos - 1)
        running = status
        data = r.bytes(_CHANNEL_DATA_LEN[kind], "channel event data")
        if kind == 0x90:
            notes.append((tick, data[0], data[1]))       # velocity 0 acts as note-off
        elif kind == 0x80:
            notes.append((tick, data[0], 0))
    return notes, tempos, tick


def _ticks_to_seconds(ticks: np.ndarray, tempos: list, division: int) -> np.ndarray:
    """Piecewise-linear tick -> seconds conversion against the tempo map."""
    if division & 0x8000:
        # SMPTE division: fixed ticks per second, tempo events do not apply
        fps = 256 - ((division >> 8) & 0xFF)
        ticks_per_second = fps * (division & 0xFF)
        return np.asarray(ticks, dtype=np.float64) / ticks_per_second
    changes = sorted(t for t in tempos if t[0] >= 0)
    if not changes or changes[0][0] > 0:
        changes.insert(0, (0, DEFAULT_TEMPO))
    change_ticks = np.array([c[0] for c in changes], dtype=np.float64)
    change_secs = np.zeros(len(changes))
    for i in range(1, len(changes)):
        dt = change_ticks[i] - change_ticks[i - 1]
        change_secs[i] = change_secs[i - 1] + dt * changes[i - 1][1] / (division * 1e6)
    ticks = np.asarray(ticks, dtype=np.float64)
    idx = np.searchsorted(change_ticks, ticks, side="right") - 1
    rates = np.array([c[1] for c in changes], dtype=np.float64)
    return change_secs[idx] + (ticks - change_ticks[idx]) * rates[idx] / (division * 1e6)


def parse_midi(data: bytes) -> list[NoteEvent]:
    """Parse an SMF type 0/1 file into note events with times in seconds.

    Note-on/note-off pairing is per pitch, earliest unmatched onset first; a
    note-on with velocity 0 counts as a note-off. Notes still open when their
    track ends are closed at the track end and reported via a warning.
    Channels, program changes and the sustain pedal are ignored.
    """
    r = _Reader(data)
    if r.bytes(4, "header chunk id") != b"MThd":
        raise MidiParseError("missing MThd header", 0)
    header_len = r.u32("header length")
    if header_len < 6:
        raise MidiParseError(f"MThd length {header_len} < 6", r.pos - 4)
    fmt = r.u16("format")
    ntrks = r.u16("track count")
    division = r.u16("division")
    r.bytes(header_len - 6, "header padding")
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", 8)
    if division == 0:
        raise MidiParseError("division of zero", 12)

    all_notes = []     # (tick, track_order, pitch, velocity)
    all_tempos = []
    track_ends = []
    for track_index in range(ntrks):
        chunk_id = r.bytes(4, "track chunk id")
        chunk_len = r.u32("track chunk length")
        chunk_end = r.pos + chunk_len
        if chunk_end > len(data):
            raise MidiParseError(f"track {track_index} length {chunk_len} overruns file", r.pos - 4)
        if chunk_id != b"MTrk":
            r.pos = chunk_end   # unknown chunk types are skipped per the SMF spec
            continue
        notes, tempos, end_tick = _parse_track(r, chunk_end)
        r.pos = chunk_end
        all_notes.extend((tick, track_index, pitch, vel) for tick, pitch, vel in notes)
        all_tempos.extend(tempos)
        track_ends.append((track_index, end_tick))

    all_notes.sort(key=lambda e: (e[0], e[1]))
    end_by_track = dict(track_ends)

    open_notes: dict[int, list] = {}
    pairs = []           # (pitch, velocity, on_tick, off_tick)
    unclosed = 0
    for tick, track_index, pitch, vel in all_notes:
        if vel > 0:
            open_notes.setdefault(pitch, []).append((tick, vel, track_index))
        else:
            queue = open_notes.get(pitch)
            if queue:
                on_tick, on_vel, _ = queue.pop(0)
                pairs.append((pitch, on_vel, on_tick, tick))
    for pitch, queue in open_notes.items():
        for on_tick, on_vel, track_index in queue:
            unclosed += 1
            pairs.append((pitch, on_vel, on_tick, end_by_track.get(track_index, on_tick)))
    if unclosed:
        warnings.warn(f"{unclosed} note-on event(s) without a note-off; closed at track end",
                      stacklevel=2)

    if not pairs:
        return []
    ticks = np.array([[p[2], p[3]] for p in pairs], dtype=np.int64)
    seconds = _ticks_to_seconds(ticks.ravel(), all_tempos, division).reshape(-1, 2)
    events = []
    for (pitch, vel, _, _), (on_s, off_s) in zip(pairs, seconds):
        if off_s <= on_s:   # zero-length after pairing carries no audible content
            continue
        events.append(NoteEvent(pitch, vel, float(on_s), float(off_s)))
    events.sort(key=lambda n: (n.onset_time, n.pitch))
    return events


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def encode_piano_roll(notes: list[NoteEvent],
                      step_seconds: float = DEFAULT_STEP_SECONDS,
                      t_steps: int | None = None) -> PianoRoll:
    """Quantize notes onto the step grid as 88xT onset/frame velocity matrices.

    Times round half-up to the nearest step. Frames cover [onset step, offset
    step) with at least one active step; on same-pitch collisions the later
    note's velocity wins. Pitches outside MIDI 21..108 are dropped and counted.
    """
    if step_seconds <= 0:
        raise ValueError("step_seconds must be positive")
    if t_steps is None:
        last = 1
        for n in notes:
            if PITCH_MIN <= n.pitch <= PITCH_MAX:
                last = max(last, _round_half_up(n.offset_time / step_seconds))
        t_steps = last
    if t_steps < 1:
        raise ValueError("t_steps must be at least 1")

    onset = np.zeros((N_KEYS, t_steps), dtype=np.float32)
    frame = np.zeros((N_KEYS, t_steps), dtype=np.float32)
    dropped = 0
    for note in sorted(notes, key=lambda n: n.onset_time):
        if not PITCH_MIN <= note.pitch <= PITCH_MAX:
            dropped += 1
            continue
        row = note.pitch - PITCH_MIN
        on = _round_half_up(note.onset_time / step_seconds)
        off = max(_round_half_up(note.offset_time / step_seconds), on + 1)
        if on >= t_steps:
            continue
        off = min(off, t_steps)
        value = note.velocity / 127.0
        frame[row, on:off] = value
        onset[row, on] = value
    return PianoRoll(onset=onset, frame=frame, step_seconds=step_seconds,
                     dropped_notes=dropped)


def concat_input(roll: PianoRoll) -> np.ndarray:
    """Stack onset rows over frame rows into the 176xT network input."""
    if roll.onset.shape != roll.frame.shape:
        raise ValueError("onset and frame shapes differ")
    return np.concatenate([roll.onset, roll.frame], axis=0)


def dump_roll(roll: PianoRoll, path) -> None:
    """Debug dump of the concatenated roll in the shared matrix format."""
    write_matrix(path, concat_input(roll))


def _encode_varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def midi_bytes(notes: list[NoteEvent], tempo: int = DEFAULT_TEMPO,
               division: int = 480) -> bytes:
    """Serialize notes as a type-0 standard MIDI file at a constant tempo."""
    ticks_per_second = division * 1e6 / tempo
    messages = []
    for n in notes:
        on = _round_half_up(n.onset_time * ticks_per_second)
        off = max(_round_half_up(n.offset_time * ticks_per_second), on + 1)
        # note-offs sort before note-ons at the same tick so back-to-back
        # repeats of a pitch stay paired
        messages.append((on, 1, 0x90, n.pitch, n.velocity))
        messages.append((off, 0, 0x80, n.pitch, 64))
    messages.sort(key=lambda m: (m[0], m[1], m[3]))

    track = bytearray(b"\x00\xff\x51\x03" + tempo.to_bytes(3, "big"))
    prev = 0
    for tick, _, status, a, b in messages:
        track += _encode_varlen(tick - prev)
        prev = tick
        track += bytes([status, a, b])
    track += b"\x00\xff\x2f\x00"
    return (b"MThd" + struct.pack(">IHHH", 6, 0, 1, division)
            + b"MTrk" + struct.pack(">I", len(track)) + bytes(track))


def write_midi(path, notes: list[NoteEvent], tempo: int = DEFAULT_TEMPO,
               division: int = 480) -> None:
    with open(path, "wb") as fh:
        fh.write(midi_bytes(notes, tempo, division))
