"""Corpus generation, the on-disk manifest layout, and training examples.

A corpus is a set of generated (or user-supplied) MIDI tracks, each rendered
with every patch in the bank. On disk that is one SMF per track, one WAV per
(track, patch) pair, and a plain-text manifest with one record per line:

    midi path,instrument id,wav path,split

Tracks are split between train and validation by MIDI file at roughly the
320:14 ratio. Everything is deterministic under the generation seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .dsp import SAMPLE_RATE, HOP, mel_spectrogram, mulaw_encode
from .formats import read_wav, write_wav
from .instruments import (N_INSTRUMENTS, PATCH_BANK_VERSION,
                          patch_margins, render_track)
from .midi import (DEFAULT_STEP_SECONDS, NoteEvent, concat_input,
                   encode_piano_roll, midi_bytes, parse_midi)

MANIFEST_NAME = "manifest.txt"
MARGINS_NAME = "patch_margins.txt"
VALIDATION_RATIO = 14 / 334

_SCALE = (0, 2, 4, 5, 7, 9, 11)


def random_notes(rng: np.random.Generator, seconds: float) -> list[NoteEvent]:
    """A random-but-musical track: a random walk over a major scale with
    varied velocities, durations, rests and occasional chord tones."""
    bpm = rng.uniform(70.0, 140.0)
    eighth = 60.0 / bpm / 2.0
    root = int(rng.integers(45, 67))
    degree = int(rng.integers(7, 15))
    notes = []
    t = 0.0
    while t < seconds - 0.5:
        cells = int(rng.integers(1, 5))
        dur = cells * eighth
        if rng.random() < 0.15 and notes:
            t += dur
            continue
        degree = min(max(degree + int(rng.integers(-3, 4)), 0), 20)
        pitch = root + 12 * (degree // 7) + _SCALE[degree % 7]
        pitch = min(max(pitch, 21), 108)
        velocity = int(rng.integers(45, 116))
        end = min(t + dur * 0.9, seconds - 0.05)
        if end <= t + 0.02:
            break
        notes.append(NoteEvent(pitch, velocity, t, end))
        if rng.random() < 0.25:
            d2 = min(degree + 2, 20)
            p2 = min(max(root + 12 * (d2 // 7) + _SCALE[d2 % 7], 21), 108)
            if p2 != pitch:
                notes.append(NoteEvent(p2, max(1, velocity - 12), t, end))
        t += dur
    if not notes:
        notes.append(NoteEvent(60, 90, 0.0, max(0.5, seconds / 2)))
    notes.sort(key=lambda n: (n.onset_time, n.pitch))
    return notes


@dataclass
class Entry:
    """One (MIDI track, instrument) rendering."""
    track: int
    instrument: int
    split: str
    midi_name: str
    wav_name: str
    audio: np.ndarray     # float32 samples
    mel: np.ndarray       # (80, T) float32, linear magnitude
    codes: np.ndarray     # int16 mu-law codes, len == T * 128


@dataclass
class Manifest:
    seed: int
    patch_bank_version: int
    records: list[tuple[str, int, str, str]]   # midi, instrument, wav, split

    def lines(self) -> list[str]:
        head = [f"# seed={self.seed}",
                f"# patch_bank={self.patch_bank_version}"]
        return head + [f"{m},{i},{w},{s}" for m, i, w, s in self.records]


def _splits(n_tracks: int, seed: int, validation_tracks: int | None) -> list[str]:
    if validation_tracks is None:
        validation_tracks = max(1, round(n_tracks * VALIDATION_RATIO))
    rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    val = set(rng.choice(n_tracks, size=validation_tracks, replace=False).tolist()) \
        if validation_tracks else set()
    return ["validation" if i in val else "train" for i in range(n_tracks)]


def _track_events(seed: int, n_tracks: int, seconds: float) -> list[list[NoteEvent]]:
    children = np.random.SeedSequence(seed).spawn(n_tracks)
    return [random_notes(np.random.default_rng(ss), seconds) for ss in children]


class Corpus:
    """In-memory corpus: shared piano rolls per track plus per-entry audio."""

    def __init__(self, rolls: list[np.ndarray], entries: list[Entry], seed: int):
        self.rolls = rolls
        self.entries = entries
        self.seed = seed
        for e in entries:
            t = self.rolls[e.track].shape[1]
            if e.mel.shape[1] != t or len(e.codes) != t * HOP:
                raise ValueError(f"misaligned track {e.midi_name}: roll {t} frames, "
                                 f"mel {e.mel.shape[1]}, audio {len(e.codes)}")

    @property
    def n_frames(self) -> int:
        return self.rolls[0].shape[1]

    def indices(self, split: str) -> list[int]:
        if split == "all":
            return list(range(len(self.entries)))
        return [i for i, e in enumerate(self.entries) if e.split == split]

    # -- construction ------------------------------------------------------

    @classmethod
    def generate(cls, n_tracks: int, seed: int, seconds: float = 8.0,
                 instruments=None, validation_tracks: int | None = None) -> "Corpus":
        """Build a corpus directly in memory (no files)."""
        if n_tracks < 1:
            raise ValueError("need at least one track")
        instruments = list(range(N_INSTRUMENTS)) if instruments is None \
            else list(instruments)
        t_steps = int(np.ceil(seconds / DEFAULT_STEP_SECONDS))
        n_samples = t_steps * HOP
        splits = _splits(n_tracks, seed, validation_tracks)
        rolls, entries = [], []
        for i, events in enumerate(_track_events(seed, n_tracks, seconds)):
            # canonical timing comes from the serialized SMF so that file
            # and in-memory corpora agree
            events = parse_midi(midi_bytes(events))
            roll = concat_input(encode_piano_roll(events, t_steps=t_steps))
            rolls.append(roll)
            for j in instruments:
                audio = render_track(events, j, n_samples)
                entries.append(Entry(
                    track=i, instrument=j, split=splits[i],
                    midi_name=f"track_{i:04d}.mid",
                    wav_name=f"track_{i:04d}_patch{j:02d}.wav",
                    audio=audio.astype(np.float32),
                    mel=mel_spectrogram(audio).astype(np.float32),
                    codes=mulaw_encode(audio).astype(np.int16)))
        return cls(rolls, entries, seed)

    @classmethod
    def load(cls, directory) -> "Corpus":
        manifest = load_manifest(directory)
        rolls_by_midi: dict[str, tuple[int, np.ndarray]] = {}
        entries = []
        for midi_name, instrument, wav_name, split in manifest.records:
            audio = read_wav(os.path.join(directory, wav_name))
            if len(audio) % HOP:
                raise ValueError(f"{wav_name}: length {len(audio)} is not a "
                                 f"multiple of the {HOP}-sample hop")
            t_steps = len(audio) // HOP
            if midi_name not in rolls_by_midi:
                with open(os.path.join(directory, midi_name), "rb") as fh:
                    events = parse_midi(fh.read())
                roll = concat_input(encode_piano_roll(events, t_steps=t_steps))
                rolls_by_midi[midi_name] = (len(rolls_by_midi), roll)
            track_idx = rolls_by_midi[midi_name][0]
            entries.append(Entry(
                track=track_idx, instrument=instrument, split=split,
                midi_name=midi_name, wav_name=wav_name,
                audio=audio.astype(np.float32),
                mel=mel_spectrogram(audio).astype(np.float32),
                codes=mulaw_encode(audio).astype(np.int16)))
        rolls = [roll for _, roll in sorted(rolls_by_midi.values(), key=lambda p: p[0])]
        return cls(rolls, entries, manifest.seed)

    # -- training examples -------------------------------------------------

    def example(self, entry_index: int, frame_offset: int, frames: int):
        """(roll, mel, codes) slices aligned on the 128-sample hop."""
        e = self.entries[entry_index]
        t = self.rolls[e.track].shape[1]
        if frame_offset < 0 or frame_offset + frames > t:
            raise ValueError(f"slice [{frame_offset}, {frame_offset + frames}) "
                             f"outside track of {t} frames")
        roll = self.rolls[e.track][:, frame_offset:frame_offset + frames]
        mel = e.mel[:, frame_offset:frame_offset + frames]
        codes = e.codes[frame_offset * HOP:(frame_offset + frames) * HOP]
        return roll, mel, codes

    def sample_mel2mel(self, rng: np.random.Generator, batch: int,
                       frames: int, split: str = "train"):
        """(roll (176,B,F), mel (80,B,F), instrument ids (B,))."""
        idx = self.indices(split)
        rolls, mels, ids = [], [], []
        for _ in range(batch):
            e = idx[int(rng.integers(len(idx)))]
            off = int(rng.integers(self.n_frames - frames + 1))
            roll, mel, _ = self.example(e, off, frames)
            rolls.append(roll)
            mels.append(mel)
            ids.append(self.entries[e].instrument)
        return (np.stack(rolls, axis=1), np.stack(mels, axis=1),
                np.asarray(ids, dtype=np.int64))

    def sample_wavenet(self, rng: np.random.Generator, batch: int,
                       length_samples: int, split: str = "train"):
        """(codes (B,L), mel (80,B,L/128)); L must be hop-aligned."""
        if length_samples % HOP:
            raise ValueError("length must be a multiple of 128 samples")
        frames = length_samples // HOP
        idx = self.indices(split)
        codes, mels = [], []
        for _ in range(batch):
            e = idx[int(rng.integers(len(idx)))]
            off = int(rng.integers(self.n_frames - frames + 1))
            _, mel, c = self.example(e, off, frames)
            codes.append(c.astype(np.int64))
            mels.append(mel)
        return np.stack(codes, axis=0), np.stack(mels, axis=1)


# ---------------------------------------------------------------------------
# disk layout


def generate_corpus(n_tracks: int, seed: int, out_dir, seconds: float = 8.0,
                    validation_tracks: int | None = None) -> Manifest:
    """Write SMF + WAV files, the manifest, and the patch-margin record."""
    if n_tracks < 2:
        raise ValueError("need at least 2 tracks to split")
    os.makedirs(out_dir, exist_ok=True)
    t_steps = int(np.ceil(seconds / DEFAULT_STEP_SECONDS))
    n_samples = t_steps * HOP
    splits = _splits(n_tracks, seed, validation_tracks)
    records = []
    for i, events in enumerate(_track_events(seed, n_tracks, seconds)):
        midi_name = f"track_{i:04d}.mid"
        data = midi_bytes(events)
        with open(os.path.join(out_dir, midi_name), "wb") as fh:
            fh.write(data)
        events = parse_midi(data)
        for j in range(N_INSTRUMENTS):
            wav_name = f"track_{i:04d}_patch{j:02d}.wav"
            write_wav(os.path.join(out_dir, wav_name),
                      render_track(events, j, n_samples))
            records.append((midi_name, j, wav_name, splits[i]))
    manifest = Manifest(seed, PATCH_BANK_VERSION, records)
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as fh:
        fh.write("\n".join(manifest.lines()) + "\n")
    with open(os.path.join(out_dir, MARGINS_NAME), "w") as fh:
        fh.write("a\tb\tcentroid_delta_hz\tenergy_delta_db\n")
        for m in patch_margins():
            fh.write(f"{m['a']}\t{m['b']}\t{m['centroid_delta_hz']:.3f}"
                     f"\t{m['energy_delta_db']:.3f}\n")
    return manifest


def load_manifest(directory) -> Manifest:
    path = os.path.join(directory, MANIFEST_NAME)
    seed = 0
    version = PATCH_BANK_VERSION
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key == "seed":
                    seed = int(value)
                elif key == "patch_bank":
                    version = int(value)
                continue
            midi_name, instrument, wav_name, split = line.split(",")
            if split not in ("train", "validation"):
                raise ValueError(f"bad split {split!r} in manifest")
            records.append((midi_name, int(instrument), wav_name, split))
    train_midis = {m for m, _, _, s in records if s == "train"}
    val_midis = {m for m, _, _, s in records if s == "validation"}
    if train_midis & val_midis:
        raise ValueError("manifest splits share MIDI files")
    return Manifest(seed, version, records)
