"""MIDI-to-audio synthesis with learned 2-D timbre embeddings.

Pipeline: piano-roll encoding -> FiLM-conditioned biLSTM Mel predictor ->
WaveNet vocoder, plus corpus generation, training, evaluation analyses and
an HTTP synthesis service.
"""

from .dsp import (SAMPLE_RATE, HOP, N_MELS, mel_spectrogram, mulaw_decode,
                  mulaw_encode, tanh_log_compress, tanh_log_expand)
from .midi import (MidiParseError, NoteEvent, PianoRoll, concat_input,
                   encode_piano_roll, midi_bytes, parse_midi, write_midi)
from .instruments import Patch, builtin_patch_bank, render_track
from .model import Mel2Mel, Mel2MelConfig, mel2mel_loss
from .wavenet import (FastSampler, NaiveSampler, WaveNet, WaveNetConfig,
                      generate)
from .corpus import Corpus, generate_corpus, load_manifest
from .checkpoint import load_model, save_model
from .training import (TrainConfig, mel2mel_config, run_ablation_suite,
                       train_mel2mel, train_wavenet, wavenet_config)
from .evaluate import degradation_curves, embedding_grid, morph_path
from .synthesis import SynthesisRequest, SynthesisResult, synthesize

__version__ = "0.1.0"

__all__ = [
    "SAMPLE_RATE", "HOP", "N_MELS", "mel_spectrogram", "mulaw_decode",
    "mulaw_encode", "tanh_log_compress", "tanh_log_expand",
    "MidiParseError", "NoteEvent", "PianoRoll", "concat_input",
    "encode_piano_roll", "midi_bytes", "parse_midi", "write_midi",
    "Patch", "builtin_patch_bank", "render_track",
    "Mel2Mel", "Mel2MelConfig", "mel2mel_loss",
    "FastSampler", "NaiveSampler", "WaveNet", "WaveNetConfig", "generate",
    "Corpus", "generate_corpus", "load_manifest",
    "load_model", "save_model",
    "TrainConfig", "mel2mel_config", "run_ablation_suite", "train_mel2mel",
    "train_wavenet", "wavenet_config",
    "degradation_curves", "embedding_grid", "morph_path",
    "SynthesisRequest", "SynthesisResult", "synthesize",
    "__version__",
]
