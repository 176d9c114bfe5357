"""Command-line entry point.

Subcommands:
  dataset        generate the rendered MIDI corpus
  train-mel2mel  train the Mel predictor
  train-wavenet  train the vocoder
  ablate         run the variant comparison table
  eval           degradation | grid | morph analyses (TSV + PNG outputs)
  synth          MIDI + embedding -> WAV + Mel dump + Mel image
  serve          run the HTTP synthesis service

Training subcommands resolve options as preset < config file < flags. Config
files are flat `key = value` text (see formats.load_config).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

import numpy as np

from .corpus import Corpus, generate_corpus
from .checkpoint import load_model, save_model
from .evaluate import (STAGES, degradation_curves, embedding_grid, morph_path,
                       _mel_stats, per_instrument_breakdown)
from .formats import load_config, write_matrix, write_wav
from .instruments import PATCHES
from .model import Mel2Mel
from .service import (CHECKPOINT_ENV, GRID_FILES, MEL2MEL_FILE, WAVENET_FILE,
                      create_app, load_state)
from .synthesis import SynthesisRequest, synthesize
from .training import (TrainConfig, mel2mel_config, run_ablation_suite,
                       train_mel2mel, train_wavenet, wavenet_config,
                       write_report)
from .wavenet import WaveNet

DATASET_PRESETS = {
    # tracks, seconds per track
    "desk": {"tracks": 6, "seconds": 8.0},
    "paper": {"tracks": 334, "seconds": 240.0},
}


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _overrides(args) -> dict:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config(args.config))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        values[key.strip()] = _parse_value(raw.strip())
    return values


def _train_config(parser: argparse.ArgumentParser, args,
                  factory) -> TrainConfig:
    values = _overrides(args)
    values.pop("target", None)
    preset = args.preset or values.pop("preset", "desk")
    if args.seed is not None:
        values["seed"] = args.seed
    if args.iterations is not None:
        values["iterations"] = args.iterations
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(values) - known
    if unknown:
        parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        return factory(preset, **values)
    except ValueError as err:
        parser.error(str(err))


def _add_train_flags(sub):
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="single config override (repeatable)")
    sub.add_argument("--preset", choices=("paper", "desk"))
    sub.add_argument("--seed", type=int)
    sub.add_argument("--iterations", type=int)
    sub.add_argument("--out", required=True, help="run output directory")


def _progress(prefix):
    def callback(iteration, train, val):
        print(f"{prefix} it {iteration}: train {train:.5g} val {val:.5g}",
              flush=True)
    return callback


# ---------------------------------------------------------------------------
# subcommands


def _cmd_dataset(parser, args) -> int:
    values = _overrides(args)
    preset = args.preset or values.pop("preset", "desk")
    if preset not in DATASET_PRESETS:
        parser.error(f"unknown preset {preset!r}")
    options = dict(DATASET_PRESETS[preset])
    options.update(values)
    if args.tracks is not None:
        options["tracks"] = args.tracks
    if args.seconds is not None:
        options["seconds"] = args.seconds
    seed = args.seed if args.seed is not None else int(options.pop("seed", 0))
    tracks = int(options.pop("tracks"))
    seconds = float(options.pop("seconds"))
    validation = options.pop("validation_tracks", None)
    if options:
        parser.error(f"unknown config keys: {', '.join(sorted(options))}")
    manifest = generate_corpus(tracks, seed, args.out, seconds=seconds,
                               validation_tracks=None if validation is None
                               else int(validation))
    n_val = sum(1 for r in manifest.records if r[3] == "validation")
    print(f"wrote {len(manifest.records)} renderings ({tracks} tracks x "
          f"{len(manifest.records) // tracks} patches, {n_val} validation "
          f"entries) to {args.out}")
    return 0


def _cmd_train_mel2mel(parser, args) -> int:
    config = _train_config(parser, args, mel2mel_config)
    corpus = Corpus.load(args.data)
    model, report = train_mel2mel(corpus, config, out_dir=args.out,
                                  resume=args.resume,
                                  progress=_progress("mel2mel"))
    write_report(args.out, report)
    save_model(os.path.join(args.out, MEL2MEL_FILE), model,
               extra_meta={"iteration": config.iterations,
                           "train_config": config.to_dict()})
    print(f"final val loss {report.window_mean:.6g} +- {report.window_std:.3g}; "
          f"wrote {os.path.join(args.out, MEL2MEL_FILE)}")
    return 0


def _cmd_train_wavenet(parser, args) -> int:
    config = _train_config(parser, args, wavenet_config)
    corpus = Corpus.load(args.data)
    net, report = train_wavenet(corpus, config, out_dir=args.out,
                                resume=args.resume,
                                progress=_progress("wavenet"))
    write_report(args.out, report)
    save_model(os.path.join(args.out, WAVENET_FILE), net,
               extra_meta={"iteration": config.iterations,
                           "train_config": config.to_dict()})
    print(f"final val loss {report.window_mean:.6g} +- {report.window_std:.3g}; "
          f"wrote {os.path.join(args.out, WAVENET_FILE)}")
    return 0


def _cmd_ablate(parser, args) -> int:
    config = _train_config(parser, args, mel2mel_config)
    corpus = Corpus.load(args.data)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    variants = args.variants.split(",") if args.variants else None
    result = run_ablation_suite(corpus, config, variants=variants, seeds=seeds,
                                progress=lambda msg: print(msg, flush=True))
    os.makedirs(args.out, exist_ok=True)
    table = "\n".join(result.table_lines()) + "\n"
    with open(os.path.join(args.out, "ablation.txt"), "w") as fh:
        fh.write(table)
    print(table, end="")
    return 0


def _load_mel2mel(parser, path) -> Mel2Mel:
    model, _, _ = load_model(path)
    if not isinstance(model, Mel2Mel):
        parser.error(f"{path} is not a Mel predictor checkpoint")
    return model


def _cmd_eval(parser, args) -> int:
    os.makedirs(args.out, exist_ok=True)
    from . import plots

    if args.analysis == "degradation":
        corpus = Corpus.load(args.data)
        mel2mel = _load_mel2mel(parser, args.mel2mel) if args.mel2mel else None
        wavenet = None
        if args.wavenet:
            wavenet, _, _ = load_model(args.wavenet)
            if not isinstance(wavenet, WaveNet):
                parser.error(f"{args.wavenet} is not a vocoder checkpoint")
        stages = args.stages.split(",") if args.stages else list(STAGES)
        curves = degradation_curves(corpus, stages, mel2mel, wavenet,
                                    seed=args.seed or 0,
                                    progress=lambda m: print(m, flush=True))
        with open(os.path.join(args.out, "degradation.tsv"), "w") as fh:
            cols = "\t".join(f"octave{i + 1}" for i in range(7))
            fh.write(f"stage\tinstrument\t{cols}\n")
            for c in curves:
                inst = "all" if c.instrument is None else str(c.instrument)
                row = "\t".join(f"{v:.5f}" for v in c.octaves)
                fh.write(f"{c.stage}\t{inst}\t{row}\n")
        plots.degradation_figure(os.path.join(args.out, "degradation.png"),
                                 curves)
        last = stages[-1]
        plots.degradation_figure(
            os.path.join(args.out, "degradation_instruments.png"),
            per_instrument_breakdown(curves, last), instruments=True,
            names=[p.name for p in PATCHES])
        print(f"wrote {len(curves)} curves to {args.out}")
        return 0

    if args.analysis == "grid":
        model = _load_mel2mel(parser, args.mel2mel)
        grid = embedding_grid(model, resolution=args.resolution,
                              progress=lambda m: print(m, flush=True))
        write_matrix(os.path.join(args.out, GRID_FILES["centroid"]), grid.centroid)
        write_matrix(os.path.join(args.out, GRID_FILES["energy"]), grid.energy)
        names = [p.name for p in PATCHES[:grid.embeddings.shape[1]]]
        with open(os.path.join(args.out, "grid_points.tsv"), "w") as fh:
            fh.write("instrument\tname\tx\ty\tcol\trow\n")
            for i, name in enumerate(names):
                fh.write(f"{i}\t{name}\t{grid.embeddings[0, i]:.6f}\t"
                         f"{grid.embeddings[1, i]:.6f}\t"
                         f"{grid.pixels[i, 0]:.2f}\t{grid.pixels[i, 1]:.2f}\n")
        plots.grid_figure(os.path.join(args.out, "grid.png"), grid, names)
        print(f"wrote {grid.resolution}x{grid.resolution} maps to {args.out}")
        return 0

    # morph
    model = _load_mel2mel(parser, args.mel2mel)
    a, b, steps = _parse_morph(parser, args.morph)
    table = model.embedding_vectors()
    n = table.shape[1]
    if not (0 <= a < n and 0 <= b < n):
        parser.error(f"morph endpoints outside 0..{n - 1}")
    mels = morph_path(model, table[:, a], table[:, b], steps)
    lambdas = np.linspace(0.0, 1.0, steps)
    centroids, energies = [], []
    for i, mel in enumerate(mels):
        c, e = _mel_stats(mel[:, None, :])
        centroids.append(float(c[0]))
        energies.append(float(e[0]))
        write_matrix(os.path.join(args.out, f"morph_{i}_mel.mat"), mel)
    with open(os.path.join(args.out, "morph.tsv"), "w") as fh:
        fh.write("step\tlambda\tcentroid_hz\tenergy_db\n")
        for i, lam in enumerate(lambdas):
            fh.write(f"{i}\t{lam:.4f}\t{centroids[i]:.3f}\t{energies[i]:.3f}\n")
    plots.morph_figure(os.path.join(args.out, "morph.png"), lambdas,
                       centroids, energies)
    print(f"wrote {steps} morph steps to {args.out}")
    return 0


def _parse_morph(parser, raw: str) -> tuple[int, int, int]:
    parts = raw.split(":")
    if len(parts) != 3:
        parser.error("--morph expects A:B:STEPS")
    try:
        a, b, steps = (int(p) for p in parts)
    except ValueError:
        parser.error("--morph expects integers A:B:STEPS")
    if steps < 2:
        parser.error("--morph needs at least 2 steps")
    return a, b, steps


def _resolve_checkpoint(parser, explicit, directory, filename, required):
    if explicit:
        return explicit
    directory = directory or os.environ.get(CHECKPOINT_ENV)
    if directory:
        path = os.path.join(directory, filename)
        if os.path.exists(path) or required:
            return path
        return None
    if required:
        parser.error(f"no checkpoint given; pass --{filename.split('.')[0]} "
                     f"or --checkpoints, or set {CHECKPOINT_ENV}")
    return None


def _cmd_synth(parser, args) -> int:
    from . import plots

    mel_path = _resolve_checkpoint(parser, args.mel2mel, args.checkpoints,
                                   MEL2MEL_FILE, required=True)
    model = _load_mel2mel(parser, mel_path)
    wavenet = None
    if args.vocoder == "wavenet":
        wn_path = _resolve_checkpoint(parser, args.wavenet, args.checkpoints,
                                      WAVENET_FILE, required=True)
        wavenet, _, _ = load_model(wn_path)
        if not isinstance(wavenet, WaveNet):
            parser.error(f"{wn_path} is not a vocoder checkpoint")

    midi_data = None
    if args.midi:
        with open(args.midi, "rb") as fh:
            midi_data = fh.read()

    embedding = None
    if args.embedding is not None:
        try:
            embedding = np.asarray([float(v) for v in args.embedding.split(",")])
        except ValueError:
            parser.error("--embedding expects comma-separated floats")

    requests: list[tuple[str, SynthesisRequest]] = []
    base, ext = os.path.splitext(args.out)
    ext = ext or ".wav"
    if args.morph is not None:
        a, b, steps = _parse_morph(parser, args.morph)
        for i, lam in enumerate(np.linspace(0.0, 1.0, steps)):
            requests.append((f"{base}_morph{i}",
                             SynthesisRequest(midi_data, morph=(a, b, float(lam)),
                                              vocoder=args.vocoder,
                                              temperature=args.temperature,
                                              seed=args.seed)))
    else:
        requests.append((base,
                         SynthesisRequest(midi_data, instrument=args.instrument,
                                          embedding=embedding,
                                          vocoder=args.vocoder,
                                          temperature=args.temperature,
                                          seed=args.seed)))

    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    for stem, request in requests:
        try:
            result = synthesize(model, wavenet, request)
        except ValueError as err:
            parser.error(str(err))
        write_wav(stem + ext, result.wav)
        write_matrix(stem + "_mel.mat", result.mel)
        plots.mel_figure(stem + "_mel.png", result.mel,
                         title=os.path.basename(stem))
        timing = ", ".join(f"{k} {v:.1f} ms"
                           for k, v in result.timings_ms.items())
        print(f"{stem + ext}: {result.mel.shape[1]} frames, "
              f"{len(result.wav)} samples ({timing})")
    return 0


def _cmd_serve(parser, args) -> int:
    import uvicorn

    try:
        state = load_state(args.checkpoints, max_wavenet_streams=args.max_streams)
    except RuntimeError as err:
        parser.error(str(err))
    app = create_app(state, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="melsynth",
        description="MIDI-to-audio synthesis with learned timbre embeddings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="generate the rendered corpus")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--preset", choices=sorted(DATASET_PRESETS))
    p.add_argument("--seed", type=int)
    p.add_argument("--tracks", type=int)
    p.add_argument("--seconds", type=float)
    p.add_argument("--out", required=True)

    for name in ("train-mel2mel", "train-wavenet"):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} training run")
        _add_train_flags(p)
        p.add_argument("--data", required=True, help="corpus directory")
        p.add_argument("--resume", help="checkpoint.bin to continue from")

    p = sub.add_parser("ablate", help="train and compare model variants")
    _add_train_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--variants", help="comma-separated variant names")

    p = sub.add_parser("eval", help="analysis reports")
    p.add_argument("analysis", choices=("degradation", "grid", "morph"))
    p.add_argument("--data", help="corpus directory (degradation)")
    p.add_argument("--mel2mel", help="Mel predictor checkpoint")
    p.add_argument("--wavenet", help="vocoder checkpoint")
    p.add_argument("--stages", help="comma-separated stage subset")
    p.add_argument("--resolution", type=int, default=320)
    p.add_argument("--morph", default="0:1:5", metavar="A:B:STEPS")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="synthesize a MIDI file")
    p.add_argument("--midi", help="SMF path (defaults to the probe note)")
    pick = p.add_mutually_exclusive_group(required=True)
    pick.add_argument("--instrument", type=int, metavar="ID")
    pick.add_argument("--embedding", metavar="X,Y")
    pick.add_argument("--morph", metavar="A:B:STEPS")
    p.add_argument("--vocoder", choices=("preview", "wavenet"),
                   default="preview")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output WAV path")
    p.add_argument("--checkpoints", help="directory with mel2mel.bin etc.")
    p.add_argument("--mel2mel", help="explicit Mel predictor checkpoint")
    p.add_argument("--wavenet", help="explicit vocoder checkpoint")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--checkpoints",
                   help=f"checkpoint directory (default ${CHECKPOINT_ENV})")
    p.add_argument("--static", help="UI bundle directory to host at /")
    p.add_argument("--max-streams", type=int, default=1,
                   help="concurrent wavenet sampling cap")

    return parser


_COMMANDS = {
    "dataset": _cmd_dataset,
    "train-mel2mel": _cmd_train_mel2mel,
    "train-wavenet": _cmd_train_wavenet,
    "ablate": _cmd_ablate,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return _COMMANDS[args.command](parser, args)


if __name__ == "__main__":
    sys.exit(main())
