"""Training orchestration for both models plus the ablation matrix.

Runs are deterministic: every iteration draws its batch from a fresh
per-iteration seed stream, so a resumed run continues with exactly the
batches an uninterrupted run would have seen. Validation re-uses one fixed
seed, making validation losses comparable across checkpoints.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import autograd as ag
from .checkpoint import load_model, save_model
from .corpus import Corpus
from .dsp import HOP
from .instruments import N_INSTRUMENTS
from .model import Mel2Mel, Mel2MelConfig, mel2mel_loss, VARIANTS
from .nn import Adam, lr_schedule, DTYPE
from .wavenet import WaveNet, WaveNetConfig

VALIDATION_BATCHES = 2
VALIDATION_SEED_TAG = 1_000_000_007


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite loss at iteration {iteration}")
        self.iteration = iteration


@dataclass
class TrainConfig:
    target: str                  # mel2mel | wavenet
    preset: str = "desk"
    loss: str = "tanhlog"        # mel2mel only
    variant: str = "proposed"    # mel2mel only
    batch_size: int = 8
    seq_samples: int = 8192
    iterations: int = 3000
    lr: float = 0.002
    lr_halve: int = 40_000
    seed: int = 0
    embedding_dim: int = 2

    def __post_init__(self):
        if self.seq_samples % HOP:
            raise ValueError("seq_samples must be a multiple of 128")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def mel2mel_config(preset: str = "desk", **overrides) -> TrainConfig:
    base = {"target": "mel2mel", "preset": preset, "lr": 0.002, "lr_halve": 40_000}
    if preset == "paper":
        base.update(batch_size=128, seq_samples=65_536, iterations=100_000)
    elif preset == "desk":
        base.update(batch_size=8, seq_samples=8_192, iterations=3_000)
    else:
        raise ValueError(f"unknown preset {preset!r}")
    base.update(overrides)
    return TrainConfig(**base)


def wavenet_config(preset: str = "desk", **overrides) -> TrainConfig:
    base = {"target": "wavenet", "preset": preset, "lr": 0.001, "lr_halve": 100_000}
    if preset == "paper":
        base.update(batch_size=4, seq_samples=16_384, iterations=1_000_000)
    elif preset == "desk":
        base.update(batch_size=2, seq_samples=4_096, iterations=10_000)
    else:
        raise ValueError(f"unknown preset {preset!r}")
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class RunReport:
    target: str
    train_loss: list[float] = field(default_factory=list)
    val_iterations: list[int] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    window_mean: float = float("nan")
    window_std: float = float("nan")

    def finalize(self):
        """Mean and std of validation loss over the final 10% of checkpoints
        (at least 2)."""
        if self.val_loss:
            k = max(2, int(np.ceil(len(self.val_loss) * 0.10)))
            window = np.asarray(self.val_loss[-k:], dtype=np.float64)
            self.window_mean = float(window.mean())
            self.window_std = float(window.std())
        return self

    def lines(self) -> list[str]:
        out = [f"# target={self.target}",
               f"# checkpoint_window_mean={self.window_mean:.6g}",
               f"# checkpoint_window_std={self.window_std:.6g}",
               "kind\titeration\tloss"]
        out += [f"train\t{i + 1}\t{v:.6g}" for i, v in enumerate(self.train_loss)]
        out += [f"val\t{i}\t{v:.6g}"
                for i, v in zip(self.val_iterations, self.val_loss)]
        return out


def write_report(out_dir, report: RunReport) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write("\n".join(report.lines()) + "\n")
    from .plots import loss_curve_figure
    loss_curve_figure(os.path.join(out_dir, "loss_curve.png"), report)


def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, iteration)))


def _validation_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, VALIDATION_SEED_TAG)))


def _val_split(corpus: Corpus) -> str:
    return "validation" if corpus.indices("validation") else "train"


def _cadence(iterations: int) -> int:
    return max(1, iterations // 20)       # every 5%


# ---------------------------------------------------------------------------
# Mel2Mel


def _mel2mel_val(model: Mel2Mel, corpus: Corpus, config: TrainConfig) -> float:
    rng = _validation_rng(config.seed)
    frames = config.seq_samples // HOP
    split = _val_split(corpus)
    losses = []
    with ag.no_grad():
        for _ in range(VALIDATION_BATCHES):
            roll, mel, ids = corpus.sample_mel2mel(rng, config.batch_size,
                                                   frames, split)
            pred = model.forward(roll.astype(DTYPE), ids)
            losses.append(mel2mel_loss(pred, mel, config.loss).item())
    return float(np.mean(losses))


def train_mel2mel(corpus: Corpus, config: TrainConfig, out_dir=None,
                  resume=None, progress=None) -> tuple[Mel2Mel, RunReport]:
    frames = config.seq_samples // HOP
    adam_blobs = None
    start = 0
    if resume is not None:
        model, meta, extra = load_model(resume)
        start = int(meta["iteration"])
        adam_blobs = (extra, int(meta["adam_step"]))
    else:
        model = Mel2Mel(Mel2MelConfig(variant=config.variant,
                                      n_instruments=N_INSTRUMENTS,
                                      embedding_dim=config.embedding_dim),
                        seed=config.seed)
    named = model.named_params()
    adam = Adam([p for _, p in named])
    if adam_blobs is not None:
        adam.load_state_blobs(named, *adam_blobs)

    report = RunReport(target="mel2mel")
    cadence = _cadence(config.iterations)
    for it in range(start, config.iterations):
        rng = _iteration_rng(config.seed, it)
        roll, mel, ids = corpus.sample_mel2mel(rng, config.batch_size, frames)
        pred = model.forward(roll.astype(DTYPE), ids)
        loss = mel2mel_loss(pred, mel, config.loss)
        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(it)
        model.zero_grad()
        loss.backward()
        adam.step(lr_schedule(config.lr, config.lr_halve, it))
        report.train_loss.append(value)
        if (it + 1) % cadence == 0 or it + 1 == config.iterations:
            val = _mel2mel_val(model, corpus, config)
            report.val_iterations.append(it + 1)
            report.val_loss.append(val)
            if progress is not None:
                progress(it + 1, value, val)
            if out_dir is not None:
                _save_training_state(out_dir, model, config, adam, named, it + 1)
    return model, report.finalize()


# ---------------------------------------------------------------------------
# WaveNet


def _wavenet_val(net: WaveNet, corpus: Corpus | None, config: TrainConfig,
                 fixed_example=None) -> float:
    with ag.no_grad():
        if fixed_example is not None:
            codes, mel = fixed_example
            return net.loss(codes, mel).item()
        rng = _validation_rng(config.seed)
        split = _val_split(corpus)
        losses = []
        for _ in range(VALIDATION_BATCHES):
            codes, mel = corpus.sample_wavenet(rng, config.batch_size,
                                               config.seq_samples, split)
            losses.append(net.loss(codes, mel).item())
        return float(np.mean(losses))


def train_wavenet(corpus: Corpus | None, config: TrainConfig, out_dir=None,
                  resume=None, fixed_example=None,
                  progress=None) -> tuple[WaveNet, RunReport]:
    """Train the vocoder; `fixed_example` (codes (B,T), mel (80,B,F))
    replaces corpus sampling for memorization runs."""
    if corpus is None and fixed_example is None:
        raise ValueError("need a corpus or a fixed example")
    adam_blobs = None
    start = 0
    if resume is not None:
        net, meta, extra = load_model(resume)
        start = int(meta["iteration"])
        adam_blobs = (extra, int(meta["adam_step"]))
    else:
        wn_config = WaveNetConfig.paper() if config.preset == "paper" \
            else WaveNetConfig.desk()
        net = WaveNet(wn_config, seed=config.seed)
    named = net.named_params()
    adam = Adam([p for _, p in named])
    if adam_blobs is not None:
        adam.load_state_blobs(named, *adam_blobs)

    report = RunReport(target="wavenet")
    cadence = _cadence(config.iterations)
    for it in range(start, config.iterations):
        if fixed_example is not None:
            codes, mel = fixed_example
        else:
            rng = _iteration_rng(config.seed, it)
            codes, mel = corpus.sample_wavenet(rng, config.batch_size,
                                               config.seq_samples)
        loss = net.loss(codes, mel)
        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(it)
        net.zero_grad()
        loss.backward()
        adam.step(lr_schedule(config.lr, config.lr_halve, it))
        report.train_loss.append(value)
        if (it + 1) % cadence == 0 or it + 1 == config.iterations:
            val = _wavenet_val(net, corpus, config, fixed_example)
            report.val_iterations.append(it + 1)
            report.val_loss.append(val)
            if progress is not None:
                progress(it + 1, value, val)
            if out_dir is not None:
                _save_training_state(out_dir, net, config, adam, named, it + 1)
    return net, report.finalize()


def _save_training_state(out_dir, model, config: TrainConfig, adam: Adam,
                         named, iteration: int) -> None:
    os.makedirs(out_dir, exist_ok=True)
    save_model(os.path.join(out_dir, "checkpoint.bin"), model,
               extra_meta={"iteration": iteration,
                           "adam_step": adam.step_count,
                           "train_config": config.to_dict()},
               extra_blobs=adam.state_blobs(named))


# ---------------------------------------------------------------------------
# ablation suite


VARIANT_LABELS = {
    "proposed": "Proposed",
    "frame_only": "Frame roll only",
    "onset_only": "Onset roll only",
    "film1_only": "First FiLM layer only",
    "film2_only": "Second FiLM layer only",
    "fwd_lstm_only": "Forward LSTM only",
    "relu": "ReLU nonlinearity",
    "conv3": "Conv kernel size 3",
    "conv5": "Conv kernel size 5",
    "lstm2": "2-layer LSTM",
}

ORDERING_CHECKS = (
    ("frame_only", ">", "proposed"),
    ("onset_only", ">", "proposed"),
    ("film2_only", ">", "film1_only"),
)


@dataclass
class AblationResult:
    variants: list[str]
    seeds: list[int]
    train: dict[str, list[float]]      # variant -> per-seed final train loss
    val: dict[str, list[float]]        # variant -> per-seed final val loss
    flags: dict[str, str]              # "a>b" -> pass | warn

    def table_lines(self) -> list[str]:
        rows = [f"{'Variations':24} | Train loss (x10^3)  | Validation loss (x10^3)"]
        for v in self.variants:
            tr = np.asarray(self.train[v]) * 1e3
            va = np.asarray(self.val[v]) * 1e3
            rows.append(f"{VARIANT_LABELS[v]:24} | {tr.mean():8.3f} +- {tr.std():6.3f} "
                        f"| {va.mean():8.3f} +- {va.std():6.3f}")
        for check, flag in self.flags.items():
            rows.append(f"# ordering {check}: {flag}")
        return rows


def run_ablation_suite(corpus: Corpus, base: TrainConfig, variants=None,
                       seeds=(0, 1, 2), progress=None) -> AblationResult:
    """Train each variant with the same seeds and data; per-variant failures
    are isolated and reported as NaN rows."""
    variants = list(variants) if variants is not None else list(VARIANTS[:5])
    if "proposed" in variants:
        variants.remove("proposed")
        variants.insert(0, "proposed")
    train: dict[str, list[float]] = {v: [] for v in variants}
    val: dict[str, list[float]] = {v: [] for v in variants}
    for v in variants:
        for s in seeds:
            config = replace(base, variant=v, seed=s)
            try:
                _, report = train_mel2mel(corpus, config)
                train[v].append(report.train_loss[-1])
                val[v].append(report.val_loss[-1])
            except DivergenceError as err:
                train[v].append(float("nan"))
                val[v].append(float("nan"))
                if progress is not None:
                    progress(f"{v} seed {s}: {err}")
            if progress is not None:
                progress(f"{v} seed {s}: done")

    flags = {}
    for worse, _, better in ORDERING_CHECKS:
        if worse in val and better in val:
            wins = sum(1 for a, b in zip(val[worse], val[better]) if a > b)
            flags[f"{worse}>{better}"] = "pass" if wins * 2 > len(seeds) else "warn"
    return AblationResult(variants, list(seeds), train, val, flags)
