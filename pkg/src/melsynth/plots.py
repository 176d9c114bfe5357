"""Matplotlib figure rendering to files, paired with the delimited dumps."""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def loss_curve_figure(path, report) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.arange(1, len(report.train_loss) + 1), report.train_loss,
            lw=0.8, label="train")
    if report.val_loss:
        ax.plot(report.val_iterations, report.val_loss, "o-", ms=3,
                label="validation")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.set_title(f"{report.target} training")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def degradation_figure(path, curves, instruments: bool = False,
                       names: list[str] | None = None) -> None:
    """Octave-smoothed correlation curves; aggregate per stage by default,
    per-instrument for one stage when `instruments` is set."""
    fig, ax = plt.subplots(figsize=(7, 4))
    octave_axis = np.arange(1, 8)
    for c in curves:
        if instruments:
            if c.instrument is None:
                continue
            label = names[c.instrument] if names else f"instrument {c.instrument}"
        else:
            if c.instrument is not None:
                continue
            label = c.stage
        ax.plot(octave_axis, c.octaves, "o-", ms=3, label=label)
    ax.set_xlabel("octave")
    ax.set_ylabel("CQT Pearson correlation")
    ax.set_ylim(-0.1, 1.05)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def grid_figure(path, grid, names: list[str] | None = None) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(11, 5))
    for ax, data, title in ((axes[0], grid.centroid, "spectral centroid (Hz)"),
                            (axes[1], grid.energy, "mean energy (dB)")):
        im = ax.imshow(data, origin="lower", cmap="viridis")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.8)
        for k, (px, py) in enumerate(grid.pixels):
            ax.plot(px, py, "wo", ms=4, mec="black")
            label = names[k] if names else str(k)
            ax.annotate(label, (px, py), color="white", fontsize=6,
                        xytext=(3, 3), textcoords="offset points")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def mel_figure(path, mel_compressed: np.ndarray, title: str = "Mel (tanh-log)") -> None:
    fig, ax = plt.subplots(figsize=(8, 3))
    im = ax.imshow(mel_compressed, origin="lower", aspect="auto",
                   cmap="magma", vmin=-1.0, vmax=1.0)
    ax.set_xlabel("frame")
    ax.set_ylabel("mel filter")
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def morph_figure(path, lambdas, centroids, energies) -> None:
    fig, ax1 = plt.subplots(figsize=(6, 4))
    ax1.plot(lambdas, centroids, "o-", color="tab:blue")
    ax1.set_xlabel("interpolation λ")
    ax1.set_ylabel("spectral centroid (Hz)", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(lambdas, energies, "s--", color="tab:red")
    ax2.set_ylabel("mean energy (dB)", color="tab:red")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
