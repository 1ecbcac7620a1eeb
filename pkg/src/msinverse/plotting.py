"""Static figures for the CLI report paths.

Figures are written with the Agg backend. SVG output is made byte-stable
across runs (fixed id salt, no creation date) so repeated CLI invocations
produce identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .features import THRESHOLD_DB, DesignTarget  # noqa: E402
from .surrogate import FREQUENCIES, Spectrum  # noqa: E402

STYLE = {
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.linewidth": 0.8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.2,
    "figure.figsize": (6.0, 3.2),
    "figure.dpi": 100,
    "savefig.bbox": "tight",
    "svg.fonttype": "path",
    "svg.hashsalt": "msinverse",
    "path.simplify": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "svg"
    metadata = {"Date": None} if fmt in ("svg", "pdf") else None
    if fmt == "png":
        metadata = {"Software": None}
    fig.savefig(path, format=fmt, metadata=metadata)
    plt.close(fig)
    return path


def plot_spectrum(
    spectrum: Spectrum,
    path,
    target: DesignTarget | None = None,
    achieved: DesignTarget | None = None,
    title: str | None = None,
) -> Path:
    """Reflection curve with the -10 dB line, requested notches as open
    markers and detected notches as filled ones."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(FREQUENCIES, spectrum.values, color="#1f4e79", label="reflection")
        ax.axhline(THRESHOLD_DB, color="0.5", lw=0.7, ls="--")
        if target is not None and len(target):
            ax.plot(
                [n.freq_ghz for n in target], [n.depth_db for n in target],
                ls="none", marker="o", mfc="none", mec="#c0392b", label="target",
            )
        if achieved is not None and len(achieved):
            ax.plot(
                [n.freq_ghz for n in achieved], [n.depth_db for n in achieved],
                ls="none", marker="v", color="#1f4e79", ms=4, label="detected",
            )
        ax.set_xlim(FREQUENCIES[0], FREQUENCIES[-1])
        ax.set_ylim(min(-45.0, float(spectrum.values.min()) - 2.0), 1.0)
        ax.set_xlabel("frequency (GHz)")
        ax.set_ylabel("reflection (dB)")
        if title:
            ax.set_title(title)
        if target is not None or achieved is not None:
            ax.legend(loc="lower right")
        return _save(fig, path)


def plot_history(history: Sequence, path, title: str | None = None) -> Path:
    """Loss and bit-accuracy curves per epoch, train and held-out."""
    epochs = np.array([h.epoch for h in history])
    with plt.rc_context(STYLE):
        fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(7.0, 2.8))
        ax_loss.plot(epochs, [h.loss for h in history], label="train")
        ax_acc.plot(epochs, [h.accuracy for h in history], label="train")
        if history and history[0].val_loss is not None:
            ax_loss.plot(epochs, [h.val_loss for h in history], label="test")
            ax_acc.plot(epochs, [h.val_accuracy for h in history], label="test")
        ax_loss.set_yscale("log")
        ax_loss.set_xlabel("epoch")
        ax_loss.set_ylabel("MSE")
        ax_acc.set_xlabel("epoch")
        ax_acc.set_ylabel("bit accuracy")
        ax_acc.legend(loc="lower right")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_mask(mask, path, title: str | None = None) -> Path:
    """The 32x32 copper layout, with the 4x4 tile grid overlaid."""
    mask = np.asarray(mask)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.2, 3.2))
        ax.imshow(mask, cmap="copper_r", vmin=0, vmax=1, interpolation="nearest")
        for k in range(1, 4):
            ax.axhline(8 * k - 0.5, color="0.6", lw=0.5)
            ax.axvline(8 * k - 0.5, color="0.6", lw=0.5)
        ax.set_xticks([])
        ax.set_yticks([])
        if title:
            ax.set_title(title)
        return _save(fig, path)
