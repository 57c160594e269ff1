"""Line charts of training logs and BLER curves, written to image files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import InvalidArgumentError  # noqa: E402

TRAINING_PANELS = {
    "reward": ("reward_mean", "Averaged episodic reward"),
    "critic_loss": ("critic_loss", "Critic loss"),
    "receiver_loss": ("receiver_loss", "Receiver loss"),
}


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over up to ``window`` finite values; NaN where none exist."""
    values = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(values)
    total = np.cumsum(np.where(finite, values, 0.0))
    count = np.cumsum(finite)
    lag = lambda a: np.concatenate([np.zeros(window), a[:-window]]) if window < len(a) else np.zeros_like(a)
    n = count - lag(count)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, (total - lag(total)) / n, np.nan)


def plot_training_log(log, out_dir, window: int = 10, fmt: str = "png") -> list[Path]:
    """One chart per training signal (raw and ``window``-episode average)."""
    if len(log) == 0:
        raise InvalidArgumentError("training log is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    episodes = log.column("episode")
    paths = []
    for name, (column, title) in TRAINING_PANELS.items():
        values = log.column(column)
        fig, ax = plt.subplots(figsize=(6, 4))
        if np.isfinite(values).any():
            ax.plot(episodes, values, color="0.7", lw=0.8, label="per episode")
            ax.plot(episodes, moving_average(values, window), lw=1.5, label=f"{window}-episode mean")
            ax.legend()
        else:
            ax.text(0.5, 0.5, "not recorded by this trainer", ha="center", transform=ax.transAxes)
        ax.set(xlabel="Episode", ylabel=column, title=title)
        ax.grid(alpha=0.3)
        path = out_dir / f"{name}.{fmt}"
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_bler_curves(curves: dict, path) -> Path:
    """Semilog BLER-vs-SNR chart; ``curves`` maps a label to a BlerCurve."""
    if not curves:
        raise InvalidArgumentError("no curves to plot")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, curve in curves.items():
        bler = curve.column("bler")
        # zero-error points cannot be drawn on a log axis
        shown = np.where(bler > 0, bler, np.nan)
        ax.semilogy(curve.column("snr_db"), shown, marker="o", label=label)
    ax.set(xlabel="SNR (dB)", ylabel="BLER")
    ax.grid(which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
