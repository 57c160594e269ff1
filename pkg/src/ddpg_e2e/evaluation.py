"""BLER/BER sweeps over SNR and CSV export of curves and training logs."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channels import ChannelConfig, sample_channel_realization, apply_channel
from .core import BlerRecord, block_error_rate, generate_message, round_to_bits, snr_to_noise_variance
from .errors import InvalidArgumentError

CURVE_COLUMNS = ("snr_db", "bler", "ber", "num_blocks")
FLOAT_FORMAT = "{:.10g}"


def snr_grid(start: float = 0.0, end: float = 20.0, step: float = 2.0) -> tuple[float, ...]:
    """Inclusive grid ``start, start + step, ..., end``."""
    if step <= 0 or end < start:
        raise InvalidArgumentError(f"bad SNR grid {start}:{end}:{step}")
    n = int(math.floor((end - start) / step + 1e-9)) + 1
    return tuple(float(start + i * step) for i in range(n))


@dataclass(frozen=True)
class SweepConfig:
    snr_db: tuple[float, ...] = field(default_factory=snr_grid)
    blocks: int = 100_000
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    seed: int = 0
    chunk: int = 8192

    def __post_init__(self):
        grid = tuple(self.snr_db)
        if not grid:
            raise InvalidArgumentError("SNR grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidArgumentError("SNR grid must be strictly ascending")
        if self.blocks < 1 or self.chunk < 1:
            raise InvalidArgumentError("blocks and chunk must be positive")


@dataclass
class BlerCurve:
    records: list[BlerRecord]
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)


def point_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per grid point, so points can be evaluated in any order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def evaluate_point(encode, decode, K: int, channel: ChannelConfig, snr_db: float, blocks: int,
                   rng: np.random.Generator, chunk: int = 8192) -> BlerRecord:
    """Monte Carlo BLER/BER at one SNR.

    ``encode(m) -> x`` maps ``(N, K)`` bits to ``(N, K, 2)`` blocks and
    ``decode(y, h) -> p`` returns ``(N, K)`` bit probabilities; the receiver
    is given the true channel coefficient.
    """
    noise_var = snr_to_noise_variance(snr_db)
    block_errors = bit_errors = 0
    done = 0
    while done < blocks:
        n = min(chunk, blocks - done)
        m = generate_message(K, rng, batch=n)
        h = sample_channel_realization(channel, rng, size=n)
        y = apply_channel(encode(m), h, noise_var, rng)
        m_hat = round_to_bits(decode(y, h))
        bler, ber = block_error_rate(m, m_hat)
        block_errors += round(bler * n)
        bit_errors += round(ber * n * K)
        done += n
    return BlerRecord(float(snr_db), block_errors / blocks, bit_errors / (blocks * K), blocks)


def evaluate_bler(system, sweep: SweepConfig, K: int | None = None, metadata: dict | None = None) -> BlerCurve:
    """Sweep BLER over the SNR grid.

    ``system`` is anything with ``encode`` and ``decode`` methods (a trainer,
    a :class:`~ddpg_e2e.checkpoint.Checkpoint` via ``to_link()``, or a
    test stub). Networks are only run in inference mode.
    """
    if hasattr(system, "to_link"):
        system = system.to_link()
    K = K if K is not None else system.block_length
    records = [
        evaluate_point(system.encode, system.decode, K, sweep.channel, snr, sweep.blocks,
                       point_rng(sweep.seed, i), sweep.chunk)
        for i, snr in enumerate(sweep.snr_db)
    ]
    meta = {"channel": sweep.channel.kind, "K": K, "seed": sweep.seed}
    meta.update(metadata or {})
    return BlerCurve(records, meta)


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FORMAT.format(float(v))


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    if not rows:
        raise InvalidArgumentError("refusing to export an empty result")
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def export_results(result, path) -> Path:
    """Write a :class:`BlerCurve` or a training log as CSV (10 significant digits)."""
    if isinstance(result, BlerCurve):
        rows = [[r.snr_db, r.bler, r.ber, r.num_blocks] for r in result.records]
        return write_csv(path, CURVE_COLUMNS, rows)
    if hasattr(result, "to_csv"):
        if not len(result):
            raise InvalidArgumentError("refusing to export an empty result")
        result.to_csv(path)
        return Path(path)
    raise InvalidArgumentError(f"cannot export {type(result).__name__}")


def load_curve(path) -> BlerCurve:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return BlerCurve([
        BlerRecord(float(r["snr_db"]), float(r["bler"]), float(r["ber"]), int(r["num_blocks"]))
        for r in rows
    ])
