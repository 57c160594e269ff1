"""Bit vectors, power normalization, SNR arithmetic and error-rate metrics.

Messages are arrays of 0/1 values with the block length ``K`` on the last
axis. Complex blocks are stored as real pairs with shape ``(..., K, 2)``:
``[..., 0]`` is the in-phase part and ``[..., 1]`` the quadrature part.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError

ROUNDING_THRESHOLD = 0.5


@dataclass(frozen=True)
class BlerRecord:
    snr_db: float
    bler: float
    ber: float
    num_blocks: int

    def __post_init__(self):
        if not (0.0 <= self.ber <= 1.0 and 0.0 <= self.bler <= 1.0):
            raise InvalidArgumentError("error rates must lie in [0, 1]")
        if self.bler < self.ber:
            raise InvalidArgumentError(f"bler {self.bler} < ber {self.ber}")
        if self.num_blocks < 1:
            raise InvalidArgumentError("num_blocks must be positive")


def generate_message(K: int, rng: np.random.Generator, batch: int | None = None) -> np.ndarray:
    """Draw i.i.d. uniform bits.

    Returns shape ``(K,)`` or ``(batch, K)`` with dtype float64 so the result
    can be fed to the networks without a cast.
    """
    if K <= 0:
        raise InvalidArgumentError(f"block length must be positive, got {K}")
    shape = (K,) if batch is None else (batch, K)
    return rng.integers(0, 2, size=shape).astype(np.float64)


def block_power(x: np.ndarray) -> np.ndarray:
    return np.sum(x * x, axis=(-2, -1))


def normalize_power(raw: np.ndarray, n: int | None = None) -> np.ndarray:
    """Scale each ``(K, 2)`` block so its total power equals ``n`` (default K)."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim < 2 or raw.shape[-1] != 2:
        raise InvalidArgumentError(f"expected (..., K, 2) block, got shape {raw.shape}")
    K = raw.shape[-2]
    n = K if n is None else n
    if n != K:
        raise InvalidArgumentError(f"block has {K} symbols but n={n} channel uses")
    power = block_power(raw)
    if np.any(power == 0.0):
        raise DegenerateInputError("cannot normalize an all-zero block")
    scale = np.sqrt(n / power)
    return raw * scale[..., None, None]


def snr_to_noise_variance(snr_db: float) -> float:
    """Total complex noise variance N0 at unit symbol power; N0/2 per real part."""
    return float(10.0 ** (-np.asarray(snr_db, dtype=np.float64) / 10.0))


def round_to_bits(p: np.ndarray) -> np.ndarray:
    """Hard decision on bit probabilities; an exact 0.5 maps to 1."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidArgumentError("probabilities must lie in [0, 1]")
    return (p >= ROUNDING_THRESHOLD).astype(np.float64)


def block_error_rate(truth: np.ndarray, estimate: np.ndarray) -> tuple[float, float]:
    """Return ``(bler, ber)`` for batches of shape ``(N, K)``."""
    truth = np.atleast_2d(np.asarray(truth))
    estimate = np.atleast_2d(np.asarray(estimate))
    if truth.shape != estimate.shape or truth.size == 0:
        raise InvalidArgumentError(
            f"mismatched or empty batches: {truth.shape} vs {estimate.shape}"
        )
    wrong = truth != estimate
    bler = float(np.mean(np.any(wrong, axis=-1)))
    ber = float(np.mean(wrong))
    return bler, ber
