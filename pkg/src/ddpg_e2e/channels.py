"""Block-fading channels: AWGN, Rayleigh and Rician.

One complex coefficient ``h`` is drawn per transmitted block and held for all
``K`` symbols of that block; ``y_k = h * x_k + w_k``. Realizations are stored
as ``(..., 2)`` real pairs like the signal blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

KINDS = ("awgn", "rayleigh", "rician")

# Worst-case relative error of bessel_i0e is ~4e-11, reached at this switchover.
_I0_SWITCHOVER = 12.0


@dataclass(frozen=True)
class ChannelConfig:
    kind: str = "awgn"
    rician_factor: float = 1.0
    sigma: float | None = None
    snr_db: float = 20.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown channel kind {self.kind!r}")
        if not self.rician_factor >= 0.0:
            raise InvalidArgumentError(f"rician_factor must be >= 0, got {self.rician_factor}")
        if self.sigma is not None and not self.sigma > 0.0:
            raise InvalidArgumentError(f"sigma must be > 0, got {self.sigma}")

    @property
    def scale(self) -> float:
        """Scattered-component scale; the default gives E[|h|^2] = 1."""
        if self.sigma is not None:
            return float(self.sigma)
        L = self.rician_factor if self.kind == "rician" else 0.0
        return math.sqrt(1.0 / (2.0 * (1.0 + L)))


def sample_channel_realization(cfg: ChannelConfig, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw block-fading coefficients as ``(re, im)`` pairs.

    ``size`` follows numpy conventions; the result has shape ``size + (2,)``.
    The Rician line-of-sight component has phase zero.
    """
    shape = () if size is None else (size if isinstance(size, tuple) else (size,))
    if cfg.kind == "awgn":
        h = np.zeros(shape + (2,))
        h[..., 0] = 1.0
        return h
    sigma = cfg.scale
    h = sigma * rng.standard_normal(shape + (2,))
    if cfg.kind == "rician":
        h[..., 0] += sigma * math.sqrt(2.0 * cfg.rician_factor)
    return h


def complex_multiply(h: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Multiply blocks ``x`` of shape (..., K, 2) by per-block ``h`` of shape (..., 2)."""
    hr = h[..., None, 0]
    hi = h[..., None, 1]
    xr, xi = x[..., 0], x[..., 1]
    return np.stack([hr * xr - hi * xi, hr * xi + hi * xr], axis=-1)


def draw_noise(shape, noise_variance: float, rng: np.random.Generator) -> np.ndarray:
    if noise_variance < 0:
        raise InvalidArgumentError(f"noise variance must be >= 0, got {noise_variance}")
    return math.sqrt(noise_variance / 2.0) * rng.standard_normal(shape)


def apply_channel(x: np.ndarray, h: np.ndarray, noise_variance: float, rng: np.random.Generator) -> np.ndarray:
    """Received blocks ``h * x + w`` with complex noise of total variance ``noise_variance``."""
    if noise_variance < 0:
        raise InvalidArgumentError(f"noise variance must be >= 0, got {noise_variance}")
    x = np.asarray(x, dtype=np.float64)
    y = complex_multiply(np.asarray(h, dtype=np.float64), x)
    if noise_variance > 0:
        y = y + draw_noise(x.shape, noise_variance, rng)
    return y


def _i0_series(z: np.ndarray) -> np.ndarray:
    # sum_k (z^2/4)^k / (k!)^2; all terms positive, 60 terms reach 1e-17 below z=12
    q = z * z / 4.0
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 60):
        term = term * q / (k * k)
        total = total + term
    return total


def _i0e_asymptotic(z: np.ndarray) -> np.ndarray:
    # e^{-z} I0(z) ~ (2 pi z)^{-1/2} sum_k prod_{j<=k} (2j-1)^2 / (k! (8z)^k)
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 30):
        term = term * (2 * k - 1) ** 2 / (k * 8.0 * z)
        total = total + term
    return total / np.sqrt(2.0 * np.pi * z)


def bessel_i0e(z) -> np.ndarray:
    """Exponentially scaled modified Bessel function ``exp(-|z|) * I0(z)``.

    Power series below ``|z| = 12``, asymptotic expansion above it.
    """
    z = np.abs(np.asarray(z, dtype=np.float64))
    out = np.empty_like(z)
    small = z < _I0_SWITCHOVER
    out[small] = _i0_series(z[small]) * np.exp(-z[small])
    out[~small] = _i0e_asymptotic(z[~small])
    return out


def bessel_i0(z) -> np.ndarray:
    z = np.abs(np.asarray(z, dtype=np.float64))
    return bessel_i0e(z) * np.exp(z)


def channel_pdf(x, cfg: ChannelConfig, sigma: float | None = None) -> np.ndarray:
    """Amplitude density of ``|h|``.

    Rayleigh: ``(x / s^2) exp(-x^2 / 2 s^2)``.
    Rician with factor L: ``(x / s^2) exp(-L - x^2 / 2 s^2) I0(x sqrt(2L) / s)``,
    the normalized density whose mean power is ``2 s^2 (1 + L)``.
    AWGN has no density (the amplitude is the constant 1).
    """
    s = cfg.scale if sigma is None else sigma
    x = np.asarray(x, dtype=np.float64)
    if not s > 0:
        raise InvalidArgumentError(f"sigma must be > 0, got {s}")
    if np.any(x < 0):
        raise InvalidArgumentError("amplitude must be >= 0")
    s2 = s * s
    if cfg.kind == "rayleigh":
        return x / s2 * np.exp(-x * x / (2.0 * s2))
    if cfg.kind == "rician":
        L = cfg.rician_factor
        arg = x * math.sqrt(2.0 * L) / s
        # fold exp(arg) of I0 into the Gaussian exponent to avoid overflow
        return x / s2 * np.exp(-L - x * x / (2.0 * s2) + arg) * bessel_i0e(arg)
    raise InvalidArgumentError("the AWGN channel has a constant unit gain, no density")


def rayleigh_cdf(x, sigma: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, -np.expm1(-x * x / (2.0 * sigma * sigma)), 0.0)
