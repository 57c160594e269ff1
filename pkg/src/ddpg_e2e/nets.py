"""Transmitter (actor), receiver and critic networks.

All three are 1-D convolutional or dense stacks built from Table-style layer
descriptors in :class:`NetworkSpec`. Convolutions pad circularly so every
layer keeps the block length ``K`` and the maps are shift-equivariant.

Tensor layouts at the public boundary:

* messages ``(B, K)`` of 0/1 values
* complex blocks ``(B, K, 2)`` as (re, im) pairs
* channel realizations ``(B, 2)``
* receiver output ``(B, K)`` bit probabilities
* critic output ``(B,)``
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .errors import InvalidArgumentError

BN_EPS = 1e-5
# running = 0.99 * running + 0.01 * batch  (torch counts momentum the other way)
BN_MOMENTUM = 0.99


class TrainMode(enum.Enum):
    TRAINING = "training"
    INFERENCE = "inference"


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv | dense
    kernel: int | None
    out: int
    activation: str  # mish | sigmoid | relu | linear
    batch_norm: bool


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths and kernel sizes for the three networks.

    The defaults are the full-size architectures; tests shrink the widths to
    get toy networks with the same topology.
    """

    tx_channels: tuple[int, ...] = (256, 128, 64)
    tx_kernels: tuple[int, ...] = (5, 3, 3, 3)
    rx_channels: tuple[int, ...] = (256, 128, 64, 32)
    rx_kernels: tuple[int, ...] = (5, 5, 5, 5, 3)
    critic_branch: int = 128
    critic_hidden: tuple[int, ...] = (256, 256)

    def __post_init__(self):
        if len(self.tx_kernels) != len(self.tx_channels) + 1:
            raise InvalidArgumentError("transmitter needs one more kernel than hidden widths")
        if len(self.rx_kernels) != len(self.rx_channels) + 1:
            raise InvalidArgumentError("receiver needs one more kernel than hidden widths")
        if any(k % 2 == 0 for k in self.tx_kernels + self.rx_kernels):
            raise InvalidArgumentError("kernel sizes must be odd")

    @property
    def transmitter(self) -> list[LayerSpec]:
        layers = [LayerSpec("conv", k, c, "mish", True) for k, c in zip(self.tx_kernels, self.tx_channels)]
        layers.append(LayerSpec("conv", self.tx_kernels[-1], 2, "linear", False))
        return layers

    @property
    def receiver(self) -> list[LayerSpec]:
        layers = [LayerSpec("conv", k, c, "mish", True) for k, c in zip(self.rx_kernels, self.rx_channels)]
        layers.append(LayerSpec("conv", self.rx_kernels[-1], 1, "sigmoid", False))
        return layers

    @property
    def critic(self) -> list[LayerSpec]:
        layers = [LayerSpec("dense", None, w, "relu", True) for w in self.critic_hidden]
        layers.append(LayerSpec("dense", None, 1, "linear", True))
        return layers

    @property
    def max_kernel(self) -> int:
        return max(self.tx_kernels + self.rx_kernels)

    def to_dict(self) -> dict:
        return {
            "tx_channels": list(self.tx_channels),
            "tx_kernels": list(self.tx_kernels),
            "rx_channels": list(self.rx_channels),
            "rx_kernels": list(self.rx_kernels),
            "critic_branch": self.critic_branch,
            "critic_hidden": list(self.critic_hidden),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


def softplus(x: torch.Tensor) -> torch.Tensor:
    # ln(1 + e^x) = max(x, 0) + ln(1 + e^{-|x|}); never exponentiates a positive number
    return torch.clamp(x, min=0) + torch.log1p(torch.exp(-torch.abs(x)))


def mish(x):
    """``x * tanh(ln(1 + e^x))``; accepts tensors, arrays or floats."""
    if isinstance(x, torch.Tensor):
        return x * torch.tanh(softplus(x))
    t = torch.as_tensor(np.asarray(x, dtype=np.float64))
    out = (t * torch.tanh(softplus(t))).numpy()
    return float(out) if out.ndim == 0 else out


def circular_conv1d(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor | None = None) -> torch.Tensor:
    """Stride-1 convolution with wrap-around padding.

    ``x`` is ``(B, C_in, K)`` and ``weight`` is ``(C_out, C_in, k)``;
    ``out[b, o, t] = bias[o] + sum_{c,j} weight[o, c, j] * x[b, c, (t + j - k//2) mod K]``.
    """
    k = weight.shape[-1]
    K = x.shape[-1]
    if k % 2 == 0:
        raise InvalidArgumentError(f"kernel size must be odd, got {k}")
    if K < k:
        raise InvalidArgumentError(f"block length {K} shorter than kernel {k}")
    half = k // 2
    if half:
        x = torch.cat([x[..., K - half:], x, x[..., :half]], dim=-1)
    return F.conv1d(x, weight, bias)


class CircularConv1d(nn.Module):
    def __init__(self, c_in: int, c_out: int, kernel: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(c_out, c_in, kernel))
        self.bias = nn.Parameter(torch.zeros(c_out))

    def forward(self, x):
        return circular_conv1d(x, self.weight, self.bias)


_ACTIVATIONS = {
    "mish": mish,
    "sigmoid": torch.sigmoid,
    "relu": torch.relu,
    "linear": lambda x: x,
}


class _Block(nn.Module):
    def __init__(self, layer: nn.Module, n_out: int, spec: LayerSpec):
        super().__init__()
        self.layer = layer
        self.bn = (
            nn.BatchNorm1d(n_out, eps=BN_EPS, momentum=1.0 - BN_MOMENTUM) if spec.batch_norm else None
        )
        self.activation = spec.activation

    def forward(self, x):
        x = self.layer(x)
        if self.bn is not None:
            x = self.bn(x)
        return _ACTIVATIONS[self.activation](x)


def _conv_stack(c_in: int, layers: list[LayerSpec]) -> nn.Sequential:
    blocks = []
    for spec in layers:
        blocks.append(_Block(CircularConv1d(c_in, spec.out, spec.kernel), spec.out, spec))
        c_in = spec.out
    return nn.Sequential(*blocks)


class Transmitter(nn.Module):
    """Message bits -> K complex symbols with total power K."""

    def __init__(self, spec: NetworkSpec = NetworkSpec()):
        super().__init__()
        self.body = _conv_stack(1, spec.transmitter)

    def forward(self, m: torch.Tensor) -> torch.Tensor:
        raw = self.body(m.unsqueeze(1)).transpose(1, 2)
        return power_normalize(raw)


class Receiver(nn.Module):
    """Received block plus channel coefficient -> per-bit probabilities."""

    def __init__(self, spec: NetworkSpec = NetworkSpec()):
        super().__init__()
        self.body = _conv_stack(4, spec.receiver)

    def forward(self, y: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        K = y.shape[1]
        features = torch.cat([y, h.unsqueeze(1).expand(-1, K, -1)], dim=-1)
        return self.body(features.transpose(1, 2)).squeeze(1)


class Critic(nn.Module):
    """Q-value of a (message, encoded block) pair."""

    def __init__(self, K: int, spec: NetworkSpec = NetworkSpec()):
        super().__init__()
        self.state_in = nn.Linear(K, spec.critic_branch)
        self.action_in = nn.Linear(2 * K, spec.critic_branch)
        width = 2 * spec.critic_branch
        blocks = []
        for layer in spec.critic:
            blocks.append(_Block(nn.Linear(width, layer.out), layer.out, layer))
            width = layer.out
        self.head = nn.Sequential(*blocks)

    def forward(self, m: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
        s = torch.relu(self.state_in(m.flatten(1)))
        a = torch.relu(self.action_in(x.flatten(1)))
        return self.head(torch.cat([s, a], dim=1)).squeeze(1)


def power_normalize(raw: torch.Tensor) -> torch.Tensor:
    """Scale each ``(K, 2)`` block to total power ``K`` (differentiable)."""
    K = raw.shape[-2]
    power = torch.sum(raw * raw, dim=(-2, -1), keepdim=True)
    return raw * torch.sqrt(K / power)


def init_weights(net: nn.Module, seed: int) -> nn.Module:
    """Glorot-uniform weights, fan-in uniform biases, unit/zero batch-norm affine.

    Nonzero biases matter: with zero biases the all-zero message maps to the
    all-zero block, which power normalization cannot scale.
    """
    gen = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for module in net.modules():
            if isinstance(module, (CircularConv1d, nn.Linear)):
                w = module.weight
                receptive = w.shape[2] if w.ndim == 3 else 1
                fan_in, fan_out = w.shape[1] * receptive, w.shape[0] * receptive
                bound = math.sqrt(6.0 / (fan_in + fan_out))
                w.copy_(torch.rand(w.shape, generator=gen, dtype=w.dtype) * 2 * bound - bound)
                b = 1.0 / math.sqrt(fan_in)
                module.bias.copy_(torch.rand(module.bias.shape, generator=gen, dtype=w.dtype) * 2 * b - b)
            elif isinstance(module, nn.BatchNorm1d):
                module.reset_parameters()
                module.reset_running_stats()
    return net


def build_networks(K: int, spec: NetworkSpec = NetworkSpec(), seed: int = 0, dtype=torch.float64):
    """Fresh ``(transmitter, receiver, critic)`` with seeded initial weights."""
    if K < spec.max_kernel:
        raise InvalidArgumentError(f"block length {K} shorter than largest kernel {spec.max_kernel}")
    tx = init_weights(Transmitter(spec).to(dtype), seed)
    rx = init_weights(Receiver(spec).to(dtype), seed + 1)
    critic = init_weights(Critic(K, spec).to(dtype), seed + 2)
    return tx, rx, critic


# ---------------------------------------------------------------------------
# forward contracts


def _set_mode(net: nn.Module, mode: TrainMode):
    net.train(mode is TrainMode.TRAINING)


def _dtype(net: nn.Module):
    return next(net.parameters()).dtype


def as_tensor(a, net: nn.Module) -> torch.Tensor:
    if isinstance(a, torch.Tensor):
        return a.to(_dtype(net))
    return torch.as_tensor(np.asarray(a), dtype=_dtype(net))


def transmitter_forward(m, tx: Transmitter, mode: TrainMode = TrainMode.INFERENCE) -> torch.Tensor:
    m = as_tensor(m, tx)
    if m.ndim != 2 or m.shape[0] == 0:
        raise InvalidArgumentError(f"expected non-empty (B, K) message batch, got {tuple(m.shape)}")
    first = tx.body[0].layer.weight
    if first.shape[1] != 1 or m.shape[1] < first.shape[-1]:
        raise InvalidArgumentError("message batch incompatible with transmitter parameters")
    _set_mode(tx, mode)
    return tx(m)


def receiver_forward(y, h_hat, rx: Receiver, mode: TrainMode = TrainMode.INFERENCE) -> torch.Tensor:
    y = as_tensor(y, rx)
    h_hat = as_tensor(h_hat, rx)
    if y.ndim != 3 or y.shape[-1] != 2:
        raise InvalidArgumentError(f"expected (B, K, 2) received blocks, got {tuple(y.shape)}")
    if h_hat.shape != (y.shape[0], 2):
        raise InvalidArgumentError(
            f"channel batch {tuple(h_hat.shape)} not aligned with received batch {tuple(y.shape)}"
        )
    _set_mode(rx, mode)
    return rx(y, h_hat)


def critic_forward(m, x, critic: Critic, mode: TrainMode = TrainMode.INFERENCE) -> torch.Tensor:
    m = as_tensor(m, critic)
    x = as_tensor(x, critic)
    K = critic.state_in.in_features
    if m.ndim != 2 or m.shape[1] != K or x.shape != (m.shape[0], K, 2):
        raise InvalidArgumentError(
            f"critic expects (B, {K}) messages and (B, {K}, 2) actions, "
            f"got {tuple(m.shape)} and {tuple(x.shape)}"
        )
    _set_mode(critic, mode)
    return critic(m, x)


# ---------------------------------------------------------------------------
# parameter sets


def parameter_set(net: nn.Module) -> dict[str, np.ndarray]:
    """Trainable weights plus batch-norm running statistics as float64 arrays."""
    return {
        name: t.detach().cpu().numpy().astype(np.float64, copy=True)
        for name, t in net.state_dict().items()
        if t.is_floating_point()
    }


def load_parameter_set(net: nn.Module, params: dict[str, np.ndarray]) -> None:
    state = net.state_dict()
    expected = {k for k, t in state.items() if t.is_floating_point()}
    if set(params) != expected:
        missing = sorted(expected - set(params))
        extra = sorted(set(params) - expected)
        raise InvalidArgumentError(f"parameter names differ: missing {missing}, unexpected {extra}")
    with torch.no_grad():
        for name in expected:
            if tuple(params[name].shape) != tuple(state[name].shape):
                raise InvalidArgumentError(
                    f"{name}: shape {params[name].shape} != {tuple(state[name].shape)}"
                )
            state[name].copy_(torch.as_tensor(params[name]))


def copy_parameters(src: nn.Module, dst: nn.Module) -> None:
    with torch.no_grad():
        for (name, s), (_, d) in zip(src.state_dict().items(), dst.state_dict().items()):
            d.copy_(s)
