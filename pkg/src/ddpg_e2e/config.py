"""Experiment configuration files (TOML) with two default profiles.

Layout::

    profile = "desk"          # or "paper"

    [train]    episodes, steps, block_length, seed, receiver_lr, transmitter_lr,
               buffer_capacity, batch_size, dtype, log_every, checkpoint_every
    [agent]    gamma, tau, actor_lr, critic_lr, exploration_noise_std
    [channel]  kind, rician_factor, sigma, snr_db
    [network]  tx_channels, tx_kernels, rx_channels, rx_kernels,
               critic_branch, critic_hidden
    [eval]     snr_start, snr_end, snr_step, blocks, seed, channel, chunk

Every key is optional; missing keys take the profile default and unknown
keys are rejected.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .agent import AgentConfig
from .channels import KINDS, ChannelConfig
from .errors import ConfigFileError, InvalidArgumentError, OutOfRangeError, UnknownKeyError, ConfigError
from .evaluation import SweepConfig, snr_grid
from .nets import NetworkSpec
from .training import DTYPES, TrainConfig

PROFILES = ("desk", "paper")

_COMMON = {
    "train": {
        "receiver_lr": 0.001,
        "transmitter_lr": 0.001,
        "buffer_capacity": 100_000,
        "batch_size": 64,
        "seed": 0,
        "dtype": "float32",
        "log_every": 10,
        "checkpoint_every": 0,
    },
    "agent": {
        "gamma": 0.01,
        "tau": 0.005,
        "actor_lr": 0.002,
        "critic_lr": 0.001,
        "exploration_noise_std": 0.0,
    },
    "channel": {"kind": "awgn", "rician_factor": 1.0, "sigma": None, "snr_db": 20.0},
    "network": NetworkSpec().to_dict(),
    "eval": {"snr_start": 0.0, "snr_end": 20.0, "snr_step": 2.0, "seed": 0, "channel": None, "chunk": 8192},
}

_PROFILE_DEFAULTS = {
    "desk": {
        "train": {"episodes": 300, "steps": 100, "block_length": 8},
        "eval": {"blocks": 10_000},
    },
    "paper": {
        "train": {"episodes": 30_000, "steps": 500, "block_length": 256},
        "channel": {"kind": "rayleigh"},
        "eval": {"blocks": 100_000},
    },
}


def profile_defaults(profile: str) -> dict:
    if profile not in PROFILES:
        raise OutOfRangeError(f"profile must be one of {PROFILES}, got {profile!r}", key="profile")
    out = copy.deepcopy(_COMMON)
    for section, values in _PROFILE_DEFAULTS[profile].items():
        out[section].update(values)
    return out


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _nonneg_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def _real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _pos_real(v):
    return _real(v) and v > 0


def _unit(v):
    return _real(v) and 0 < v <= 1


def _int_list(v):
    return isinstance(v, list) and len(v) > 0 and all(_pos_int(i) for i in v)


# key -> (predicate, description of the accepted range)
_RULES = {
    "train.episodes": (_pos_int, "a positive integer"),
    "train.steps": (_pos_int, "a positive integer"),
    "train.block_length": (_pos_int, "a positive integer"),
    "train.receiver_lr": (_pos_real, "> 0"),
    "train.transmitter_lr": (_pos_real, "> 0"),
    "train.buffer_capacity": (_pos_int, "a positive integer"),
    "train.batch_size": (_pos_int, "a positive integer"),
    "train.seed": (_nonneg_int, "a non-negative integer"),
    "train.dtype": (lambda v: v in DTYPES, f"one of {sorted(DTYPES)}"),
    "train.log_every": (_nonneg_int, "a non-negative integer"),
    "train.checkpoint_every": (_nonneg_int, "a non-negative integer"),
    "agent.gamma": (_unit, "in (0, 1]"),
    "agent.tau": (_unit, "in (0, 1]"),
    "agent.actor_lr": (_pos_real, "> 0"),
    "agent.critic_lr": (_pos_real, "> 0"),
    "agent.exploration_noise_std": (lambda v: _real(v) and v >= 0, ">= 0"),
    "channel.kind": (lambda v: v in KINDS, f"one of {KINDS}"),
    "channel.rician_factor": (lambda v: _real(v) and v >= 0, ">= 0"),
    "channel.sigma": (lambda v: v is None or _pos_real(v), "> 0"),
    "channel.snr_db": (_real, "a real number"),
    "network.tx_channels": (_int_list, "a list of positive integers"),
    "network.tx_kernels": (_int_list, "a list of positive integers"),
    "network.rx_channels": (_int_list, "a list of positive integers"),
    "network.rx_kernels": (_int_list, "a list of positive integers"),
    "network.critic_branch": (_pos_int, "a positive integer"),
    "network.critic_hidden": (_int_list, "a list of positive integers"),
    "eval.snr_start": (_real, "a real number"),
    "eval.snr_end": (_real, "a real number"),
    "eval.snr_step": (_pos_real, "> 0"),
    "eval.blocks": (_pos_int, "a positive integer"),
    "eval.seed": (_nonneg_int, "a non-negative integer"),
    "eval.channel": (lambda v: v is None or v in KINDS, f"one of {KINDS}"),
    "eval.chunk": (_pos_int, "a positive integer"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str = "desk"
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def to_toml(self) -> str:
        return dump_toml(self.raw, self.profile)


def dump_toml(raw: dict, profile: str) -> str:
    doc = {"profile": profile}
    for section, values in raw.items():
        doc[section] = {k: v for k, v in values.items() if v is not None}
    return tomli_w.dumps(doc)


def _merge(base: dict, doc: dict, source: str) -> None:
    for section, values in doc.items():
        if section == "profile":
            continue
        if section not in base:
            raise UnknownKeyError(f"{source}: unknown section [{section}]", key=section)
        if not isinstance(values, dict):
            raise UnknownKeyError(f"{source}: {section!r} must be a section", key=section)
        for key, value in values.items():
            if key not in base[section]:
                raise UnknownKeyError(f"{source}: unknown key {section}.{key}", key=f"{section}.{key}")
            base[section][key] = value


def _apply_overrides(base: dict, overrides: dict) -> None:
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        if section not in base or key not in base[section]:
            raise UnknownKeyError(f"unknown key {dotted}", key=dotted)
        base[section][key] = value


def read_toml(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc.strerror or exc}", key=None) from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigFileError(f"config {path} is not valid TOML: {exc}") from exc


def parse_config(path=None, overrides: dict | None = None, profile: str | None = None,
                 text: str | None = None) -> ExperimentConfig:
    """Resolve a config from a file (or TOML ``text``), a profile and dotted overrides.

    Precedence: explicit ``profile`` argument > file's ``profile`` key > desk.
    """
    doc = {}
    source = "<inline>"
    if path is not None:
        doc = read_toml(path)
        source = str(path)
    elif text is not None:
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigFileError(f"config is not valid TOML: {exc}") from exc
    chosen = profile or doc.get("profile", "desk")
    raw = profile_defaults(chosen)
    _merge(raw, doc, source)
    _apply_overrides(raw, overrides or {})
    return build_config(raw, chosen)


def build_config(raw: dict, profile: str = "desk") -> ExperimentConfig:
    for dotted, (ok, expected) in _RULES.items():
        section, key = dotted.split(".")
        value = raw[section][key]
        if not ok(value):
            raise OutOfRangeError(f"{dotted} = {value!r} is out of range (expected {expected})", key=dotted)
    t, a, c, n, e = (raw[s] for s in ("train", "agent", "channel", "network", "eval"))
    try:
        channel = ChannelConfig(**c)
        network = NetworkSpec.from_dict(n)
        train = TrainConfig(
            episodes=t["episodes"], steps=t["steps"], block_length=t["block_length"],
            channel=channel, agent=AgentConfig(**a), network=network,
            receiver_lr=t["receiver_lr"], transmitter_lr=t["transmitter_lr"],
            buffer_capacity=t["buffer_capacity"], batch_size=t["batch_size"], seed=t["seed"],
            dtype=t["dtype"], log_every=t["log_every"], checkpoint_every=t["checkpoint_every"],
        )
        if train.block_length < network.max_kernel:
            raise OutOfRangeError(
                f"train.block_length = {train.block_length} is shorter than the largest kernel "
                f"({network.max_kernel})", key="train.block_length")
        eval_channel = channel if e["channel"] is None else ChannelConfig(
            kind=e["channel"], rician_factor=c["rician_factor"], sigma=c["sigma"], snr_db=c["snr_db"])
        sweep = SweepConfig(
            snr_db=snr_grid(e["snr_start"], e["snr_end"], e["snr_step"]), blocks=e["blocks"],
            channel=eval_channel, seed=e["seed"], chunk=e["chunk"],
        )
    except ConfigError:
        raise
    except InvalidArgumentError as exc:
        raise OutOfRangeError(str(exc)) from exc
    return ExperimentConfig(profile=profile, train=train, sweep=sweep, raw=copy.deepcopy(raw))


def train_config_to_raw(cfg: TrainConfig) -> dict:
    """Inverse of the train/agent/channel/network part of :func:`build_config`."""
    return {
        "train": {
            "episodes": cfg.episodes, "steps": cfg.steps, "block_length": cfg.block_length,
            "receiver_lr": cfg.receiver_lr, "transmitter_lr": cfg.transmitter_lr,
            "buffer_capacity": cfg.buffer_capacity, "batch_size": cfg.batch_size,
            "seed": cfg.seed, "dtype": cfg.dtype, "log_every": cfg.log_every,
            "checkpoint_every": cfg.checkpoint_every,
        },
        "agent": dict(vars(cfg.agent)),
        "channel": dict(vars(cfg.channel)),
        "network": cfg.network.to_dict(),
    }


def train_config_from_raw(raw: dict) -> TrainConfig:
    full = profile_defaults("desk")
    _merge(full, raw, "<checkpoint>")
    return build_config(full).train
