"""Checkpoint container: JSON metadata plus named little-endian float64 arrays.

On disk a checkpoint is an uncompressed ``.npz`` archive. Every array is
stored as ``<f8`` (float32 weights widen losslessly), and the metadata
document travels as UTF-8 JSON in the ``__meta__`` member. A SHA-256 digest
over all array names and bytes is kept in the metadata and verified on load.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import (
    CheckpointCorruptError,
    CheckpointVersionError,
    IncompatibleCheckpointError,
    InvalidArgumentError,
)
from .nets import NetworkSpec, Receiver, Transmitter, TrainMode, load_parameter_set, parameter_set
from .training import DTYPES, AutoencoderTrainer, EpisodeRecord, Trainer, TrainingLog

SCHEMA_VERSION = 1
_META = "__meta__"


@dataclass
class Checkpoint:
    meta: dict
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def block_length(self) -> int:
        return int(self.meta["config"]["train"]["block_length"])

    def group(self, prefix: str) -> dict[str, np.ndarray]:
        p = prefix + "/"
        return {k[len(p):]: v for k, v in self.arrays.items() if k.startswith(p)}

    def to_link(self) -> "Link":
        from .config import train_config_from_raw

        cfg = train_config_from_raw(self.meta["config"])
        dtype = DTYPES[cfg.dtype]
        tx = Transmitter(cfg.network).to(dtype)
        rx = Receiver(cfg.network).to(dtype)
        try:
            load_parameter_set(tx, self.group("transmitter"))
            load_parameter_set(rx, self.group("receiver"))
        except InvalidArgumentError as exc:
            raise IncompatibleCheckpointError(f"checkpoint does not match its network spec: {exc}") from exc
        return Link(tx, rx, cfg.block_length)


class Link:
    """Read-only transmitter/receiver pair for evaluation."""

    def __init__(self, transmitter: Transmitter, receiver: Receiver, block_length: int):
        self.transmitter = transmitter
        self.receiver = receiver
        self.block_length = block_length

    def encode(self, m):
        from .nets import transmitter_forward

        with torch.no_grad():
            return transmitter_forward(m, self.transmitter, TrainMode.INFERENCE).double().numpy()

    def decode(self, y, h):
        from .nets import receiver_forward

        with torch.no_grad():
            return receiver_forward(y, h, self.receiver, TrainMode.INFERENCE).double().numpy()


# ---------------------------------------------------------------------------
# trainer <-> checkpoint


def _networks(trainer: Trainer) -> dict:
    a = trainer.agent
    return {
        "transmitter": a.actor,
        "receiver": trainer.receiver,
        "critic": a.critic,
        "target_transmitter": a.target_actor,
        "target_critic": a.target_critic,
    }


def _optimizers(trainer: Trainer) -> dict:
    out = {"transmitter": (trainer.agent.actor_opt, trainer.agent.actor),
           "critic": (trainer.agent.critic_opt, trainer.agent.critic),
           "receiver": (trainer.receiver_opt, trainer.receiver)}
    if isinstance(trainer, AutoencoderTrainer):
        out["ae_transmitter"] = (trainer.transmitter_opt, trainer.transmitter)
    return out


def _optimizer_arrays(opt: torch.optim.Optimizer, net) -> dict[str, np.ndarray]:
    names = [n for n, _ in net.named_parameters()]
    state = opt.state_dict()["state"]
    out = {}
    for idx, moments in state.items():
        for key, value in moments.items():
            out[f"{names[idx]}/{key}"] = np.asarray(torch.as_tensor(value).detach().cpu(), dtype=np.float64)
    return out


def _load_optimizer(opt: torch.optim.Optimizer, net, arrays: dict[str, np.ndarray]) -> None:
    names = [n for n, _ in net.named_parameters()]
    params = dict(net.named_parameters())
    sd = opt.state_dict()
    state = {}
    for idx, name in enumerate(names):
        keys = {k.split("/")[-1]: v for k, v in arrays.items() if k.rsplit("/", 1)[0] == name}
        if not keys:
            continue
        dtype = params[name].dtype
        state[idx] = {
            k: (torch.tensor(float(np.ravel(v)[0]), dtype=torch.float32) if k == "step" else torch.as_tensor(v, dtype=dtype))
            for k, v in keys.items()
        }
    sd["state"] = state
    opt.load_state_dict(sd)


def snapshot(trainer: Trainer) -> Checkpoint:
    """Copy every piece of training state needed to resume bit-exactly."""
    from .config import train_config_to_raw

    arrays = {}
    for prefix, net in _networks(trainer).items():
        arrays.update({f"{prefix}/{k}": v for k, v in parameter_set(net).items()})
    for prefix, (opt, net) in _optimizers(trainer).items():
        arrays.update({f"optim/{prefix}/{k}": v for k, v in _optimizer_arrays(opt, net).items()})
    arrays.update({f"buffer/{k}": v.astype(np.float64) for k, v in trainer.agent.buffer.to_arrays().items()})
    meta = {
        "schema_version": SCHEMA_VERSION,
        "trainer": "autoencoder" if isinstance(trainer, AutoencoderTrainer) else "ddpg",
        "config": train_config_to_raw(trainer.cfg),
        "episode": trainer.episode,
        "rng_state": copy.deepcopy(trainer.rng.bit_generator.state),
        "log": [vars(r).copy() for r in trainer.log],
    }
    return Checkpoint(meta, {k: np.array(v, dtype="<f8") for k, v in arrays.items()})


def restore(ck: Checkpoint) -> Trainer:
    """Rebuild a trainer positioned exactly where ``ck`` was taken."""
    from .config import train_config_from_raw

    cfg = train_config_from_raw(ck.meta["config"])
    trainer = AutoencoderTrainer(cfg) if ck.meta.get("trainer") == "autoencoder" else Trainer(cfg)
    try:
        for prefix, net in _networks(trainer).items():
            load_parameter_set(net, ck.group(prefix))
        for prefix, (opt, net) in _optimizers(trainer).items():
            _load_optimizer(opt, net, ck.group(f"optim/{prefix}"))
        trainer.agent.buffer.load_arrays(ck.group("buffer"))
    except (InvalidArgumentError, KeyError, ValueError) as exc:
        raise IncompatibleCheckpointError(f"checkpoint does not match its config: {exc}") from exc
    trainer.rng.bit_generator.state = copy.deepcopy(ck.meta["rng_state"])
    trainer.episode = int(ck.meta["episode"])
    trainer.log = TrainingLog(EpisodeRecord(**r) for r in ck.meta["log"])
    return trainer


# ---------------------------------------------------------------------------
# file format


def _digest(arrays: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        h.update(name.encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def save_checkpoint(ck: Checkpoint, path) -> Path:
    path = Path(path)
    arrays = {k: np.ascontiguousarray(v, dtype="<f8") for k, v in ck.arrays.items()}
    meta = dict(ck.meta, schema_version=ck.meta.get("schema_version", SCHEMA_VERSION), digest=_digest(arrays))
    blob = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "wb") as fh:
            np.savez(fh, **{_META: blob}, **arrays)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc.strerror or exc}") from exc
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(bytes(data[_META]).decode())
            arrays = {k: data[k] for k in data.files if k != _META}
    except (zipfile.BadZipFile, ValueError, KeyError, EOFError, OSError, UnicodeDecodeError) as exc:
        raise CheckpointCorruptError(f"checkpoint {path} is unreadable or truncated: {exc}") from exc
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CheckpointVersionError(f"checkpoint {path} has schema version {version}, expected {SCHEMA_VERSION}")
    digest = meta.pop("digest", None)
    if digest != _digest(arrays):
        raise CheckpointCorruptError(f"checkpoint {path} failed its checksum")
    return Checkpoint(meta, arrays)
