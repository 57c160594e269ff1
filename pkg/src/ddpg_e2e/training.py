"""Training loops: DDPG transmitter with a supervised receiver, and the
supervised autoencoder baseline that backpropagates through the channel.

Each environment step runs in a fixed order: pick the action for the
current message, send it through a fresh channel draw, score the receiver's
output, store the transition, update the agent, then update the receiver.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, fields

import numpy as np
import torch

from .agent import (
    AgentConfig,
    DDPGAgent,
    ReplayBuffer,
    Transition,
    compute_reward,
    make_adam,
    receiver_loss,
)
from .channels import ChannelConfig, apply_channel, draw_noise, sample_channel_realization
from .core import generate_message, snr_to_noise_variance
from .errors import InvalidArgumentError, NotReadyError, NumericalDivergenceError
from .nets import (
    NetworkSpec,
    Receiver,
    TrainMode,
    Transmitter,
    as_tensor,
    build_networks,
    receiver_forward,
    transmitter_forward,
)

log = logging.getLogger(__name__)

DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 300
    steps: int = 100
    block_length: int = 8
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    network: NetworkSpec = field(default_factory=NetworkSpec)
    receiver_lr: float = 0.001
    transmitter_lr: float = 0.001  # autoencoder baseline only
    buffer_capacity: int = 100_000
    batch_size: int = 64
    seed: int = 0
    dtype: str = "float32"
    log_every: int = 10
    checkpoint_every: int = 0

    def __post_init__(self):
        for name in ("episodes", "steps", "block_length", "buffer_capacity", "batch_size"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.dtype not in DTYPES:
            raise InvalidArgumentError(f"dtype must be one of {sorted(DTYPES)}")
        if not (self.receiver_lr > 0 and self.transmitter_lr > 0):
            raise InvalidArgumentError("learning rates must be positive")


LOG_COLUMNS = ("episode", "reward_sum", "reward_mean", "critic_loss", "receiver_loss", "seconds")


@dataclass
class EpisodeRecord:
    episode: int
    reward_sum: float
    reward_mean: float
    critic_loss: float
    receiver_loss: float
    seconds: float


class TrainingLog(list):
    """Per-episode records in episode order."""

    def append(self, record: EpisodeRecord) -> None:
        if self and record.episode <= self[-1].episode:
            raise InvalidArgumentError("episode indices must increase")
        super().append(record)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self], dtype=np.float64)

    def to_csv(self, path, include_time: bool = True) -> None:
        from .evaluation import write_csv

        cols = LOG_COLUMNS if include_time else LOG_COLUMNS[:-1]
        write_csv(path, cols, [[getattr(r, c) for c in cols] for r in self])

    @classmethod
    def from_csv(cls, path) -> "TrainingLog":
        out = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                out.append(EpisodeRecord(
                    episode=int(row["episode"]),
                    **{c: float(row.get(c, "nan")) for c in LOG_COLUMNS[1:]},
                ))
        return out


# ---------------------------------------------------------------------------
# channel pass shared by the DDPG environment, receiver training and the AE


def channel_pass(x: np.ndarray, cfg: ChannelConfig, rng: np.random.Generator):
    """Fresh block-fading draw and noise for each block of ``x`` (shape (B, K, 2)).

    Returns ``(y, h)``; ``h`` doubles as the genie channel estimate.
    """
    h = sample_channel_realization(cfg, rng, size=x.shape[0])
    y = apply_channel(x, h, snr_to_noise_variance(cfg.snr_db), rng)
    return y, h


def channel_pass_torch(x: torch.Tensor, cfg: ChannelConfig, rng: np.random.Generator):
    """Differentiable ``h * x + w`` with ``h`` and ``w`` drawn up front (reparameterized)."""
    h_np = sample_channel_realization(cfg, rng, size=x.shape[0])
    w_np = draw_noise(tuple(x.shape), snr_to_noise_variance(cfg.snr_db), rng)
    h = torch.as_tensor(h_np, dtype=x.dtype)
    w = torch.as_tensor(w_np, dtype=x.dtype)
    hr, hi = h[:, None, 0], h[:, None, 1]
    xr, xi = x[..., 0], x[..., 1]
    y = torch.stack([hr * xr - hi * xi, hr * xi + hi * xr], dim=-1) + w
    return y, h


def train_receiver_step(buffer: ReplayBuffer, receiver: Receiver, optimizer, channel: ChannelConfig,
                        rng: np.random.Generator) -> float:
    """Supervised receiver update on replayed (message, action) pairs.

    Each replayed action goes through a new channel realization and noise
    draw. Returns the bit-averaged cross-entropy before the update.
    """
    if not buffer.ready:
        raise NotReadyError(f"buffer holds {len(buffer)} < {buffer.batch_size} transitions")
    idx = buffer.sample_indices(rng)
    states, actions = buffer.states[idx], buffer.actions[idx]
    y, h = channel_pass(actions, channel, rng)
    p = receiver_forward(y, h, receiver, TrainMode.TRAINING)
    loss = receiver_loss(as_tensor(states, receiver), p)
    if not torch.isfinite(loss):
        raise NumericalDivergenceError("non-finite receiver loss")
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def _nanmean(values: list[float]) -> float:
    return float(np.mean(values)) if values else math.nan


class Trainer:
    """Stateful DDPG training run that can be checkpointed between episodes."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        K = cfg.block_length
        dtype = DTYPES[cfg.dtype]
        tx, rx, critic = build_networks(K, cfg.network, seed=cfg.seed, dtype=dtype)
        target_tx, _, target_critic = build_networks(K, cfg.network, seed=cfg.seed + 100, dtype=dtype)
        buffer = ReplayBuffer(cfg.buffer_capacity, cfg.batch_size, K)
        self.agent = DDPGAgent(tx, critic, target_tx, target_critic, cfg.agent, buffer)
        self.receiver = rx
        self.receiver_opt = make_adam(rx, cfg.receiver_lr)
        self.rng = np.random.default_rng(cfg.seed)
        self.episode = 0
        self.log = TrainingLog()
        self.step_hook = None

    @property
    def transmitter(self) -> Transmitter:
        return self.agent.actor

    @property
    def block_length(self) -> int:
        return self.cfg.block_length

    def environment(self, state: np.ndarray, action: np.ndarray) -> tuple[float, np.ndarray]:
        """Channel + receiver: return the reward and the receiver's probabilities."""
        y, h = channel_pass(action[None], self.cfg.channel, self.rng)
        with torch.no_grad():
            p = receiver_forward(y, h, self.receiver, TrainMode.INFERENCE)
        p = p[0].double().numpy()
        return compute_reward(state, p), p

    def train_agent(self):
        return self.agent.train_step(self.rng)

    def train_receiver(self):
        if not self.agent.buffer.ready:
            return None
        return train_receiver_step(self.agent.buffer, self.receiver, self.receiver_opt,
                                   self.cfg.channel, self.rng)

    def run_episode(self) -> EpisodeRecord:
        cfg = self.cfg
        t0 = time.perf_counter()
        rewards, critic_losses, rx_losses = [], [], []
        next_state = generate_message(cfg.block_length, self.rng)
        for t in range(1, cfg.steps + 1):
            state = next_state
            action = self.agent.act(state, self.rng)
            reward, p = self.environment(state, action)
            next_state = generate_message(cfg.block_length, self.rng)
            self.agent.buffer.store(Transition(state, action, reward, next_state, t == cfg.steps))
            agent_out = self.train_agent()
            rx_loss = self.train_receiver()
            if agent_out is not None:
                critic_losses.append(agent_out[0])
            if rx_loss is not None:
                rx_losses.append(rx_loss)
            rewards.append(reward)
            if self.step_hook is not None:
                self.step_hook(dict(state=state, action=action, probabilities=p, reward=reward))
        self.episode += 1
        record = EpisodeRecord(
            episode=self.episode,
            reward_sum=float(np.sum(rewards)),
            reward_mean=float(np.mean(rewards)),
            critic_loss=_nanmean(critic_losses),
            receiver_loss=_nanmean(rx_losses),
            seconds=time.perf_counter() - t0,
        )
        self.log.append(record)
        return record

    def run(self, episodes: int | None = None, on_episode=None) -> TrainingLog:
        """Train until ``episodes`` episodes in total have completed (default: all)."""
        end = self.cfg.episodes if episodes is None else episodes
        while self.episode < end:
            record = self.run_episode()
            if self.cfg.log_every and record.episode % self.cfg.log_every == 0:
                log.info("episode %d reward/step %.4f critic %.4g rx %.4g",
                         record.episode, record.reward_mean, record.critic_loss, record.receiver_loss)
            if on_episode is not None:
                on_episode(self)
        return self.log

    # -- evaluation hooks ----------------------------------------------------
    def encode(self, m: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return transmitter_forward(m, self.transmitter, TrainMode.INFERENCE).double().numpy()

    def decode(self, y: np.ndarray, h: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return receiver_forward(y, h, self.receiver, TrainMode.INFERENCE).double().numpy()


class AutoencoderTrainer(Trainer):
    """Transmitter and receiver trained jointly through a known channel.

    Shares networks, channel and logging with :class:`Trainer`; only the
    transmitter update differs (backpropagation instead of policy gradient).
    The agent's critic is built but never trained.
    """

    def __init__(self, cfg: TrainConfig):
        super().__init__(cfg)
        self.transmitter_opt = make_adam(self.transmitter, cfg.transmitter_lr)

    def joint_step(self) -> tuple[float, float]:
        cfg = self.cfg
        m = generate_message(cfg.block_length, self.rng, batch=cfg.batch_size)
        x = transmitter_forward(m, self.transmitter, TrainMode.TRAINING)
        y, h = channel_pass_torch(x, cfg.channel, self.rng)
        p = receiver_forward(y, h, self.receiver, TrainMode.TRAINING)
        m_t = as_tensor(m, self.receiver)
        loss = receiver_loss(m_t, p)
        if not torch.isfinite(loss):
            raise NumericalDivergenceError("non-finite autoencoder loss")
        self.transmitter_opt.zero_grad(set_to_none=True)
        self.receiver_opt.zero_grad(set_to_none=True)
        loss.backward()
        self.transmitter_opt.step()
        self.receiver_opt.step()
        reward = float(compute_reward(m_t, p.detach()).mean())
        return float(loss.detach()), reward

    def run_episode(self) -> EpisodeRecord:
        t0 = time.perf_counter()
        losses, rewards = [], []
        for _ in range(self.cfg.steps):
            loss, reward = self.joint_step()
            losses.append(loss)
            rewards.append(reward)
        self.episode += 1
        record = EpisodeRecord(
            episode=self.episode,
            reward_sum=float(np.sum(rewards)),
            reward_mean=float(np.mean(rewards)),
            critic_loss=math.nan,
            receiver_loss=float(np.mean(losses)),
            seconds=time.perf_counter() - t0,
        )
        self.log.append(record)
        return record


def end_to_end_loss(m, transmitter, receiver, channel: ChannelConfig, rng, mode=TrainMode.TRAINING):
    """Autoencoder objective for one batch; exposed for gradient checks."""
    x = transmitter_forward(m, transmitter, mode)
    y, h = channel_pass_torch(x, channel, rng)
    p = receiver_forward(y, h, receiver, mode)
    return receiver_loss(as_tensor(m, receiver), p)


def run_training(cfg: TrainConfig, checkpoint_path=None, on_episode=None) -> tuple[TrainingLog, Trainer]:
    """Full DDPG run. Returns the log and the trainer holding the final state.

    ``on_episode(trainer)`` is called after every episode.
    """
    return _run(Trainer(cfg), checkpoint_path, on_episode)


def train_supervised_baseline(cfg: TrainConfig, checkpoint_path=None, on_episode=None) -> tuple[TrainingLog, Trainer]:
    return _run(AutoencoderTrainer(cfg), checkpoint_path, on_episode)


def _run(trainer: Trainer, checkpoint_path, callback=None):
    from .checkpoint import save_checkpoint, snapshot

    cfg = trainer.cfg
    # snapshots copy the replay buffer, so only take them when they will be written
    last_good = snapshot(trainer) if checkpoint_path else None

    def on_episode(tr):
        nonlocal last_good
        if callback is not None:
            callback(tr)
        if not checkpoint_path:
            return
        last_good = snapshot(tr)
        if cfg.checkpoint_every and tr.episode % cfg.checkpoint_every == 0:
            save_checkpoint(last_good, checkpoint_path)

    try:
        trainer.run(on_episode=on_episode)
    except NumericalDivergenceError:
        if checkpoint_path:
            save_checkpoint(last_good, checkpoint_path)
        raise
    if checkpoint_path:
        save_checkpoint(snapshot(trainer), checkpoint_path)
    return trainer.log, trainer
