"""Deep deterministic policy gradient learner for the transmitter.

The transmitter is the actor: state = message bits, action = encoded block.
The reward is the negative receiver cross-entropy summed over bits, so the
actor only ever sees scalar feedback and a learned critic, never a gradient
through the channel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import torch
from torch import nn

from .errors import InvalidArgumentError, NotReadyError, NumericalDivergenceError
from .nets import (
    Critic,
    Transmitter,
    TrainMode,
    as_tensor,
    copy_parameters,
    critic_forward,
    power_normalize,
    transmitter_forward,
)

PROB_CLIP = 1e-7
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.01
    tau: float = 0.005
    actor_lr: float = 0.002
    critic_lr: float = 0.001
    exploration_noise_std: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "tau"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise InvalidArgumentError(f"{name} must lie in (0, 1], got {v}")
        for name in ("actor_lr", "critic_lr"):
            if not getattr(self, name) > 0.0:
                raise InvalidArgumentError(f"{name} must be positive")
        if not self.exploration_noise_std >= 0.0:
            raise InvalidArgumentError("exploration_noise_std must be >= 0")


def _bce_terms(m, p):
    if isinstance(p, torch.Tensor):
        p = torch.clamp(p, PROB_CLIP, 1.0 - PROB_CLIP)
        m = as_tensor(m, p) if not isinstance(m, torch.Tensor) else m.to(p.dtype)
        return m * torch.log(p) + (1 - m) * torch.log1p(-p)
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    m = np.asarray(m, dtype=np.float64)
    return m * np.log(p) + (1 - m) * np.log1p(-p)


def compute_reward(m, p):
    """Negative binary cross-entropy summed over the K bits of each block.

    Works on a single block ``(K,)`` (returns a float) or a batch ``(B, K)``
    (returns one reward per row). Torch inputs stay differentiable.
    """
    if tuple(np.shape(m)) != tuple(np.shape(p)):
        raise InvalidArgumentError(f"message shape {np.shape(m)} != probability shape {np.shape(p)}")
    r = _bce_terms(m, p).sum(-1)
    if isinstance(r, torch.Tensor):
        return r
    return float(r) if np.ndim(r) == 0 else r


def receiver_loss(m, p):
    """Bit-averaged cross-entropy (the receiver's training loss), averaged over the batch."""
    if tuple(np.shape(m)) != tuple(np.shape(p)):
        raise InvalidArgumentError(f"message shape {np.shape(m)} != probability shape {np.shape(p)}")
    return -_bce_terms(m, p).mean()


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool

    def __post_init__(self):
        K = len(self.state)
        if self.action.shape != (K, 2):
            raise InvalidArgumentError(f"action shape {self.action.shape} != ({K}, 2)")
        if abs(np.sum(self.action**2) - K) > 1e-5 * K:
            raise InvalidArgumentError("action violates the power constraint")
        if self.reward > 0:
            raise InvalidArgumentError(f"reward must be <= 0, got {self.reward}")


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions backed by preallocated arrays."""

    def __init__(self, capacity: int, batch_size: int, K: int):
        if capacity < 1 or batch_size < 1:
            raise InvalidArgumentError("capacity and batch size must be positive")
        self.capacity = capacity
        self.batch_size = batch_size
        self.K = K
        self.states = np.zeros((capacity, K))
        self.actions = np.zeros((capacity, K, 2))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, K))
        self.dones = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    @property
    def ready(self) -> bool:
        return self.size >= self.batch_size

    def store(self, t: Transition) -> None:
        i = self._next
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.dones[i] = t.done
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        # storage slots from oldest to newest
        start = self._next if self.size == self.capacity else 0
        return (start + np.arange(self.size)) % self.capacity

    def transitions(self) -> list[Transition]:
        return [
            Transition(self.states[i], self.actions[i], float(self.rewards[i]),
                       self.next_states[i], bool(self.dones[i]))
            for i in self._order()
        ]

    def sample_indices(self, rng: np.random.Generator) -> np.ndarray:
        if self.size < self.batch_size:
            raise NotReadyError(f"buffer holds {self.size} < {self.batch_size} transitions")
        return rng.choice(self.size, size=self.batch_size, replace=False)

    def sample(self, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(rng)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx])

    # checkpoint support: arrays in oldest-to-newest order
    def to_arrays(self) -> dict[str, np.ndarray]:
        order = self._order()
        return {
            "states": self.states[order],
            "actions": self.actions[order],
            "rewards": self.rewards[order],
            "next_states": self.next_states[order],
            "dones": self.dones[order].astype(np.float64),
        }

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        n = len(arrays["rewards"])
        if n > self.capacity:
            raise InvalidArgumentError("stored buffer exceeds capacity")
        self.states[:n] = arrays["states"]
        self.actions[:n] = arrays["actions"]
        self.rewards[:n] = arrays["rewards"]
        self.next_states[:n] = arrays["next_states"]
        self.dones[:n] = arrays["dones"] != 0
        self.size = n
        self._next = n % self.capacity


def make_adam(net: nn.Module, lr: float) -> torch.optim.Adam:
    return torch.optim.Adam(net.parameters(), lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS)


def select_action(s, actor: Transmitter, noise_std: float = 0.0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Deterministic actor output, optionally perturbed and re-normalized.

    ``s`` may be a single message ``(K,)`` or a batch ``(B, K)``.
    """
    single = np.ndim(s) == 1
    with torch.no_grad():
        x = transmitter_forward(np.atleast_2d(s), actor, TrainMode.INFERENCE)
    a = x.numpy().astype(np.float64)
    if noise_std > 0:
        if rng is None:
            raise InvalidArgumentError("exploration noise needs a random source")
        a = a + noise_std * rng.standard_normal(a.shape)
        a = power_normalize(torch.as_tensor(a)).numpy()
    return a[0] if single else a


def compute_target_q(batch: Batch, target_actor: Transmitter, target_critic: Critic, gamma: float) -> np.ndarray:
    """Bellman targets ``r + gamma * Q'(s', mu'(s'))``; ``done`` is not used as a mask."""
    with torch.no_grad():
        a_next = transmitter_forward(batch.next_states, target_actor, TrainMode.INFERENCE)
        q_next = critic_forward(batch.next_states, a_next, target_critic, TrainMode.INFERENCE)
    return np.asarray(batch.rewards, dtype=np.float64) + gamma * q_next.double().numpy()


def _check_finite(values: torch.Tensor, what: str):
    bad = ~torch.isfinite(values.detach())
    if bad.any():
        index = int(torch.nonzero(bad.flatten())[0])
        raise NumericalDivergenceError(f"non-finite {what} at batch index {index}", index=index)


def update_critic(batch: Batch, critic: Critic, optimizer: torch.optim.Optimizer, targets) -> float:
    """One Adam step on the mean-squared Bellman error; returns the pre-update loss."""
    q = critic_forward(batch.states, batch.actions, critic, TrainMode.TRAINING)
    err = as_tensor(targets, critic) - q
    _check_finite(err, "critic error")
    loss = torch.mean(err * err)
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def policy_objective(states, actor: Transmitter, critic: Critic) -> torch.Tensor:
    """Mean critic value of the actor's own actions, ``(1/B) sum_i Q(s_i, mu(s_i))``.

    The critic runs in inference mode: with batch statistics its final
    batch-norm layer would pin the batch mean of Q to its shift parameter and
    the objective would have zero gradient.
    """
    actions = transmitter_forward(states, actor, TrainMode.TRAINING)
    return critic_forward(states, actions, critic, TrainMode.INFERENCE).mean()


def update_actor(batch: Batch, actor: Transmitter, critic: Critic, optimizer: torch.optim.Optimizer) -> float:
    """One Adam ascent step on the policy objective; returns the gradient norm.

    Gradients are taken with respect to the actor parameters only, so the
    critic's parameters and their ``.grad`` fields are left alone.
    """
    params = [p for p in actor.parameters()]
    objective = policy_objective(batch.states, actor, critic)
    grads = torch.autograd.grad(objective, params, allow_unused=True)
    grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
    norm = torch.sqrt(sum(torch.sum(g * g) for g in grads))
    if not torch.isfinite(norm):
        raise NumericalDivergenceError("non-finite policy gradient")
    for p, g in zip(params, grads):
        p.grad = -g  # ascent on J is descent on -J
    optimizer.step()
    return float(norm)


def soft_update(behaviour: nn.Module, target: nn.Module, tau: float) -> nn.Module:
    """In-place ``target = tau * behaviour + (1 - tau) * target`` over all float entries.

    Batch-norm running statistics are blended too; a convex blend keeps
    running variances positive.
    """
    src = behaviour.state_dict()
    dst = target.state_dict()
    if src.keys() != dst.keys():
        raise InvalidArgumentError("behaviour and target parameter names differ")
    with torch.no_grad():
        for name, t in dst.items():
            if t.shape != src[name].shape:
                raise InvalidArgumentError(f"{name}: shape {tuple(src[name].shape)} != {tuple(t.shape)}")
            if t.is_floating_point():
                t.mul_(1.0 - tau).add_(src[name], alpha=tau)
    return target


class DDPGAgent:
    """Actor, critic, their target copies, optimizers and replay buffer."""

    def __init__(self, actor: Transmitter, critic: Critic, target_actor: Transmitter,
                 target_critic: Critic, config: AgentConfig, buffer: ReplayBuffer):
        self.actor = actor
        self.critic = critic
        self.target_actor = target_actor
        self.target_critic = target_critic
        self.config = config
        self.buffer = buffer
        copy_parameters(actor, target_actor)
        copy_parameters(critic, target_critic)
        self.actor_opt = make_adam(actor, config.actor_lr)
        self.critic_opt = make_adam(critic, config.critic_lr)

    def act(self, s, rng) -> np.ndarray:
        return select_action(s, self.actor, self.config.exploration_noise_std, rng)

    def train_step(self, rng: np.random.Generator) -> tuple[float, float] | None:
        """Sample a batch, update critic then actor, then both targets.

        Returns ``(critic_loss, policy_grad_norm)`` or ``None`` when the
        buffer does not yet hold a full batch.
        """
        if not self.buffer.ready:
            return None
        batch = self.buffer.sample(rng)
        y = compute_target_q(batch, self.target_actor, self.target_critic, self.config.gamma)
        critic_loss = update_critic(batch, self.critic, self.critic_opt, y)
        grad_norm = update_actor(batch, self.actor, self.critic, self.actor_opt)
        soft_update(self.critic, self.target_critic, self.config.tau)
        soft_update(self.actor, self.target_actor, self.config.tau)
        return critic_loss, grad_norm
