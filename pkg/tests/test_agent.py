import copy
import math

import numpy as np
import pytest
import torch
from torch import nn

from ddpg_e2e.agent import (
    AgentConfig,
    Batch,
    DDPGAgent,
    ReplayBuffer,
    Transition,
    compute_reward,
    compute_target_q,
    make_adam,
    policy_objective,
    receiver_loss,
    select_action,
    soft_update,
    update_actor,
    update_critic,
)
from ddpg_e2e.errors import InvalidArgumentError, NotReadyError, NumericalDivergenceError
from ddpg_e2e.nets import Critic, TrainMode, build_networks, critic_forward, parameter_set, transmitter_forward

from gradcheck import check_tensors

K = 8


def bce_sum_oracle(m, p):
    total = 0.0
    for bit, prob in zip(m, p):
        prob = min(max(prob, 1e-7), 1 - 1e-7)
        total += bit * math.log(prob) + (1 - bit) * math.log(1 - prob)
    return -total


class ConstantCritic(Critic):
    def __init__(self, value, K=K):
        super().__init__(K)
        self.value = value

    def forward(self, m, x):
        return self.value + 0.0 * x.flatten(1).sum(1)


def nets(spec=None, seed=0):
    kw = {} if spec is None else {"spec": spec}
    return build_networks(K, seed=seed, dtype=torch.float64, **kw)


def random_batch(rng, tx, B=16):
    s = rng.integers(0, 2, (B, K)).astype(np.float64)
    a = select_action(s, tx)
    return Batch(s, a, -rng.uniform(0, 5, B), rng.integers(0, 2, (B, K)).astype(np.float64), np.zeros(B, bool))


def params_bytes(net):
    return {k: v.tobytes() for k, v in parameter_set(net).items()}


class TestReward:
    def test_perfect_prediction(self, rng):
        m = rng.integers(0, 2, K).astype(float)
        assert abs(compute_reward(m, m)) < 1e-5

    def test_coin_flip(self):
        assert compute_reward(np.ones(K), np.full(K, 0.5)) == pytest.approx(-8 * math.log(2), rel=1e-14)
        assert compute_reward(np.ones(K), np.full(K, 0.5)) == pytest.approx(-5.5452, abs=1e-4)

    def test_independent_oracle(self, rng):
        for _ in range(20):
            m = rng.integers(0, 2, 128).astype(float)
            p = rng.random(128)
            assert compute_reward(m, p) == pytest.approx(-bce_sum_oracle(m, p), abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            compute_reward(np.ones(8), np.ones(7) / 2)

    def test_batched_and_torch(self, rng):
        m = rng.integers(0, 2, (5, K)).astype(float)
        p = rng.random((5, K))
        r = compute_reward(m, p)
        np.testing.assert_allclose(r, [-bce_sum_oracle(a, b) for a, b in zip(m, p)], atol=1e-9)
        rt = compute_reward(torch.as_tensor(m), torch.as_tensor(p))
        np.testing.assert_allclose(rt.numpy(), r, atol=1e-12)

    def test_reward_is_minus_K_times_mean_loss(self, rng):
        m = rng.integers(0, 2, K).astype(float)
        p = rng.random(K)
        assert compute_reward(m, p) == pytest.approx(-K * float(receiver_loss(m, p)), abs=1e-12)


class TestSelectAction:
    def test_noise_free_is_forward(self, rng):
        tx, _, _ = nets()
        s = rng.integers(0, 2, K).astype(float)
        a = select_action(s, tx)
        np.testing.assert_array_equal(a, transmitter_forward(s[None], tx).detach().numpy()[0])
        np.testing.assert_array_equal(a, select_action(s, tx))

    def test_noisy_power(self, rng):
        tx, _, _ = nets()
        a = select_action(rng.integers(0, 2, K).astype(float), tx, 0.1, rng)
        assert abs(np.sum(a**2) - K) < 1e-4

    def test_noise_needs_rng(self):
        tx, _, _ = nets()
        with pytest.raises(InvalidArgumentError):
            select_action(np.zeros(K), tx, 0.1)


def transition(i, K=4):
    a = np.zeros((K, 2))
    a[:, 0] = 1.0
    return Transition(np.full(K, i % 2, dtype=float), a, -float(i), np.zeros(K), False)


class TestReplayBuffer:
    def test_fifo_eviction(self):
        buf = ReplayBuffer(3, 2, 4)
        for i in range(1, 5):
            buf.store(transition(i))
        assert len(buf) == 3
        assert [t.reward for t in buf.transitions()] == [-2.0, -3.0, -4.0]

    def test_sample_distinct(self, rng):
        buf = ReplayBuffer(10, 2, 4)
        for i in range(5):
            buf.store(transition(i))
        idx = buf.sample_indices(rng)
        assert len(idx) == 2 and len(set(idx.tolist())) == 2
        assert buf.sample(rng).states.shape == (2, 4)

    def test_not_ready(self, rng):
        buf = ReplayBuffer(10, 2, 4)
        buf.store(transition(0))
        with pytest.raises(NotReadyError):
            buf.sample(rng)

    def test_uniform_sampling(self, rng):
        buf = ReplayBuffer(20, 4, 4)
        for i in range(10):
            buf.store(transition(i))
        counts = np.bincount(np.concatenate([buf.sample_indices(rng) for _ in range(5000)]), minlength=10)
        # each slot expected 2000 times; 5 sigma band
        assert np.all(np.abs(counts - 2000) < 5 * math.sqrt(2000))

    def test_transition_invariants(self):
        with pytest.raises(InvalidArgumentError):
            Transition(np.zeros(4), np.ones((4, 2)), 0.5, np.zeros(4), False)
        with pytest.raises(InvalidArgumentError):
            Transition(np.zeros(4), np.full((4, 2), 3.0), -1.0, np.zeros(4), False)

    def test_array_roundtrip(self):
        buf = ReplayBuffer(3, 2, 4)
        for i in range(5):
            buf.store(transition(i))
        other = ReplayBuffer(3, 2, 4)
        other.load_arrays(buf.to_arrays())
        assert [t.reward for t in other.transitions()] == [t.reward for t in buf.transitions()]


class TestTargetQ:
    def test_zero_discount(self, rng):
        tx, _, critic = nets()
        batch = random_batch(rng, tx)
        assert compute_target_q(batch, tx, critic, 0.0).tolist() == batch.rewards.tolist()

    def test_arithmetic(self, rng):
        tx, _, _ = nets()
        batch = random_batch(rng, tx, B=1)._replace(rewards=np.array([-1.0]))
        y = compute_target_q(batch, tx, ConstantCritic(2.0).double(), 0.01)
        assert y[0] == pytest.approx(-0.98, abs=1e-15)

    def test_batch_matches_loop(self, rng):
        tx, _, critic = nets()
        batch = random_batch(rng, tx)
        y = compute_target_q(batch, tx, critic, 0.01)
        for i in range(16):
            with torch.no_grad():
                a = transmitter_forward(batch.next_states[i:i + 1], tx, TrainMode.INFERENCE)
                q = critic_forward(batch.next_states[i:i + 1], a, critic, TrainMode.INFERENCE)
            assert y[i] == pytest.approx(batch.rewards[i] + 0.01 * float(q[0]), abs=1e-9)


class TestUpdateCritic:
    def test_zero_loss_at_targets(self, rng):
        tx, _, critic = nets()
        batch = random_batch(rng, tx)
        with torch.no_grad():
            targets = critic_forward(batch.states, batch.actions, critic, TrainMode.TRAINING).numpy().copy()
        before = parameter_set(critic)
        loss = update_critic(batch, critic, make_adam(critic, 0.001), targets)
        assert loss == 0.0
        for k, v in parameter_set(critic).items():
            if "running" not in k:
                assert np.max(np.abs(v - before[k])) < 1e-6

    def test_nonnegative(self, rng):
        tx, _, critic = nets()
        batch = random_batch(rng, tx)
        assert update_critic(batch, critic, make_adam(critic, 0.001), batch.rewards) >= 0

    def test_divergence_names_index(self, rng):
        tx, _, critic = nets()
        batch = random_batch(rng, tx)
        targets = batch.rewards.copy()
        targets[5] = np.nan
        with pytest.raises(NumericalDivergenceError) as info:
            update_critic(batch, critic, make_adam(critic, 0.001), targets)
        assert info.value.index == 5

    def test_leaves_actor_alone(self, rng):
        tx, _, critic = nets()
        before = params_bytes(tx)
        update_critic(random_batch(rng, tx), critic, make_adam(critic, 0.001), np.zeros(16))
        assert params_bytes(tx) == before


class TestUpdateActor:
    def test_constant_critic_gives_zero_gradient(self, rng):
        tx, _, _ = nets()
        norm = update_actor(random_batch(rng, tx), tx, ConstantCritic(3.0).double(), make_adam(tx, 0.002))
        assert norm < 1e-9

    def test_leaves_critic_alone(self, rng):
        tx, _, critic = nets()
        before = params_bytes(critic)
        update_actor(random_batch(rng, tx), tx, critic, make_adam(tx, 0.002))
        assert params_bytes(critic) == before
        assert all(p.grad is None for p in critic.parameters())

    def test_ascent(self, rng):
        tx, _, critic = nets()
        batch = random_batch(rng, tx)
        with torch.no_grad():
            before = float(policy_objective(batch.states, tx, critic))
        update_actor(batch, tx, critic, make_adam(tx, 1e-4))
        with torch.no_grad():
            after = float(policy_objective(batch.states, tx, critic))
        assert after >= before - 1e-8

    def test_policy_gradient_finite_differences(self, rng, toy_spec):
        tx, _, critic = nets(toy_spec)
        s = rng.integers(0, 2, (16, K)).astype(np.float64)
        errors = check_tensors(lambda: policy_objective(s, tx, critic), dict(tx.named_parameters()),
                               per_tensor=10_000, rng=rng)
        assert max(errors.values()) < 1e-3, errors


class TestSoftUpdate:
    def test_tau_one_copies(self):
        a, _, _ = nets(seed=1)
        b, _, _ = nets(seed=2)
        soft_update(a, b, 1.0)
        assert params_bytes(a) == params_bytes(b)

    def test_tau_zero_keeps(self):
        a, _, _ = nets(seed=1)
        b, _, _ = nets(seed=2)
        before = params_bytes(b)
        soft_update(a, b, 0.0)
        assert params_bytes(b) == before

    def test_scalar_blend(self):
        a, b = nn.Linear(1, 1).double(), nn.Linear(1, 1).double()
        with torch.no_grad():
            a.weight.fill_(2.0)
            b.weight.fill_(1.0)
        soft_update(a, b, 0.005)
        assert b.weight.item() == pytest.approx(1.005, abs=1e-12)

    @pytest.mark.parametrize("tau", [0.0, 0.005, 0.3, 1.0])
    def test_closed_form_and_contraction(self, tau):
        a, _, _ = nets(seed=1)
        b, _, _ = nets(seed=2)
        pa, pb = parameter_set(a), parameter_set(b)
        soft_update(a, b, tau)
        pa_after = parameter_set(a)
        for k, v in parameter_set(b).items():
            np.testing.assert_allclose(v, tau * pa[k] + (1 - tau) * pb[k], rtol=0, atol=1e-12)
            np.testing.assert_allclose(np.abs(v - pa[k]), (1 - tau) * np.abs(pb[k] - pa[k]), atol=1e-12)
            assert pa_after[k].tobytes() == pa[k].tobytes()

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            soft_update(nn.Linear(2, 1), nn.Linear(3, 1), 0.5)


class TestAgent:
    def make(self):
        tx, _, critic = nets(seed=0)
        ttx, _, tcritic = nets(seed=50)
        return DDPGAgent(tx, critic, ttx, tcritic, AgentConfig(), ReplayBuffer(100, 4, K))

    def test_targets_start_identical(self):
        agent = self.make()
        assert params_bytes(agent.actor) == params_bytes(agent.target_actor)
        assert params_bytes(agent.critic) == params_bytes(agent.target_critic)

    def test_no_update_before_full_batch(self, rng):
        agent = self.make()
        before = params_bytes(agent.actor), params_bytes(agent.critic)
        for i in range(3):
            s = rng.integers(0, 2, K).astype(float)
            agent.buffer.store(Transition(s, agent.act(s, rng), -1.0, s, False))
            assert agent.train_step(rng) is None
        assert (params_bytes(agent.actor), params_bytes(agent.critic)) == before

    def test_train_step_moves_targets_slowly(self, rng):
        agent = self.make()
        for i in range(8):
            s = rng.integers(0, 2, K).astype(float)
            agent.buffer.store(Transition(s, agent.act(s, rng), -1.0, s, False))
        old_target = parameter_set(agent.target_critic)
        assert agent.train_step(rng) is not None
        new_target, behaviour = parameter_set(agent.target_critic), parameter_set(agent.critic)
        name = "head.0.layer.weight"
        np.testing.assert_allclose(new_target[name], 0.005 * behaviour[name] + 0.995 * old_target[name], atol=1e-12)

    @pytest.mark.parametrize("field, value", [("gamma", 0.0), ("tau", 1.5), ("actor_lr", 0.0),
                                              ("exploration_noise_std", -1.0)])
    def test_config_ranges(self, field, value):
        with pytest.raises(InvalidArgumentError):
            AgentConfig(**{field: value})
