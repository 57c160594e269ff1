import mpmath
import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from ddpg_e2e.errors import InvalidArgumentError
from ddpg_e2e.nets import (
    NetworkSpec,
    TrainMode,
    build_networks,
    circular_conv1d,
    critic_forward,
    init_weights,
    load_parameter_set,
    mish,
    parameter_set,
    receiver_forward,
    transmitter_forward,
)

from gradcheck import check_tensors

TOL = 1e-3


def naive_conv(x, w, b):
    B, C, K = x.shape
    O, _, k = w.shape
    out = np.zeros((B, O, K))
    for n in range(B):
        for o in range(O):
            for t in range(K):
                acc = b[o]
                for c in range(C):
                    for j in range(k):
                        acc += w[o, c, j] * x[n, c, (t + j - k // 2) % K]
                out[n, o, t] = acc
    return out


class TestCircularConv:
    def test_constant_input_ones_kernel(self):
        x = torch.full((1, 1, 8), 2.5, dtype=torch.float64)
        out = circular_conv1d(x, torch.ones(1, 1, 3, dtype=torch.float64), torch.zeros(1, dtype=torch.float64))
        np.testing.assert_array_equal(out.numpy(), np.full((1, 1, 8), 7.5))

    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_matches_naive_loop(self, rng, k):
        x = rng.standard_normal((2, 3, 8))
        w = rng.standard_normal((4, 3, k))
        b = rng.standard_normal(4)
        out = circular_conv1d(*(torch.as_tensor(a) for a in (x, w, b))).numpy()
        np.testing.assert_allclose(out, naive_conv(x, w, b), atol=1e-6)

    @given(st.integers(0, 2**31), st.integers(-20, 20), st.sampled_from([3, 5]))
    @settings(max_examples=30, deadline=None)
    def test_shift_equivariance(self, seed, s, k):
        r = np.random.default_rng(seed)
        x = torch.as_tensor(r.standard_normal((2, 3, 9)))
        w = torch.as_tensor(r.standard_normal((2, 3, k)))
        b = torch.as_tensor(r.standard_normal(2))
        shifted = circular_conv1d(torch.roll(x, s, -1), w, b)
        np.testing.assert_allclose(shifted.numpy(), torch.roll(circular_conv1d(x, w, b), s, -1).numpy(), atol=1e-12)

    def test_block_shorter_than_kernel(self):
        with pytest.raises(InvalidArgumentError):
            circular_conv1d(torch.zeros(1, 1, 2), torch.zeros(1, 1, 3))


class TestMish:
    def test_zero(self):
        assert mish(0.0) == 0.0

    def test_saturates_to_identity(self):
        assert abs(mish(50.0) - 50.0) < 1e-9

    def test_value_at_one(self):
        with mpmath.workdps(40):
            ref = float(mpmath.mpf(1) * mpmath.tanh(mpmath.log(1 + mpmath.e)))
        assert mish(1.0) == pytest.approx(0.86510, abs=1e-4)
        assert mish(1.0) == pytest.approx(ref, rel=1e-14)

    def test_overflow_safe(self):
        x = torch.tensor([-1e4, -800.0, 800.0, 1e4], dtype=torch.float64, requires_grad=True)
        y = mish(x)
        y.sum().backward()
        assert torch.isfinite(y).all() and torch.isfinite(x.grad).all()
        np.testing.assert_allclose(y.detach().numpy()[2:], [800.0, 1e4])


def _nets(spec=NetworkSpec(), K=8, seed=0):
    return build_networks(K, spec, seed=seed, dtype=torch.float64)


def _messages(rng, B, K=8):
    return torch.as_tensor(rng.integers(0, 2, (B, K)).astype(np.float64))


class TestTransmitter:
    def test_shape(self, rng):
        tx, _, _ = _nets()
        assert transmitter_forward(_messages(rng, 4), tx).shape == (4, 8, 2)

    @pytest.mark.parametrize("mode", list(TrainMode))
    def test_power(self, rng, mode):
        tx, _, _ = _nets()
        x = transmitter_forward(_messages(rng, 32), tx, mode)
        np.testing.assert_allclose(torch.sum(x**2, dim=(1, 2)).detach().numpy(), 8.0, atol=1e-4)

    @given(st.integers(0, 10_000), st.integers(8, 20))
    @settings(max_examples=15, deadline=None)
    def test_power_any_parameters(self, seed, K):
        tx, _, _ = build_networks(K, NetworkSpec(tx_channels=(8, 8, 8)), seed=seed, dtype=torch.float64)
        r = np.random.default_rng(seed)
        with torch.no_grad():
            for p in tx.parameters():
                p.copy_(torch.as_tensor(r.standard_normal(tuple(p.shape)) * r.uniform(0.1, 5)))
        x = transmitter_forward(_messages(r, 5, K), tx, TrainMode.INFERENCE)
        np.testing.assert_allclose(torch.sum(x**2, dim=(1, 2)).detach().numpy(), K, rtol=1e-5)

    def test_zero_message_is_finite(self):
        tx, _, _ = _nets()
        x = transmitter_forward(torch.zeros(1, 8, dtype=torch.float64), tx)
        assert torch.isfinite(x).all()

    def test_deterministic_inference(self, rng):
        tx, _, _ = _nets()
        m = _messages(rng, 6)
        a = transmitter_forward(m, tx).detach().numpy()
        b = transmitter_forward(m, tx).detach().numpy()
        assert a.tobytes() == b.tobytes()

    def test_shape_mismatch(self):
        tx, _, _ = _nets()
        with pytest.raises(InvalidArgumentError):
            transmitter_forward(torch.zeros(8, dtype=torch.float64), tx)
        with pytest.raises(InvalidArgumentError):
            transmitter_forward(torch.zeros(0, 8, dtype=torch.float64), tx)

    @pytest.mark.parametrize("mode", list(TrainMode))
    def test_gradient_every_parameter_toy(self, rng, toy_spec, mode):
        tx, _, _ = _nets(toy_spec)
        m = _messages(rng, 4)
        f = lambda: transmitter_forward(m, tx, mode).mean()
        errors = check_tensors(f, dict(tx.named_parameters()), per_tensor=10_000, rng=rng)
        assert max(errors.values()) < TOL, errors


class TestReceiver:
    def test_shape_and_range(self, rng):
        _, rx, _ = _nets()
        p = receiver_forward(torch.randn(2, 8, 2, dtype=torch.float64), torch.randn(2, 2, dtype=torch.float64), rx)
        assert p.shape == (2, 8)
        assert ((p > 0) & (p < 1)).all()

    def test_identical_rows(self, rng):
        _, rx, _ = _nets()
        y = torch.as_tensor(rng.standard_normal((1, 8, 2))).repeat(3, 1, 1)
        h = torch.as_tensor(rng.standard_normal((1, 2))).repeat(3, 1)
        p = receiver_forward(y, h, rx).detach().numpy()
        # vectorized kernels may round batch rows differently in the last bit
        np.testing.assert_allclose(p, np.broadcast_to(p[0], p.shape), rtol=0, atol=1e-12)
        again = receiver_forward(y, h, rx).detach().numpy()
        assert again.tobytes() == p.tobytes()

    def test_misaligned(self):
        _, rx, _ = _nets()
        with pytest.raises(InvalidArgumentError):
            receiver_forward(torch.zeros(3, 8, 2), torch.zeros(2, 2), rx)

    def test_channel_features_broadcast(self, rng):
        # the receiver must see h: changing only h changes the output
        _, rx, _ = _nets()
        y = torch.as_tensor(rng.standard_normal((1, 8, 2)))
        a = receiver_forward(y, torch.tensor([[1.0, 0.0]], dtype=torch.float64), rx)
        b = receiver_forward(y, torch.tensor([[0.0, 1.0]], dtype=torch.float64), rx)
        assert not torch.allclose(a, b)

    @pytest.mark.parametrize("mode", list(TrainMode))
    def test_gradient_toy(self, rng, toy_spec, mode):
        _, rx, _ = _nets(toy_spec)
        y = torch.as_tensor(rng.standard_normal((4, 8, 2)), dtype=torch.float64).requires_grad_()
        h = torch.as_tensor(rng.standard_normal((4, 2)))
        weights = torch.as_tensor(rng.standard_normal((4, 8)))
        f = lambda: (receiver_forward(y, h, rx, mode) * weights).sum()
        tensors = dict(rx.named_parameters())
        tensors["input_y"] = y
        errors = check_tensors(f, tensors, per_tensor=10_000, rng=rng)
        assert max(errors.values()) < TOL, errors


class TestCritic:
    def test_shape(self, rng):
        tx, _, critic = _nets()
        m = _messages(rng, 16)
        assert critic_forward(m, transmitter_forward(m, tx), critic).shape == (16,)

    def test_duplicate_rows(self, rng):
        tx, _, critic = _nets()
        m = _messages(rng, 1).repeat(4, 1)
        x = transmitter_forward(m, tx)
        q = critic_forward(m, x, critic).detach().numpy()
        np.testing.assert_allclose(q, q[0], rtol=0, atol=1e-12)
        assert critic_forward(m, x, critic).detach().numpy().tobytes() == q.tobytes()

    def test_shape_mismatch(self):
        _, _, critic = _nets()
        with pytest.raises(InvalidArgumentError):
            critic_forward(torch.zeros(2, 8), torch.zeros(2, 8, 3), critic)
        with pytest.raises(InvalidArgumentError):
            critic_forward(torch.zeros(2, 7), torch.zeros(2, 7, 2), critic)

    @pytest.mark.parametrize("mode", list(TrainMode))
    def test_gradient_params_and_action_toy(self, rng, toy_spec, mode):
        _, _, critic = _nets(toy_spec)
        m = _messages(rng, 6)
        x = torch.as_tensor(rng.standard_normal((6, 8, 2))).requires_grad_()
        weights = torch.as_tensor(rng.standard_normal(6))
        f = lambda: (critic_forward(m, x, critic, mode) * weights).sum()
        tensors = dict(critic.named_parameters())
        tensors["action"] = x
        errors = check_tensors(f, tensors, per_tensor=10_000, rng=rng)
        assert max(errors.values()) < TOL, errors


class TestParameterSet:
    def test_roundtrip(self):
        tx, rx, critic = _nets()
        for net in (tx, rx, critic):
            ps = parameter_set(net)
            fresh = init_weights(type(net)(*( (8,) if net is critic else ())).double(), seed=99)
            load_parameter_set(fresh, ps)
            for k, v in parameter_set(fresh).items():
                assert v.tobytes() == ps[k].tobytes()

    def test_running_variance_positive(self, rng):
        tx, _, _ = _nets()
        transmitter_forward(_messages(rng, 16), tx, TrainMode.TRAINING)
        for name, v in parameter_set(tx).items():
            if name.endswith("running_var"):
                assert np.all(v > 0)

    def test_shape_mismatch_rejected(self):
        tx, _, _ = _nets()
        ps = parameter_set(tx)
        name = next(iter(ps))
        ps[name] = np.zeros((1, 1))
        with pytest.raises(InvalidArgumentError):
            load_parameter_set(tx, ps)

    def test_table_layers(self):
        spec = NetworkSpec()
        assert [(l.kernel, l.out, l.activation, l.batch_norm) for l in spec.transmitter] == [
            (5, 256, "mish", True), (3, 128, "mish", True), (3, 64, "mish", True), (3, 2, "linear", False)]
        assert [(l.kernel, l.out) for l in spec.receiver] == [(5, 256), (5, 128), (5, 64), (5, 32), (3, 1)]
        assert spec.receiver[-1].activation == "sigmoid"
        assert [(l.out, l.batch_norm, l.activation) for l in spec.critic] == [
            (256, True, "relu"), (256, True, "relu"), (1, True, "linear")]
