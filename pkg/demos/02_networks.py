"""
Transmitter, receiver and critic networks
=========================================

All three networks are built from one ``NetworkSpec``. The convolutions wrap
around the block (circular padding), so a cyclic shift of the message shifts
the transmitted block by the same amount.
"""
# %%
import numpy as np
import torch

from ddpg_e2e.core import generate_message
from ddpg_e2e.nets import NetworkSpec, TrainMode, build_networks, critic_forward, receiver_forward, transmitter_forward

K = 8
spec = NetworkSpec()
tx, rx, critic = build_networks(K, spec, seed=0, dtype=torch.float64)
for name, net in (("transmitter", tx), ("receiver", rx), ("critic", critic)):
    print(f"{name:12s} {sum(p.numel() for p in net.parameters()):7d} parameters")

# %% [markdown]
# Shapes, power and shift equivariance in inference mode.

# %%
rng = np.random.default_rng(1)
m = torch.as_tensor(generate_message(K, rng, batch=4))
x = transmitter_forward(m, tx, TrainMode.INFERENCE)
print("x:", tuple(x.shape), "power per block:", (x**2).sum((1, 2)).detach().numpy())
shifted = transmitter_forward(torch.roll(m, 3, dims=1), tx, TrainMode.INFERENCE)
print("shift equivariant:", torch.allclose(shifted, torch.roll(x, 3, dims=1), atol=1e-12))

# %% [markdown]
# The receiver takes the received block plus the channel coefficient; the
# critic scores a (message, block) pair.

# %%
h = torch.tensor([[1.0, 0.0]] * 4, dtype=torch.float64)
p = receiver_forward(x, h, rx, TrainMode.INFERENCE)
q = critic_forward(m, x, critic, TrainMode.INFERENCE)
print("bit probabilities of block 0:", p[0].detach().numpy().round(3))
print("Q values:", q.detach().numpy().round(4))

# %% [markdown]
# Autograd against central differences for one transmitter weight.

# %%
w = next(tx.parameters())
f = lambda: transmitter_forward(m, tx, TrainMode.TRAINING)[..., 0].sum()
grad = torch.autograd.grad(f(), w)[0][0, 0, 0].item()
with torch.no_grad():
    w[0, 0, 0] += 1e-5
    up = f().item()
    w[0, 0, 0] -= 2e-5
    down = f().item()
    w[0, 0, 0] += 1e-5
print(f"autograd {grad:.8f}  finite difference {(up - down) / 2e-5:.8f}")
