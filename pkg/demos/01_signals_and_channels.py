"""
Messages, power normalization and block-fading channels
=======================================================

Each transmission carries a block of ``K`` bits mapped to ``K`` complex
symbols with total power ``K``. One channel coefficient ``h`` is drawn per
block; the receiver sees ``y = h x + w``.
"""
# %%
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ddpg_e2e.channels import ChannelConfig, apply_channel, channel_pdf, sample_channel_realization
from ddpg_e2e.core import block_error_rate, generate_message, normalize_power, round_to_bits, snr_to_noise_variance

OUT = Path("demo_output")
OUT.mkdir(exist_ok=True)
rng = np.random.default_rng(0)

# %% [markdown]
# A random message and an arbitrary raw signal scaled to unit average symbol power.

# %%
K = 8
m = generate_message(K, rng)
raw = rng.standard_normal((K, 2))
x = normalize_power(raw)
print("bits:", m.astype(int), " block power:", np.sum(x**2))

# %% [markdown]
# Fading amplitudes. The scattered component is scaled so that
# ``E[|h|^2] = 1`` for every Rician factor; ``L = 0`` is Rayleigh fading.

# %%
r = np.linspace(0, 3.5, 400)
fig, ax = plt.subplots(figsize=(6, 4))
for cfg in (ChannelConfig("rayleigh"), ChannelConfig("rician", rician_factor=1.0),
            ChannelConfig("rician", rician_factor=5.0)):
    h = sample_channel_realization(cfg, rng, size=200_000)
    label = cfg.kind if cfg.kind == "rayleigh" else f"rician L={cfg.rician_factor:g}"
    print(f"{label:16s} E|h|^2 = {np.mean(np.sum(h**2, -1)):.4f}")
    ax.hist(np.hypot(h[:, 0], h[:, 1]), bins=120, density=True, alpha=0.3)
    ax.plot(r, channel_pdf(r, cfg), label=label)
ax.set(xlabel="|h|", ylabel="density")
ax.legend()
fig.savefig(OUT / "fading_amplitudes.png")

# %% [markdown]
# Uncoded antipodal signalling with a genie-aided sign detector, as a
# reference point for the learned links in the later demos.

# %%
for snr_db in (0, 5, 10, 20):
    m = generate_message(K, rng, batch=20_000)
    x = np.zeros(m.shape + (2,))
    x[..., 0] = 2 * m - 1
    h = sample_channel_realization(ChannelConfig("rayleigh"), rng, size=len(m))
    y = apply_channel(x, h, snr_to_noise_variance(snr_db), rng)
    # coherent detection: rotate by conj(h)
    z = y[..., 0] * h[:, None, 0] + y[..., 1] * h[:, None, 1]
    bler, ber = block_error_rate(m, round_to_bits((z > 0).astype(float)))
    print(f"Rayleigh {snr_db:2d} dB  BLER {bler:.4f}  BER {ber:.5f}")
