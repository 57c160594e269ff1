"""
Autoencoder baseline, checkpoints and BLER sweeps
=================================================

The supervised baseline trains the same transmitter and receiver jointly by
backpropagating through a differentiable channel. Checkpoints store every
array needed to resume or evaluate a run.
"""
# %%
from pathlib import Path

from ddpg_e2e import (
    SweepConfig,
    evaluate_bler,
    export_results,
    load_checkpoint,
    load_curve,
    parse_config,
    restore,
    save_checkpoint,
    snapshot,
    train_supervised_baseline,
)
from ddpg_e2e.plots import plot_bler_curves

OUT = Path("demo_output") / "baseline"
cfg = parse_config(profile="desk", overrides={"train.episodes": 20, "channel.kind": "rayleigh"})

# %%
log, trainer = train_supervised_baseline(cfg.train)
print(f"episodes {len(log)}, last receiver loss {log[-1].receiver_loss:.4f}")

# %% [markdown]
# Save, reload and evaluate. A loaded checkpoint evaluates directly; the
# networks only run in inference mode.

# %%
path = save_checkpoint(snapshot(trainer), OUT / "checkpoint.npz")
ck = load_checkpoint(path)
sweep = SweepConfig(snr_db=cfg.sweep.snr_db, blocks=5000, channel=cfg.sweep.channel)
curve = evaluate_bler(ck, sweep)
for r in curve.records:
    print(f"{r.snr_db:5.1f} dB  BLER {r.bler:.4f}  BER {r.ber:.5f}")

# %% [markdown]
# Resuming from the checkpoint continues the run exactly where it stopped.

# %%
resumed = restore(ck)
resumed.run(episodes=25)
print("resumed to episode", resumed.episode)

# %%
csv = OUT / "bler.csv"
export_results(curve, csv)
plot_bler_curves({"autoencoder (Rayleigh)": load_curve(csv)}, OUT / "bler.png")
print(csv.read_text())
