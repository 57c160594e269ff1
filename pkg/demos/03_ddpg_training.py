"""
Training a link with deep deterministic policy gradient
=======================================================

The transmitter is the actor: it never sees a channel gradient, only the
reward (negative cross-entropy of the receiver's bit estimates). The
receiver is trained with ordinary supervision on replayed blocks.

The desk profile trains 300 episodes of 100 steps (about half an hour on one
CPU core); set ``EPISODES`` lower for a quick look.
"""
# %%
from pathlib import Path

import numpy as np

from ddpg_e2e import SweepConfig, Trainer, evaluate_bler, export_results, parse_config, run_training
from ddpg_e2e.plots import plot_bler_curves, plot_training_log

EPISODES = 40
OUT = Path("demo_output") / "ddpg"

cfg = parse_config(profile="desk", overrides={"train.episodes": EPISODES, "train.log_every": 10})
print(cfg.to_toml())

# %% [markdown]
# Untrained reference, then training. ``on_episode`` sees the trainer after
# every episode.

# %%
sweep = SweepConfig(snr_db=cfg.sweep.snr_db, blocks=5000, channel=cfg.sweep.channel)
untrained = evaluate_bler(Trainer(cfg.train), sweep)


def report(tr):
    rec = tr.log[-1]
    if rec.episode % 10 == 0:
        print(f"episode {rec.episode:4d}  reward/step {rec.reward_mean:8.4f}  critic loss {rec.critic_loss:.4g}")


log, trainer = run_training(cfg.train, checkpoint_path=OUT / "checkpoint.npz", on_episode=report)

# %% [markdown]
# Per-step reward starts near ``-K ln 2`` (a receiver guessing 0.5 for every
# bit) and climbs towards zero.

# %%
print(f"first episode {log[0].reward_mean:.3f}, last ten {np.mean(log.column('reward_mean')[-10:]):.4f}")
trained = evaluate_bler(trainer, sweep)
for a, b in zip(untrained.records, trained.records):
    print(f"{a.snr_db:5.1f} dB  untrained BLER {a.bler:.4f}  trained BLER {b.bler:.5f}")

export_results(log, OUT / "training_log.csv")
export_results(trained, OUT / "bler.csv")
plot_training_log(log, OUT)
plot_bler_curves({"untrained": untrained, "DDPG": trained}, OUT / "bler.png")
