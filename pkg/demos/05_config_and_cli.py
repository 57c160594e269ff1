"""
Experiment files and the command line
=====================================

Experiments are described by TOML files; every key is optional and falls
back to the chosen profile (``desk`` or ``paper``). The ``ddpg-e2e`` command
runs ``train``, ``baseline``, ``eval`` and ``plot`` and echoes the resolved
config into each output directory.
"""
# %%
from pathlib import Path

from ddpg_e2e.cli import cli_main
from ddpg_e2e.config import parse_config
from ddpg_e2e.errors import OutOfRangeError

OUT = Path("demo_output") / "cli"
OUT.mkdir(parents=True, exist_ok=True)

paper = parse_config(profile="paper").train
print("paper profile:", paper.episodes, "episodes of", paper.steps, "steps, K =", paper.block_length,
      "gamma", paper.agent.gamma, "tau", paper.agent.tau)

try:
    parse_config(text="[agent]\ntau = 1.5\n")
except OutOfRangeError as exc:
    print("rejected:", exc)

# %% [markdown]
# A short run through the CLI; the same commands work from a shell, e.g.
# ``ddpg-e2e train --config quick.toml --out runs/quick``.

# %%
config = OUT / "quick.toml"
config.write_text("[train]\nepisodes = 5\nlog_every = 1\n\n[eval]\nblocks = 2000\n")
cli_main(["train", "--config", str(config), "--seed", "1", "--out", str(OUT / "run")])
cli_main(["eval", "--config", str(config), "--checkpoint", str(OUT / "run" / "checkpoint.npz"),
          "--snr-start", "0", "--snr-end", "20", "--snr-step", "4", "--out", str(OUT / "eval")])
cli_main(["plot", "--log", str(OUT / "run" / "training_log.csv"), "--curve", str(OUT / "eval" / "bler.csv"),
          "--out", str(OUT / "figures")])
print(sorted(p.name for p in (OUT / "figures").iterdir()))
