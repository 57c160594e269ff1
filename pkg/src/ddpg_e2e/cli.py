"""Command-line entry points: ``train``, ``baseline``, ``eval`` and ``plot``.

Every command writes the fully resolved configuration to ``<out>/config.toml``
so that an output directory can be reproduced from its own contents.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .checkpoint import load_checkpoint
from .config import PROFILES, build_config, parse_config
from .errors import CheckpointCorruptError, ConfigError, IncompatibleCheckpointError, InvalidArgumentError, \
    NumericalDivergenceError
from .evaluation import evaluate_bler, export_results, load_curve
from .training import TrainingLog, run_training, train_supervised_baseline

PROG = "ddpg-e2e"
CONFIG_NAME = "config.toml"
LOG_NAME = "training_log.csv"
CHECKPOINT_NAME = "checkpoint.npz"
CURVE_NAME = "bler.csv"

_FAILURES = (ConfigError, OSError, CheckpointCorruptError, IncompatibleCheckpointError, InvalidArgumentError,
             NumericalDivergenceError)


def _setting(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        parsed = tomllib.loads(f"v = {value}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value  # bare strings such as channel.kind=rayleigh
    return key.strip(), parsed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment config (default: profile defaults)")
    common.add_argument("--seed", type=int, help="override the seed")
    common.add_argument("--out", type=Path, help="output directory (default: runs/<command>)")
    common.add_argument("--profile", choices=PROFILES, help="default profile (overrides the file's)")
    common.add_argument("--set", dest="settings", action="append", type=_setting, default=[],
                        metavar="KEY=VALUE", help="override one config key, e.g. train.episodes=20")

    sub.add_parser("train", parents=[common], help="train transmitter and receiver with DDPG")
    sub.add_parser("baseline", parents=[common], help="train the supervised autoencoder baseline")

    ev = sub.add_parser("eval", parents=[common], help="BLER-vs-SNR sweep of a checkpoint")
    ev.add_argument("--checkpoint", type=Path, required=True)
    ev.add_argument("--snr-start", type=float)
    ev.add_argument("--snr-end", type=float)
    ev.add_argument("--snr-step", type=float)
    ev.add_argument("--blocks", type=int, help="blocks per SNR point")
    ev.add_argument("--channel", choices=("awgn", "rayleigh", "rician"),
                    help="evaluation channel (default: the training channel)")

    pl = sub.add_parser("plot", parents=[common], help="charts of a training log and BLER curves")
    pl.add_argument("--log", type=Path, help="training log CSV")
    pl.add_argument("--curve", type=Path, action="append", default=[], help="BLER curve CSV (repeatable)")
    return parser


def _overrides(args) -> dict:
    out = dict(args.settings)
    if args.seed is not None:
        out["eval.seed" if args.command == "eval" else "train.seed"] = args.seed
    if args.command == "eval":
        flags = {"eval.snr_start": args.snr_start, "eval.snr_end": args.snr_end, "eval.snr_step": args.snr_step,
                 "eval.blocks": args.blocks, "eval.channel": args.channel}
        out.update({k: v for k, v in flags.items() if v is not None})
    return out


def _prepare_out(args, text: str) -> Path:
    out = args.out or Path("runs") / args.command
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_NAME).write_text(text)
    return out


def _progress(every: int):
    def report(trainer):
        rec = trainer.log[-1]
        if every and (rec.episode % every == 0 or rec.episode == trainer.cfg.episodes):
            print(f"episode {rec.episode:6d}  reward/step {rec.reward_mean:.5f}  critic {rec.critic_loss:.4g}  "
                  f"receiver {rec.receiver_loss:.4g}  ({rec.seconds:.1f}s)", flush=True)
    return report


def cmd_train(args) -> int:
    cfg = parse_config(args.config, _overrides(args), args.profile)
    out = _prepare_out(args, cfg.to_toml())
    run = train_supervised_baseline if args.command == "baseline" else run_training
    log, _ = run(cfg.train, checkpoint_path=out / CHECKPOINT_NAME, on_episode=_progress(cfg.train.log_every))
    export_results(log, out / LOG_NAME)
    print(f"wrote {out / CHECKPOINT_NAME} and {out / LOG_NAME}")
    return 0


def cmd_eval(args) -> int:
    user = parse_config(args.config, _overrides(args), args.profile)
    ck = load_checkpoint(args.checkpoint)
    # network, channel and training settings come from the checkpoint; only [eval] from the config
    raw = {**user.raw, **ck.meta["config"]}
    raw["eval"] = user.raw["eval"]
    cfg = build_config(raw, user.profile)
    out = _prepare_out(args, cfg.to_toml())
    curve = evaluate_bler(ck, cfg.sweep, metadata={"checkpoint": str(args.checkpoint)})
    path = export_results(curve, out / CURVE_NAME)
    print(f"{'snr_db':>7} {'bler':>10} {'ber':>10}")
    for r in curve.records:
        print(f"{r.snr_db:7.2f} {r.bler:10.3e} {r.ber:10.3e}")
    print(f"wrote {path} ({len(curve)} points, {cfg.sweep.blocks} blocks each)")
    return 0


def cmd_plot(args) -> int:
    if args.log is None and not args.curve:
        raise InvalidArgumentError("plot needs --log and/or --curve")
    from .plots import plot_bler_curves, plot_training_log

    cfg = parse_config(args.config, _overrides(args), args.profile)
    out = _prepare_out(args, cfg.to_toml())
    written = []
    if args.log is not None:
        if not args.log.exists():
            raise FileNotFoundError(f"training log {args.log} does not exist")
        written += plot_training_log(TrainingLog.from_csv(args.log), out)
    if args.curve:
        for p in args.curve:
            if not p.exists():
                raise FileNotFoundError(f"curve {p} does not exist")
        curves = {p.parent.name or p.stem: load_curve(p) for p in args.curve}
        written.append(plot_bler_curves(curves, out / "bler.png"))
    for p in written:
        print(f"wrote {p}")
    return 0


COMMANDS = {"train": cmd_train, "baseline": cmd_train, "eval": cmd_eval, "plot": cmd_plot}


def cli_main(argv=None) -> int:
    """Run one command; returns the process exit code (2 for usage errors)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except _FAILURES as exc:
        message = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        print(f"{PROG} {args.command}: error: {message}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print(f"{PROG} {args.command}: interrupted", file=sys.stderr)
        return 130


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
