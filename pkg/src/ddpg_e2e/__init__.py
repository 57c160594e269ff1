"""End-to-end learned transceivers trained with deep deterministic policy gradient."""

from .agent import AgentConfig, DDPGAgent, ReplayBuffer, Transition, compute_reward, soft_update
from .channels import ChannelConfig, apply_channel, channel_pdf, sample_channel_realization
from .core import (
    BlerRecord,
    block_error_rate,
    generate_message,
    normalize_power,
    round_to_bits,
    snr_to_noise_variance,
)
from .checkpoint import Checkpoint, load_checkpoint, restore, save_checkpoint, snapshot
from .config import ExperimentConfig, parse_config
from .evaluation import BlerCurve, SweepConfig, evaluate_bler, export_results, load_curve, snr_grid
from .nets import NetworkSpec, TrainMode, build_networks
from .training import TrainConfig, Trainer, TrainingLog, run_training, train_supervised_baseline

__version__ = "0.1.0"
