"""Pixel-space conditional DDPM over polarization targets."""

from .ablation import AblationTable, ablation_harness, evaluate_model, split_dataset
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    OraclePatches,
    TargetRepresentation,
    condition_input,
    decode_representation,
    oracle_patches,
    to_target,
)
from .model import Architecture, ConditionalNoisePredictor, build_model
from .schedule import NoiseSchedule, forward_diffuse, make_schedule
from .train import TrainingConfig, TrainResult, sample, train, training_loss
