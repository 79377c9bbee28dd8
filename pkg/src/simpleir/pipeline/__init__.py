"""Training pipeline: optimizer, augmentation, checkpoints, evaluation,
and the staged run orchestrator."""

from .augment import crop_and_flip
from .checkpoint import (
    CHECKPOINT_VERSION,
    file_digest,
    load_checkpoint,
    save_checkpoint,
)
from .evaluate import evaluate, restore_tiled
from .optimizer import TrainState, adamw_step
from .runner import SampleCache, run_stage, shuffle_plan, train_review_learning

__all__ = [
    "CHECKPOINT_VERSION",
    "SampleCache",
    "TrainState",
    "adamw_step",
    "crop_and_flip",
    "evaluate",
    "file_digest",
    "load_checkpoint",
    "restore_tiled",
    "run_stage",
    "save_checkpoint",
    "shuffle_plan",
    "train_review_learning",
]
