"""Multi-modality 2D segmentation with early or mid feature fusion."""

from .config import (
    FUSION_MODES,
    N_BLOCKS,
    N_CLASSES,
    ModelConfig,
    TrainingConfig,
    load_model_config,
    load_training_config,
)
from .data import SliceDataset, load_slice_dataset, normalize_volume
from .losses import (
    DICE_SMOOTH,
    cross_entropy_loss,
    one_hot,
    segmentation_loss,
    soft_dice_loss,
)
from .model import EarlyFusionUNet, MidFusionUNet, build_model, parameter_count
from .niftiio import NiftiVolume, read_volume, write_volume
from .predict import predict_probabilities, predict_volume
from .scheduler import PlateauScheduler
from .train import (
    EpochRecord,
    evaluate_loss,
    foreground_dice,
    train,
    write_history_csv,
)

__all__ = [
    "FUSION_MODES",
    "N_BLOCKS",
    "N_CLASSES",
    "ModelConfig",
    "TrainingConfig",
    "load_model_config",
    "load_training_config",
    "SliceDataset",
    "load_slice_dataset",
    "normalize_volume",
    "DICE_SMOOTH",
    "cross_entropy_loss",
    "one_hot",
    "segmentation_loss",
    "soft_dice_loss",
    "EarlyFusionUNet",
    "MidFusionUNet",
    "build_model",
    "parameter_count",
    "NiftiVolume",
    "read_volume",
    "write_volume",
    "predict_probabilities",
    "predict_volume",
    "PlateauScheduler",
    "EpochRecord",
    "evaluate_loss",
    "foreground_dice",
    "train",
    "write_history_csv",
]

__version__ = "0.1.0"
