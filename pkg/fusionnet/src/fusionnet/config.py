"""Model and training configuration, JSON-loadable.

The architecture depth (4 blocks) and the output class count (6) are fixed
by design; the config fields exist so a wrong value fails loudly instead of
silently building a different network.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

N_BLOCKS = 4
N_CLASSES = 6
FUSION_MODES = ("early", "mid")


@dataclass(frozen=True)
class ModelConfig:
    n_modalities: int = 3
    fusion: str = "early"
    base_channels: int = 32
    leaky_slope: float = 0.01
    n_blocks: int = N_BLOCKS
    n_classes: int = N_CLASSES

    def __post_init__(self) -> None:
        if self.n_modalities < 2:
            raise ValueError(f"need at least 2 modalities, got {self.n_modalities}")
        if self.fusion not in FUSION_MODES:
            raise ValueError(f"fusion must be one of {FUSION_MODES}, got {self.fusion!r}")
        if self.base_channels < 1:
            raise ValueError(f"base_channels must be >= 1, got {self.base_channels}")
        if not 0.0 <= self.leaky_slope < 1.0:
            raise ValueError(f"leaky slope must lie in [0, 1), got {self.leaky_slope}")
        if self.n_blocks != N_BLOCKS:
            raise ValueError(f"the architecture is fixed at {N_BLOCKS} blocks")
        if self.n_classes != N_CLASSES:
            raise ValueError(f"the output is fixed at {N_CLASSES} classes")


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 32
    initial_lr: float = 1e-3
    lr_decay_factor: float = 0.5
    plateau_patience_epochs: int = 25
    l2_gamma: float = 1e-4  # Adam weight decay
    augmentation: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.initial_lr <= 0:
            raise ValueError(f"initial lr must be > 0, got {self.initial_lr}")
        if not 0.0 < self.lr_decay_factor < 1.0:
            raise ValueError(f"decay factor must lie in (0, 1), got {self.lr_decay_factor}")
        if self.plateau_patience_epochs < 1:
            raise ValueError(f"plateau patience must be >= 1, got {self.plateau_patience_epochs}")
        if self.l2_gamma < 0:
            raise ValueError(f"l2 gamma must be >= 0, got {self.l2_gamma}")


def _from_json(cls, path: str | Path):
    raw = json.loads(Path(path).read_text())
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**raw)


def load_model_config(path: str | Path) -> ModelConfig:
    return _from_json(ModelConfig, path)


def load_training_config(path: str | Path) -> TrainingConfig:
    return _from_json(TrainingConfig, path)
