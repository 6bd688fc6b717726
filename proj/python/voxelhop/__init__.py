"""VoxelHop: successive-subspace-learning classifier for multi-channel 3D volumes."""

from ._voxelhop import (
    ConfigError,
    DataError,
    IoError,
    Model,
    ShapeError,
    auc,
    config_from_file,
    extract_windows,
    fit,
    load_model,
    loocv,
    plan,
    synth_dataset,
)

__all__ = [
    "ConfigError",
    "DataError",
    "IoError",
    "Model",
    "ShapeError",
    "auc",
    "config_from_file",
    "extract_windows",
    "fit",
    "load_model",
    "loocv",
    "plan",
    "synth_dataset",
]
