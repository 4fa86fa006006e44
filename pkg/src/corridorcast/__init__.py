"""Spatial time-series forecasting for sensor corridors.

The pipeline: load or synthesize a (sensors, steps, features) panel,
decompose each series into seasonal + trend + residual, cluster sensors by
DTW similarity of their residuals under geographic constraints, and train a
cluster-aware convolution-LSTM forecaster with optional denoising
autoencoder heads.  Evaluation covers per-horizon MAE/RMSE, peak/off-peak
regimes and robustness to injected missing-data blocks.
"""

from . import cluster, decompose, dtw, evaluation, model, nn, panel
from .errors import (
    ConfigError,
    CorridorcastError,
    DataError,
    EmptyPanelError,
    EmptySeriesError,
    FormatError,
    InsufficientDataError,
    TrainingDivergence,
    UnknownSensorError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CorridorcastError",
    "DataError",
    "EmptyPanelError",
    "EmptySeriesError",
    "FormatError",
    "InsufficientDataError",
    "TrainingDivergence",
    "UnknownSensorError",
    "cluster",
    "decompose",
    "dtw",
    "evaluation",
    "model",
    "nn",
    "panel",
]
