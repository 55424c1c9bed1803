"""Generative sufficient dimension reduction with conditional stochastic interpolation.

A representation network ``R`` and a velocity network ``g`` are fitted jointly
so that ``g(R(x), y, t)`` regresses the time derivative of the path from
Gaussian noise to the response. Sampling integrates the fitted field with
Euler steps.
"""

from .errors import (
    ConfigError,
    DegenerateEnsembleError,
    DenominatorError,
    NonFiniteError,
    ShapeError,
    TrainingDiverged,
)
from .interpolant import STRAIGHT, TRIG, Schedule, make_batch
from .metrics import aggregate, distance_correlation, sliced_w2, w2_1d
from .sampler import euler_integrate, generate, make_grid
from .simgen import SimSetting
from .trainer import (
    EnsembleSpec,
    GenSdrModel,
    TrainConfig,
    build_kernel_ensemble,
    train,
    train_ensemble,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateEnsembleError", "DenominatorError", "NonFiniteError", "ShapeError",
    "TrainingDiverged", "STRAIGHT", "TRIG", "Schedule", "make_batch", "aggregate",
    "distance_correlation", "sliced_w2", "w2_1d", "euler_integrate", "generate", "make_grid",
    "SimSetting", "EnsembleSpec", "GenSdrModel", "TrainConfig", "build_kernel_ensemble", "train",
    "train_ensemble",
]
