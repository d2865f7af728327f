"""Additive model augmentation with an orthogonal-by-construction learning component.

A linear-in-the-parameters baseline ``phi(x) theta_b`` is augmented with a
neural network whose stacked output is projected onto the orthogonal
complement of the baseline regressors, so the baseline parameters keep
their physical meaning.
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DimensionMismatch,
    InsufficientData,
    MissingThetaAux,
    NonFinite,
    NonFiniteObjective,
    OrthoAugmError,
    RankDeficient,
    SingularGram,
)
from .linalg import RegressorFactorization, apply_projector, factorize, solve_least_squares  # noqa: E402
from .regressor import BaselineBasis, Dataset, LagSpec, assemble_phi, build_states  # noqa: E402
from .mlp import MlpParams, MlpSpec, xavier_init  # noqa: E402
from .augmentation import AugmentedModel, Structure, TrainingContext, loss_and_grad, predict_test  # noqa: E402
from .optimize import TrainSchedule, train  # noqa: E402
from .analysis import CovarianceReport, ErrorReport, estimate_covariance  # noqa: E402

__all__ = [
    "__version__", "ConfigError", "DimensionMismatch", "InsufficientData", "MissingThetaAux", "NonFinite",
    "NonFiniteObjective", "OrthoAugmError", "RankDeficient", "SingularGram", "RegressorFactorization",
    "apply_projector", "factorize", "solve_least_squares", "BaselineBasis", "Dataset", "LagSpec", "assemble_phi",
    "build_states", "MlpParams", "MlpSpec", "xavier_init", "AugmentedModel", "Structure", "TrainingContext",
    "loss_and_grad", "predict_test", "TrainSchedule", "train", "CovarianceReport", "ErrorReport",
    "estimate_covariance",
]
