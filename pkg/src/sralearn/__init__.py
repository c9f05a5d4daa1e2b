"""Interpretable tabular learning with self-reinforcement attention.

The core model reweights each standardized input feature by a learned,
bounded attention weight and aggregates linearly, so every prediction
decomposes exactly into per-feature contributions.
"""

from .autodiff import GradCheckReport, Tape, Tensor, finite_diff_check
from .checkpoint import load as load_checkpoint
from .checkpoint import save as save_checkpoint
from .data import (
    Column,
    Preprocessor,
    Schema,
    TabularDataset,
    kfold,
    load_csv,
    stratified_kfold,
    train_val_split,
)
from .estimators import (
    LinearClassifier,
    LinearRegressor,
    MLPClassifier,
    MLPRegressor,
    SRALinearClassifier,
    SRALinearRegressor,
    cross_validate_arrays,
    cross_validate_dataset,
)
from .exceptions import (
    ConfigError,
    DataError,
    NotFittedError,
    ShapeError,
    SralearnError,
    TrainingError,
    UnsupportedModelError,
)
from .explain import (
    Explanation,
    contribution_matrix,
    explain_batch,
    explain_linear,
    export_reinforced,
    from_components,
    relevance_curve,
    write_attributions_csv,
)
from .metrics import CvReport, accuracy, auc_pr, auc_roc, r2, tpr_topk
from .models import (
    EncoderConfig,
    LinearModel,
    MlpModel,
    SraLinearModel,
    init_model,
)
from .synth import generate
from .training import AdamState, TrainConfig, TrainLog, adam_step, dropout_mask, train

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Column",
    "ConfigError",
    "CvReport",
    "DataError",
    "EncoderConfig",
    "Explanation",
    "GradCheckReport",
    "LinearClassifier",
    "LinearModel",
    "LinearRegressor",
    "MLPClassifier",
    "MLPRegressor",
    "MlpModel",
    "NotFittedError",
    "Preprocessor",
    "SRALinearClassifier",
    "SRALinearRegressor",
    "Schema",
    "ShapeError",
    "SraLinearModel",
    "SralearnError",
    "TabularDataset",
    "Tape",
    "Tensor",
    "TrainConfig",
    "TrainLog",
    "TrainingError",
    "UnsupportedModelError",
    "accuracy",
    "adam_step",
    "auc_pr",
    "auc_roc",
    "contribution_matrix",
    "cross_validate_arrays",
    "cross_validate_dataset",
    "dropout_mask",
    "explain_batch",
    "explain_linear",
    "export_reinforced",
    "finite_diff_check",
    "from_components",
    "generate",
    "init_model",
    "kfold",
    "load_checkpoint",
    "load_csv",
    "r2",
    "relevance_curve",
    "save_checkpoint",
    "stratified_kfold",
    "tpr_topk",
    "train",
    "train_val_split",
    "write_attributions_csv",
]
