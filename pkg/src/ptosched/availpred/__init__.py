"""Availability prediction: logistic model, tree benchmark, calibration, note fusion."""

from .calibration import Calibrator, apply_calibrator, fit_calibrator
from .evaluation import ConstantModel, MetricReport, classification_report, forward_chain_eval
from .fusion import (
    MODEL,
    NOTE_FORCED_ZERO,
    ProbabilityGrid,
    fuse_probabilities,
    read_grid_csv,
    write_grid_csv,
)
from .logistic import (
    LogisticConfig,
    LogisticModel,
    TrainingError,
    loss_and_grad,
    sigmoid,
    train_logistic,
)
from .modelio import load_model, model_from_dict, model_to_dict, save_model
from .tree import DecisionTreeModel, TreeConfig, train_tree

__all__ = [
    "Calibrator",
    "ConstantModel",
    "DecisionTreeModel",
    "LogisticConfig",
    "LogisticModel",
    "MODEL",
    "MetricReport",
    "NOTE_FORCED_ZERO",
    "ProbabilityGrid",
    "TrainingError",
    "TreeConfig",
    "apply_calibrator",
    "classification_report",
    "fit_calibrator",
    "forward_chain_eval",
    "fuse_probabilities",
    "load_model",
    "loss_and_grad",
    "model_from_dict",
    "model_to_dict",
    "read_grid_csv",
    "save_model",
    "sigmoid",
    "train_logistic",
    "train_tree",
    "write_grid_csv",
]
