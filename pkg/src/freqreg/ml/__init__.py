from .network import MLPParams, forward, init_params, loss_and_grads
from .scaler import Scaler, ScalerError, fit_scaler, inverse_transform, transform
from .selection import CVResult, grid_search, kfold_cv, kfold_indices, rmse
from .training import RegressorBundle, TrainConfig, TrainingDiverged, predict, train

__all__ = [
    "MLPParams", "forward", "init_params", "loss_and_grads",
    "Scaler", "ScalerError", "fit_scaler", "inverse_transform", "transform",
    "CVResult", "grid_search", "kfold_cv", "kfold_indices", "rmse",
    "RegressorBundle", "TrainConfig", "TrainingDiverged", "predict", "train",
]
