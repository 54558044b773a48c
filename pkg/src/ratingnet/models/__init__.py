from .base import ConstantModel, Model, fit_baseline, predict
from .forest import ForestModel, RegressionTree, fit_forest, fit_tree
from .linear import LinearModel, fit_bayesian, fit_linear, fit_ridge, fit_ridge_gd
from .mlp import MlpModel, TrainConfig, fit_mlp
from .serialize import load_model, save_model

MODEL_NAMES = ("baseline", "linear", "ridge", "bayesian", "mlp", "forest")
DISPLAY_NAMES = {
    "baseline": "Baseline",
    "linear": "Linear Regression",
    "ridge": "Ridge Regression",
    "bayesian": "Bayesian Regression",
    "mlp": "Neural Network",
    "forest": "Random Forest",
    "fused_mlp": "Business Features",
}

__all__ = [
    "ConstantModel", "ForestModel", "LinearModel", "MlpModel", "Model", "RegressionTree",
    "TrainConfig", "fit_baseline", "fit_bayesian", "fit_forest", "fit_linear", "fit_mlp",
    "fit_ridge", "fit_ridge_gd", "fit_tree", "load_model", "predict", "save_model",
    "MODEL_NAMES", "DISPLAY_NAMES",
]
