"""Regressors sharing one fit/predict/save contract."""
from ..errors import InvalidArgument
from .base import REGISTRY, Regressor, from_dict, load_model
from .gbdt import GbdtConfig, HistGBDT, NewtonGBDT, gbdt_fit
from .linear import LinearRegression, linreg_fit
from .metrics import RESULT_COLUMNS, EvalReport, evaluate, mae, rmse
from .nn import ConvNet, DenseNet, NnConfig, gradient_check, nn_fit
from .optim import AdamState, adam_step, lr_schedule

ALGORITHMS = tuple(REGISTRY)


def make_model(name: str, overrides: dict | None = None) -> Regressor:
    if name not in REGISTRY:
        raise InvalidArgument(f"unknown model '{name}'; valid: {', '.join(REGISTRY)}")
    return REGISTRY[name](**(overrides or {}))
