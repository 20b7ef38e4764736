"""Error metrics and the per-model evaluation report."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidArgument, InvalidState

RESULT_COLUMNS = ("algorithm", "preset", "split_fraction", "ablation", "mae", "rmse", "fit_seconds",
                  "predict_seconds")


def _pair(preds, labels):
    p = np.asarray(preds, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.size == 0 or p.size != y.size:
        raise InvalidArgument(f"need equal nonzero lengths, got {p.size} and {y.size}")
    return p, y


def mae(preds, labels) -> float:
    p, y = _pair(preds, labels)
    return float(np.mean(np.abs(p - y)))


def rmse(preds, labels) -> float:
    p, y = _pair(preds, labels)
    return float(np.sqrt(np.mean((p - y) ** 2)))


@dataclass
class EvalReport:
    mae: float
    rmse: float
    fit_seconds: float
    predict_seconds: float
    algorithm: str = ""
    preset: str = ""
    split_fraction: float = float("nan")
    ablation: str = ""

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in RESULT_COLUMNS}


def evaluate(model, X, y, timer=time.perf_counter, **labels) -> EvalReport:
    """Test-set MAE/RMSE plus the model's recorded fit time and a timed predict."""
    if not getattr(model, "fitted", False):
        raise InvalidState("evaluate needs a trained model")
    t0 = timer()
    preds = model.predict(X)
    predict_seconds = timer() - t0
    return EvalReport(mae(preds, y), rmse(preds, y), float(model.fit_seconds), float(predict_seconds),
                      algorithm=model.algorithm, **labels)
