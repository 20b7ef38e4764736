"""Shared regressor contract and versioned JSON model files."""
from __future__ import annotations

import json
import time
from typing import Any, ClassVar

import numpy as np

from ..errors import InvalidArgument, InvalidState, ParseError
from ..jsonio import dumps

MODEL_FORMAT = "qnoise-model"
MODEL_VERSION = 1

REGISTRY: dict[str, type["Regressor"]] = {}


def register(cls):
    REGISTRY[cls.algorithm] = cls
    return cls


class Regressor:
    """fit/predict/save contract shared by every learner.

    ``featurization`` tells callers which input a model consumes: ``"counts"``
    (gate-count matrix) or ``"grid"`` (token grids). ``meta`` is free-form
    provenance stored alongside the parameters.
    """

    algorithm: ClassVar[str] = ""
    featurization: ClassVar[str] = "counts"

    def __init__(self):
        self.fitted = False
        self.fit_seconds = float("nan")
        self.meta: dict[str, Any] = {}

    def fit(self, X, y, seed: int = 0) -> "Regressor":
        X, y = self._check_xy(X, y)
        t0 = time.perf_counter()
        self._fit(X, y, seed)
        self.fit_seconds = time.perf_counter() - t0
        self.fitted = True
        return self

    def predict(self, X) -> np.ndarray:
        if not self.fitted:
            raise InvalidState(f"{self.algorithm} model is not fitted")
        return self._predict(self._check_x(X))

    def parameter_count(self) -> int:
        raise NotImplementedError

    # subclass hooks
    def _fit(self, X, y, seed):
        raise NotImplementedError

    def _predict(self, X):
        raise NotImplementedError

    def _state(self) -> dict:
        raise NotImplementedError

    def _load_state(self, state: dict) -> None:
        raise NotImplementedError

    def _check_x(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise InvalidArgument(f"expected a 2-D feature matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidArgument("features contain non-finite values")
        return X

    def _check_xy(self, X, y):
        X = self._check_x(X)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if X.shape[0] == 0:
            raise InvalidArgument("cannot fit on empty data")
        if X.shape[0] != y.shape[0]:
            raise InvalidArgument(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(y)):
            raise InvalidArgument("labels contain non-finite values")
        return X, y

    def to_dict(self) -> dict:
        if not self.fitted:
            raise InvalidState("cannot save an unfitted model")
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION, "algorithm": self.algorithm,
                "featurization": self.featurization, "meta": self.meta, "state": self._state()}

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps(self.to_dict()) + "\n")


def from_dict(obj: dict) -> Regressor:
    if obj.get("format") != MODEL_FORMAT:
        raise ParseError("not a model file")
    if obj.get("version") != MODEL_VERSION:
        raise ParseError(f"unsupported model file version {obj.get('version')}")
    algo = obj.get("algorithm")
    if algo not in REGISTRY:
        raise ParseError(f"unknown algorithm '{algo}' in model file")
    model = REGISTRY[algo].__new__(REGISTRY[algo])
    Regressor.__init__(model)
    model._load_state(obj["state"])
    model.meta = obj.get("meta", {})
    model.fitted = True
    return model


def load_model(path) -> Regressor:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})") from None
    return from_dict(obj)
