from __future__ import annotations

import numpy as np

from ..errors import FitError, ShapeError


class Model:
    kind: str = ""
    n_inputs: int | None = None

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ShapeError(f"expected a 2-D input, got shape {X.shape}")
        if self.n_inputs is not None and X.shape[1] != self.n_inputs:
            raise ShapeError(f"{self.kind} model expects {self.n_inputs} columns, got {X.shape[1]}")
        return X

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    # serialisation hooks: (json-able hyperparameters, dict of arrays)
    def get_state(self) -> tuple[dict, dict]:
        raise NotImplementedError

    @classmethod
    def from_state(cls, meta: dict, arrays: dict) -> "Model":
        raise NotImplementedError


class ConstantModel(Model):
    """Predicts the training-set mean for every row."""

    kind = "baseline"

    def __init__(self, value: float, n_inputs: int | None = None):
        self.value = float(value)
        self.n_inputs = n_inputs

    def predict(self, X):
        X = self._check(X)
        return np.full(len(X), self.value)

    def get_state(self):
        return {"value": self.value, "n_inputs": self.n_inputs}, {}

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(meta["value"], meta["n_inputs"])


def fit_baseline(y, n_inputs: int | None = None) -> ConstantModel:
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise FitError("baseline needs at least one target")
    return ConstantModel(y.mean(), n_inputs)


def predict(model: Model, X) -> np.ndarray:
    return model.predict(X)
