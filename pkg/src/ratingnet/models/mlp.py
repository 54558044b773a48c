"""Fully connected ReLU network trained as a 5-way star classifier.

Predictions for evaluation are the expectation of the softmax distribution
over star values 1..5, so the output is always inside [1, 5].
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError, DivergenceError, FitError
from .base import Model

log = logging.getLogger(__name__)

HIDDEN = (200, 40, 8)
N_CLASSES = 5


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    alpha: float = 1e-4
    batch_size: int = 200
    seed: int = 0
    epochs: int = 30
    patience: int = 5

    def validate(self):
        for name in ("learning_rate", "epsilon", "alpha", "batch_size", "epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("adam betas must lie in (0, 1)")
        return self


class MlpModel(Model):
    kind = "mlp"

    def __init__(self, weights, biases, classes=(1, 2, 3, 4, 5)):
        self.weights = [np.asarray(W, dtype=np.float64) for W in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.classes = np.asarray(classes, dtype=np.float64)
        self.n_inputs = self.weights[0].shape[0]
        for W, nxt in zip(self.weights, self.weights[1:]):
            if W.shape[1] != nxt.shape[0]:
                raise ValueError("layer shapes do not chain")

    @property
    def widths(self):
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    def n_parameters(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def predict_proba(self, X):
        X = self._check(X)
        return _forward(self.weights, self.biases, X)[-1]

    def predict(self, X):
        return self.predict_proba(X) @ self.classes

    def predict_class(self, X):
        return self.classes[np.argmax(self.predict_proba(X), axis=1)]

    def get_state(self):
        arrays = {f"W{i}": W for i, W in enumerate(self.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(self.biases)})
        return {"layers": len(self.weights), "classes": self.classes.tolist()}, arrays

    @classmethod
    def from_state(cls, meta, arrays):
        k = meta["layers"]
        return cls([arrays[f"W{i}"] for i in range(k)], [arrays[f"b{i}"] for i in range(k)],
                   meta["classes"])


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def _forward(weights, biases, X):
    acts = [X]
    h = X
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = h @ W + b
        h = _softmax(z) if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def loss_and_grads(weights, biases, X, labels, alpha):
    """Mean cross-entropy plus ``alpha / (2 n) * sum ||W||^2``, and its gradients.

    ``labels`` are class indices 0..4.
    """
    n = len(X)
    acts = _forward(weights, biases, X)
    proba = acts[-1]
    picked = proba[np.arange(n), labels]
    loss = -np.log(np.clip(picked, 1e-300, None)).mean()
    loss += alpha / (2 * n) * sum(float(np.sum(W * W)) for W in weights)

    delta = proba.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    gW = [None] * len(weights)
    gb = [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        gW[i] = acts[i].T @ delta + (alpha / n) * weights[i]
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i].T) * (acts[i] > 0)
    return loss, gW, gb


def init_params(widths, rng):
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, fan_out))
    return weights, biases


class Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        c = self.cfg
        self.t += 1
        lr_t = c.learning_rate * np.sqrt(1 - c.beta2 ** self.t) / (1 - c.beta1 ** self.t)
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= lr_t * m / (np.sqrt(v) + c.epsilon)


def star_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    idx = np.rint(y).astype(np.int64)
    if not np.array_equal(idx, y) or idx.min(initial=1) < 1 or idx.max(initial=5) > N_CLASSES:
        raise FitError("mlp targets must be integer stars in 1..5")
    return idx - 1


def fit_mlp(X, y, cfg: TrainConfig | None = None, X_val=None, y_val=None,
            hidden=HIDDEN) -> MlpModel:
    """Minibatch Adam on shuffled rows.

    When a validation set is given, training stops once validation RMSE has
    not improved for ``cfg.patience`` epochs and the best epoch's parameters
    are returned.
    """
    cfg = (cfg or TrainConfig()).validate()
    X = np.asarray(X, dtype=np.float64)
    labels = star_labels(y)
    if len(X) == 0:
        raise FitError("no training rows")
    rng = np.random.default_rng(cfg.seed)
    widths = [X.shape[1], *hidden, N_CLASSES]
    weights, biases = init_params(widths, rng)
    opt = Adam(weights + biases, cfg)
    model = MlpModel(weights, biases)  # shares the arrays Adam updates in place

    use_val = X_val is not None and len(X_val) > 0
    best = (np.inf, None)
    stale = 0
    n = len(X)
    bs = min(cfg.batch_size, n)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            loss, gW, gb = loss_and_grads(weights, biases, X[idx], labels[idx], cfg.alpha)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            total += loss * len(idx)
            opt.step(gW + gb)
        log.debug("mlp epoch %d loss %.6f", epoch, total / n)
        if use_val:
            pred = model.predict(X_val)
            score = float(np.sqrt(np.mean((pred - np.asarray(y_val, dtype=np.float64)) ** 2)))
            if score < best[0]:
                best = (score, ([W.copy() for W in weights], [b.copy() for b in biases]))
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    log.info("mlp early stop at epoch %d (best val rmse %.6f)", epoch, best[0])
                    break
    if use_val and best[1] is not None:
        return MlpModel(*best[1])
    return MlpModel([W.copy() for W in weights], [b.copy() for b in biases])


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
