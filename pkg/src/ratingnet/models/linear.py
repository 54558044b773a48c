"""Least squares, ridge and evidence-approximation Bayesian ridge.

All three centre the data so the bias is never penalised, and all three fit
on rows in a canonical order, which makes the solution independent of the
order training rows arrive in.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ConvergenceError, FitError
from .base import Model


class LinearModel(Model):
    def __init__(self, weights, bias, kind="linear", info=None):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)
        self.kind = kind
        self.n_inputs = len(self.weights)
        self.info = dict(info or {})

    def predict(self, X):
        X = self._check(X)
        return X @ self.weights + self.bias

    def get_state(self):
        return {"kind": self.kind, "bias": self.bias, "info": self.info}, {"weights": self.weights}

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["weights"], meta["bias"], meta["kind"], meta.get("info"))


def _prepare(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise FitError(f"X shape {X.shape} does not match {len(y)} targets")
    if len(y) == 0:
        raise FitError("no training rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise FitError("non-finite training data")
    keys = np.column_stack([X, y]).T[::-1]
    order = np.lexsort(keys)
    X, y = X[order], y[order]
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    return X - x_mean, y - y_mean, x_mean, y_mean


def fit_linear(X, y) -> LinearModel:
    """Ordinary least squares; least-norm weights when rank-deficient."""
    Xc, yc, x_mean, y_mean = _prepare(X, y)
    w, *_ = np.linalg.lstsq(Xc, yc, rcond=None)
    return LinearModel(w, y_mean - x_mean @ w, "linear")


def fit_ridge(X, y, alpha: float = 1e-4) -> LinearModel:
    """Minimise squared error + ``alpha * ||w||^2`` through the normal equations."""
    if alpha < 0 or not np.isfinite(alpha):
        raise ConfigError(f"ridge alpha must be >= 0, got {alpha}")
    Xc, yc, x_mean, y_mean = _prepare(X, y)
    d = Xc.shape[1]
    gram = Xc.T @ Xc + alpha * np.eye(d)
    rhs = Xc.T @ yc
    if np.linalg.matrix_rank(gram) < d:
        w, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    else:
        w = np.linalg.solve(gram, rhs)
    return LinearModel(w, y_mean - x_mean @ w, "ridge", {"alpha": alpha})


def fit_ridge_gd(X, y, alpha: float = 1e-4, tol: float = 1e-12, max_iter: int = 200_000) -> LinearModel:
    """Same objective as :func:`fit_ridge`, solved by full-batch gradient descent.

    Kept as an independent cross-check of the closed form.
    """
    if alpha < 0:
        raise ConfigError(f"ridge alpha must be >= 0, got {alpha}")
    Xc, yc, x_mean, y_mean = _prepare(X, y)
    lipschitz = 2.0 * (np.linalg.norm(Xc, 2) ** 2 + alpha)
    step = 1.0 / lipschitz
    w = np.zeros(Xc.shape[1])
    scale = max(np.linalg.norm(Xc.T @ yc), 1.0)
    for _ in range(max_iter):
        grad = 2.0 * (Xc.T @ (Xc @ w - yc)) + 2.0 * alpha * w
        if np.linalg.norm(grad) <= tol * scale:
            break
        w = w - step * grad
    else:
        raise ConvergenceError("gradient ridge solver did not converge", residual=float(np.linalg.norm(grad)))
    return LinearModel(w, y_mean - x_mean @ w, "ridge", {"alpha": alpha, "solver": "gd"})


def fit_bayesian(X, y, alpha_1=1e-6, alpha_2=1e-6, lambda_1=1e-6, lambda_2=1e-6,
                 max_iter: int = 300, tol: float = 1e-6) -> LinearModel:
    """Bayesian ridge regression by evidence maximisation.

    Gaussian prior ``w ~ N(0, 1/lambda)`` and noise ``N(0, 1/alpha)``, with
    Gamma(alpha_1, alpha_2) and Gamma(lambda_1, lambda_2) hyperpriors on the
    two precisions. Alternates the posterior mean with MacKay's fixed-point
    updates until the weights move less than ``tol`` (L1).

    ``info`` on the returned model holds the estimated ``noise_precision`` and
    ``weight_precision``.
    """
    Xc, yc, x_mean, y_mean = _prepare(X, y)
    n = len(yc)
    U, S, Vt = np.linalg.svd(Xc, full_matrices=False)
    eig = S ** 2
    Uty = U.T @ yc
    var_y = yc.var()
    noise_prec = 1.0 / (var_y + np.finfo(float).eps)
    weight_prec = 1.0

    def posterior_mean(a, lam):
        return Vt.T @ (S / (eig + lam / a) * Uty)

    w = posterior_mean(noise_prec, weight_prec)
    for it in range(1, max_iter + 1):
        rss = float(np.sum((yc - Xc @ w) ** 2))
        gamma = float(np.sum(noise_prec * eig / (weight_prec + noise_prec * eig)))
        weight_prec = (gamma + 2 * lambda_1) / (float(w @ w) + 2 * lambda_2)
        noise_prec = (n - gamma + 2 * alpha_1) / (rss + 2 * alpha_2)
        w_new = posterior_mean(noise_prec, weight_prec)
        delta = float(np.abs(w_new - w).sum())
        w = w_new
        if delta < tol:
            break
    else:
        raise ConvergenceError(f"bayesian ridge did not converge in {max_iter} iterations",
                               residual=delta, iterations=max_iter)
    info = {
        "noise_precision": noise_prec,
        "weight_precision": weight_prec,
        "iterations": it,
        "hyper": [alpha_1, alpha_2, lambda_1, lambda_2],
    }
    return LinearModel(w, y_mean - x_mean @ w, "bayesian", info)
