"""Linear-family classifiers: logistic regression, least-squares, MLP.

The loss/gradient pairs are exposed as module functions so finite
difference checks can probe them directly.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..features import FeatureMatrix
from .base import DesignEncoder, check_training_labels


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logreg_loss_and_grad(
    w: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """Penalized negative log-likelihood and its gradient.

    Column 0 of X is the intercept and is excluded from the L2 penalty.
    """
    z = X @ w
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z))
    penalty_mask = np.ones_like(w)
    penalty_mask[0] = 0.0
    loss += 0.5 * l2 * float(np.sum((w * penalty_mask) ** 2))
    grad = X.T @ (_sigmoid(z) - y) + l2 * w * penalty_mask
    return loss, grad


class LogisticRegressionClassifier:
    """L2-penalized maximum likelihood by backtracking gradient descent."""

    method = "log_regression"

    def __init__(self, hyperparameters: Mapping | None = None, seed: int = 0):
        hp = dict(hyperparameters or {})
        self.l2 = float(hp.get("l2", 1e-4))
        self.tol = float(hp.get("tol", 1e-6))
        self.max_iter = int(hp.get("max_iter", 10000))
        self.seed = seed

    def fit(self, matrix: FeatureMatrix, y: np.ndarray) -> "LogisticRegressionClassifier":
        check_training_labels(y)
        self.encoder = DesignEncoder(matrix)
        X = self.encoder.encode_matrix(matrix)
        yf = y.astype(float)
        w = np.zeros(X.shape[1])
        loss, grad = logreg_loss_and_grad(w, X, yf, self.l2)
        step = 1.0
        self.converged = False
        for _ in range(self.max_iter):
            gnorm = float(np.linalg.norm(grad))
            if gnorm <= self.tol:
                self.converged = True
                break
            # Armijo backtracking on the descent direction -grad
            step = min(step * 2.0, 1e6)
            while True:
                trial = w - step * grad
                trial_loss, trial_grad = logreg_loss_and_grad(trial, X, yf, self.l2)
                if trial_loss <= loss - 0.5 * step * gnorm * gnorm or step < 1e-18:
                    break
                step *= 0.5
            w, loss, grad = trial, trial_loss, trial_grad
        self.weights = w
        return self

    def predict_row(self, row: Mapping[str, object]) -> float:
        x = self.encoder.encode_row(row)
        return float(_sigmoid(np.array([x @ self.weights]))[0])

    def to_params(self) -> dict:
        return {
            "l2": self.l2,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "weights": self.weights,
            "converged": self.converged,
            "encoder": self.encoder.to_dict(),
        }

    @classmethod
    def from_params(cls, params: dict, seed: int = 0):
        model = cls(
            {k: params[k] for k in ("l2", "tol", "max_iter")}, seed=seed
        )
        model.weights = np.asarray(params["weights"], dtype=float)
        model.converged = bool(params["converged"])
        model.encoder = DesignEncoder.from_dict(params["encoder"])
        return model


class LinearRegClassifier:
    """Least squares on 0/1 labels; probability is the clamped output."""

    method = "linear_reg_classifier"

    def __init__(self, hyperparameters: Mapping | None = None, seed: int = 0):
        self.seed = seed

    def fit(self, matrix: FeatureMatrix, y: np.ndarray) -> "LinearRegClassifier":
        check_training_labels(y)
        self.encoder = DesignEncoder(matrix)
        X = self.encoder.encode_matrix(matrix)
        self.weights, *_ = np.linalg.lstsq(X, y.astype(float), rcond=None)
        return self

    def predict_row(self, row: Mapping[str, object]) -> float:
        x = self.encoder.encode_row(row)
        return float(min(1.0, max(0.0, x @ self.weights)))

    def to_params(self) -> dict:
        return {"weights": self.weights, "encoder": self.encoder.to_dict()}

    @classmethod
    def from_params(cls, params: dict, seed: int = 0):
        model = cls(seed=seed)
        model.weights = np.asarray(params["weights"], dtype=float)
        model.encoder = DesignEncoder.from_dict(params["encoder"])
        return model


def mlp_unpack(params: np.ndarray, n_inputs: int, hidden: int):
    """Split a flat parameter vector into (W1, w2)."""
    k1 = hidden * (n_inputs + 1)
    w1 = params[:k1].reshape(hidden, n_inputs + 1)
    w2 = params[k1:]
    return w1, w2


def mlp_loss_and_grad(
    params: np.ndarray, X: np.ndarray, y: np.ndarray, hidden: int
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of a one-hidden-layer logistic network.

    X excludes bias columns; biases live in the parameter vector.
    """
    n, d = X.shape
    w1, w2 = mlp_unpack(params, d, hidden)
    xb = np.hstack([np.ones((n, 1)), X])
    a1 = _sigmoid(xb @ w1.T)
    a1b = np.hstack([np.ones((n, 1)), a1])
    z2 = a1b @ w2
    loss = float(np.mean(np.logaddexp(0.0, z2) - y * z2))
    out = _sigmoid(z2)
    delta2 = (out - y) / n
    grad_w2 = a1b.T @ delta2
    delta1 = np.outer(delta2, w2[1:]) * a1 * (1.0 - a1)
    grad_w1 = delta1.T @ xb
    return loss, np.concatenate([grad_w1.reshape(-1), grad_w2])


class Mlp:
    """One hidden layer of logistic units, full-batch gradient descent."""

    method = "mlp"

    def __init__(self, hyperparameters: Mapping | None = None, seed: int = 0):
        hp = dict(hyperparameters or {})
        self.hidden = int(hp.get("hidden", 16))
        self.rate = float(hp.get("rate", 0.1))
        self.epochs = int(hp.get("epochs", 500))
        self.seed = seed

    def fit(self, matrix: FeatureMatrix, y: np.ndarray) -> "Mlp":
        check_training_labels(y)
        self.encoder = DesignEncoder(matrix)
        X = self.encoder.encode_matrix(matrix)[:, 1:]  # biases via parameters
        yf = y.astype(float)
        d = X.shape[1]
        rng = np.random.default_rng(self.seed)
        n_params = self.hidden * (d + 1) + self.hidden + 1
        params = rng.uniform(-0.5, 0.5, size=n_params)
        first_loss, _ = mlp_loss_and_grad(params, X, yf, self.hidden)
        loss = first_loss
        for _ in range(self.epochs):
            loss, grad = mlp_loss_and_grad(params, X, yf, self.hidden)
            params = params - self.rate * grad
        final_loss, _ = mlp_loss_and_grad(params, X, yf, self.hidden)
        self.converged = final_loss <= first_loss
        self.params = params
        return self

    def predict_row(self, row: Mapping[str, object]) -> float:
        x = self.encoder.encode_row(row)[1:]
        w1, w2 = mlp_unpack(self.params, x.size, self.hidden)
        a1 = _sigmoid(w1 @ np.concatenate([[1.0], x]))
        z2 = w2 @ np.concatenate([[1.0], a1])
        return float(_sigmoid(np.array([z2]))[0])

    def to_params(self) -> dict:
        return {
            "hidden": self.hidden,
            "rate": self.rate,
            "epochs": self.epochs,
            "params": self.params,
            "converged": self.converged,
            "encoder": self.encoder.to_dict(),
        }

    @classmethod
    def from_params(cls, params: dict, seed: int = 0):
        model = cls(
            {k: params[k] for k in ("hidden", "rate", "epochs")}, seed=seed
        )
        model.params = np.asarray(params["params"], dtype=float)
        model.converged = bool(params["converged"])
        model.encoder = DesignEncoder.from_dict(params["encoder"])
        return model
