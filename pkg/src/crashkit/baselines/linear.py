"""Multinomial logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def fit_logreg(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    learning_rate: float = 0.5,
    l2: float = 1e-4,
    epochs: int = 300,
) -> dict:
    """Return weights/bias minimizing L2-regularized cross-entropy.

    Deterministic: zero initialization, fixed epoch count, full-batch updates.
    The L2 penalty applies to weights only, not the bias row.
    """
    n, d = X.shape
    W = np.zeros((d, n_classes), dtype=np.float64)
    b = np.zeros(n_classes, dtype=np.float64)
    Y = np.zeros((n, n_classes), dtype=np.float64)
    Y[np.arange(n), y] = 1.0
    for _ in range(epochs):
        P = softmax(X @ W + b)
        G = (P - Y) / n
        W -= learning_rate * (X.T @ G + l2 * W)
        b -= learning_rate * G.sum(axis=0)
    return {"weights": W.tolist(), "bias": b.tolist()}


def logreg_loss(X: np.ndarray, y: np.ndarray, W: np.ndarray, b: np.ndarray, l2: float) -> float:
    """Regularized mean cross-entropy, used by gradient verification tests."""
    P = softmax(X @ W + b)
    n = X.shape[0]
    nll = -np.log(np.clip(P[np.arange(n), y], 1e-300, None)).mean()
    return float(nll + 0.5 * l2 * (W * W).sum())


def logreg_scores(params: dict, X: np.ndarray) -> np.ndarray:
    W = np.asarray(params["weights"], dtype=np.float64)
    b = np.asarray(params["bias"], dtype=np.float64)
    if X.shape[1] != W.shape[0]:
        raise DimensionMismatch(
            "feature count does not match trained weights",
            expected=W.shape[0], got=X.shape[1],
        )
    return X @ W + b
