"""Categorical naive Bayes over the encoder's field blocks.

Each encoded field block is mapped back to a single categorical variable:
categorical blocks use their indicator columns directly (missing included as
its own category), boolean blocks become {false, true, missing}, and numeric
blocks are discretized into four equal-width bins learned from the training
values plus a missing category. Conditional probabilities and class priors
both use Laplace smoothing with alpha = 1.
"""

from __future__ import annotations

import numpy as np

from .encode import EncoderState

NUMERIC_BINS = 4
ALPHA = 1.0


def _field_categories(X: np.ndarray, state: EncoderState, edges: dict[str, list[float]]) -> np.ndarray:
    """Return (n, n_fields) int matrix of per-field category ids."""
    n = X.shape[0]
    out = np.zeros((n, len(state.blocks)), dtype=np.int64)
    for f, blk in enumerate(state.blocks):
        if blk.kind == "categorical":
            block = X[:, blk.start:blk.start + blk.width]
            # multi-hot rows collapse to the lowest set indicator
            has = block > 0.5
            first = np.argmax(has, axis=1)
            first[~has.any(axis=1)] = blk.width - 1  # defensive: treat as missing
            out[:, f] = first
        elif blk.kind == "boolean":
            missing = X[:, blk.start + 1] > 0.5
            out[:, f] = np.where(missing, 2, (X[:, blk.start] > 0.5).astype(np.int64))
        else:
            missing = X[:, blk.start + 1] > 0.5
            cuts = np.asarray(edges[blk.key], dtype=np.float64)
            bins = np.digitize(X[:, blk.start], cuts)
            out[:, f] = np.where(missing, NUMERIC_BINS, bins)
    return out


def _n_categories(blk) -> int:
    if blk.kind == "categorical":
        return blk.width
    if blk.kind == "boolean":
        return 3
    return NUMERIC_BINS + 1


def _learn_edges(X: np.ndarray, state: EncoderState) -> dict[str, list[float]]:
    edges: dict[str, list[float]] = {}
    for blk in state.blocks:
        if blk.kind != "numeric":
            continue
        present = X[X[:, blk.start + 1] < 0.5, blk.start]
        if present.size == 0:
            edges[blk.key] = [0.0] * (NUMERIC_BINS - 1)
            continue
        lo, hi = float(present.min()), float(present.max())
        if hi <= lo:
            hi = lo + 1.0
        step = (hi - lo) / NUMERIC_BINS
        edges[blk.key] = [lo + step * k for k in range(1, NUMERIC_BINS)]
    return edges


def fit_naive_bayes(X: np.ndarray, y: np.ndarray, n_classes: int, state: EncoderState) -> dict:
    edges = _learn_edges(X, state)
    cats = _field_categories(X, state, edges)
    n = y.size
    class_counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    log_prior = np.log((class_counts + ALPHA) / (n + ALPHA * n_classes))
    log_cond: list[list[list[float]]] = []
    for f, blk in enumerate(state.blocks):
        k = _n_categories(blk)
        counts = np.zeros((n_classes, k), dtype=np.float64)
        np.add.at(counts, (y, cats[:, f]), 1.0)
        probs = (counts + ALPHA) / (class_counts[:, None] + ALPHA * k)
        log_cond.append(np.log(probs).tolist())
    return {
        "log_prior": log_prior.tolist(),
        "log_cond": log_cond,
        "edges": edges,
    }


def naive_bayes_scores(params: dict, X: np.ndarray, state: EncoderState) -> np.ndarray:
    cats = _field_categories(X, state, params["edges"])
    scores = np.tile(np.asarray(params["log_prior"], dtype=np.float64), (X.shape[0], 1))
    for f in range(len(state.blocks)):
        table = np.asarray(params["log_cond"][f], dtype=np.float64)  # (n_classes, k)
        scores += table[:, cats[:, f]].T
    return scores
