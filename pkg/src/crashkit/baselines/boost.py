"""Boosted and bagged ensembles built on the tree engine."""

from __future__ import annotations

import numpy as np

from .trees import (
    SplitCandidates,
    build_candidates,
    fit_classification_tree,
    fit_regression_tree,
    tree_apply,
)
from .linear import softmax


def _spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    root = np.random.Philox(seed)
    return [np.random.Generator(root.jumped(i)) for i in range(count)]


# random forest ---------------------------------------------------------------

def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_estimators: int,
    max_depth: int,
    min_samples_leaf: int,
    seed: int,
    bootstrap: bool = True,
    feature_fraction: float | None = None,
) -> dict:
    """Bagged classification trees with per-split feature subsampling.

    ``feature_fraction=None`` selects the sqrt(d)/d default. With
    ``bootstrap=False``, ``feature_fraction=1.0`` and one estimator the forest
    degenerates to a single deterministic tree.
    """
    d = X.shape[1]
    if feature_fraction is None:
        feature_fraction = np.sqrt(d) / d if d else 1.0
    rngs = _spawn_rngs(seed, n_estimators)
    cands = build_candidates(X)
    trees = []
    for t in range(n_estimators):
        rng = rngs[t]
        if bootstrap:
            rows = rng.integers(0, y.size, size=y.size)
            Xb, yb = X[rows], y[rows]
            tree_cands = build_candidates(Xb) if _needs_rebuild(cands) else _subset(cands, rows)
        else:
            Xb, yb = X, y
            tree_cands = cands
        trees.append(
            fit_classification_tree(
                Xb, yb, n_classes, max_depth, min_samples_leaf,
                rng=rng, feature_fraction=feature_fraction, candidates=tree_cands,
            )
        )
    return {"trees": trees, "n_classes": n_classes}


def _needs_rebuild(cands: SplitCandidates) -> bool:
    # quantile thresholds shift under resampling only when a feature expanded
    # to more than one candidate; pure indicator data never needs a rebuild
    return bool(np.unique(cands.feature).size != cands.feature.size)


def _subset(cands: SplitCandidates, rows: np.ndarray) -> SplitCandidates:
    return SplitCandidates(cands.indicator[rows], cands.feature, cands.threshold, cands.n_features)


def forest_scores(params: dict, X: np.ndarray) -> np.ndarray:
    n_classes = params["n_classes"]
    votes = np.zeros((X.shape[0], n_classes), dtype=np.float64)
    for tree in params["trees"]:
        pred = tree_apply(tree, X).astype(np.int64)
        votes[np.arange(X.shape[0]), pred] += 1.0
    return votes


# adaboost (SAMME) ------------------------------------------------------------

def fit_adaboost(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_estimators: int,
    seed: int,
    max_depth: int = 1,
) -> dict:
    """SAMME boosting of shallow classification trees."""
    n = y.size
    w = np.full(n, 1.0 / n, dtype=np.float64)
    cands = build_candidates(X)
    stumps = []
    alphas = []
    for _ in range(n_estimators):
        stump = fit_classification_tree(
            X, y, n_classes, max_depth=max_depth, min_samples_leaf=1,
            sample_weight=w, candidates=cands,
        )
        pred = tree_apply(stump, X).astype(np.int64)
        miss = pred != y
        err = float(w[miss].sum())
        if err <= 0.0:
            stumps.append(stump)
            alphas.append(float(np.log(1e12) + np.log(max(n_classes - 1, 1))))
            break
        if err >= 1.0 - 1.0 / n_classes:
            break  # weak learner no better than chance under SAMME
        alpha = float(np.log((1.0 - err) / err) + np.log(n_classes - 1))
        stumps.append(stump)
        alphas.append(alpha)
        w *= np.exp(alpha * miss)
        w /= w.sum()
    if not stumps:
        # fall back to a single unweighted stump so predictions stay defined
        stumps.append(
            fit_classification_tree(
                X, y, n_classes, max_depth=max_depth, min_samples_leaf=1, candidates=cands,
            )
        )
        alphas.append(1.0)
    return {"trees": stumps, "alphas": alphas, "n_classes": n_classes}


def adaboost_scores(params: dict, X: np.ndarray) -> np.ndarray:
    n_classes = params["n_classes"]
    scores = np.zeros((X.shape[0], n_classes), dtype=np.float64)
    for tree, alpha in zip(params["trees"], params["alphas"]):
        pred = tree_apply(tree, X).astype(np.int64)
        scores[np.arange(X.shape[0]), pred] += alpha
    return scores


# gradient-boosted trees ------------------------------------------------------

def fit_gbdt(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_estimators: int,
    max_depth: int,
    learning_rate: float,
    min_samples_leaf: int = 5,
) -> dict:
    """Softmax gradient boosting with one regression tree per class per round."""
    n = y.size
    Y = np.zeros((n, n_classes), dtype=np.float64)
    Y[np.arange(n), y] = 1.0
    F = np.zeros((n, n_classes), dtype=np.float64)
    cands = build_candidates(X)
    rounds = []
    for _ in range(n_estimators):
        P = softmax(F)
        round_trees = []
        for k in range(n_classes):
            residual = Y[:, k] - P[:, k]
            tree = fit_regression_tree(
                X, residual, max_depth=max_depth,
                min_samples_leaf=min_samples_leaf, candidates=cands,
            )
            F[:, k] += learning_rate * tree_apply(tree, X)
            round_trees.append(tree)
        rounds.append(round_trees)
    return {"rounds": rounds, "learning_rate": learning_rate, "n_classes": n_classes}


def gbdt_scores(params: dict, X: np.ndarray) -> np.ndarray:
    n_classes = params["n_classes"]
    lr = params["learning_rate"]
    F = np.zeros((X.shape[0], n_classes), dtype=np.float64)
    for round_trees in params["rounds"]:
        for k in range(n_classes):
            F[:, k] += lr * tree_apply(round_trees[k], X)
    return F
