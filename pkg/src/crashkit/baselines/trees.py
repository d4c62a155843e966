"""Decision trees grown by exhaustive threshold search.

Every split is a binary test ``x[feature] > threshold``. Candidate thresholds
are fixed per feature before growth starts: 0/1 indicator columns get the
single candidate 0.5, real-valued columns get up to 31 distinct training
quantiles. Candidates are materialized once as an indicator matrix, so scoring
every candidate at a node is a single weighted matrix product. Classification
splits minimize weighted Gini impurity, regression splits minimize weighted
squared error. Ties prefer the lowest candidate column index, which makes
growth deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, EmptyMatrix

QUANTILE_BINS = 32
_EPS = 1e-12


@dataclass(frozen=True)
class SplitCandidates:
    """Precomputed split tests for one feature matrix."""

    indicator: np.ndarray  # (n, n_candidates) float64 in {0, 1}
    feature: np.ndarray    # (n_candidates,) source column of each test
    threshold: np.ndarray  # (n_candidates,) test threshold
    n_features: int


def build_candidates(X: np.ndarray) -> SplitCandidates:
    if X.ndim != 2:
        raise DimensionMismatch("feature matrix must be 2-dimensional", shape=X.shape)
    n, d = X.shape
    if n == 0:
        raise EmptyMatrix("cannot build split candidates for zero rows")
    columns: list[np.ndarray] = []
    features: list[int] = []
    thresholds: list[float] = []
    for j in range(d):
        col = X[:, j]
        values = np.unique(col)
        if values.size <= 1:
            continue
        if values.size == 2 and values[0] == 0.0 and values[1] == 1.0:
            cuts = np.array([0.5])
        else:
            fractions = np.arange(1, QUANTILE_BINS) / QUANTILE_BINS
            cuts = np.unique(np.quantile(col, fractions))
            cuts = cuts[cuts < values[-1]]
        for cut in cuts:
            columns.append((col > cut).astype(np.float64))
            features.append(j)
            thresholds.append(float(cut))
    if columns:
        indicator = np.stack(columns, axis=1)
    else:
        indicator = np.zeros((n, 0), dtype=np.float64)
    return SplitCandidates(
        indicator,
        np.array(features, dtype=np.int64),
        np.array(thresholds, dtype=np.float64),
        d,
    )


def _leaf_class(counts: np.ndarray) -> dict:
    total = counts.sum()
    if total <= 0:
        probs = np.full(counts.shape, 1.0 / counts.size)
    else:
        probs = counts / total
    return {"leaf": True, "value": int(np.argmax(probs)), "probs": [float(p) for p in probs]}


def _leaf_mean(y: np.ndarray, w: np.ndarray) -> dict:
    total = w.sum()
    value = float((y * w).sum() / total) if total > 0 else 0.0
    return {"leaf": True, "value": value}


class _Grower:
    """Shared node-growing loop for classification and regression trees."""

    def __init__(
        self,
        cands: SplitCandidates,
        max_depth: int,
        min_samples_leaf: int,
        rng: np.random.Generator | None,
        feature_fraction: float,
    ):
        self.cands = cands
        self.max_depth = max_depth
        self.min_samples_leaf = max(1, min_samples_leaf)
        self.rng = rng
        self.feature_fraction = feature_fraction
        if feature_fraction < 1.0:
            # map source feature -> candidate column positions, built once
            self.by_feature: dict[int, np.ndarray] = {
                f: np.flatnonzero(cands.feature == f)
                for f in np.unique(cands.feature)
            }

    def _candidate_columns(self) -> np.ndarray:
        if self.feature_fraction >= 1.0:
            return np.arange(self.cands.indicator.shape[1])
        available = sorted(self.by_feature)
        k = max(1, int(round(self.feature_fraction * self.cands.n_features)))
        k = min(k, len(available))
        picked = self.rng.choice(len(available), size=k, replace=False)
        cols = [self.by_feature[available[i]] for i in sorted(picked)]
        return np.concatenate(cols) if cols else np.arange(0)

    def grow(self, idx: np.ndarray, depth: int) -> dict:
        leaf = self.make_leaf(idx)
        if depth >= self.max_depth or idx.size < 2 * self.min_samples_leaf:
            return leaf
        if self.is_pure(idx):
            return leaf
        cols = self._candidate_columns()
        if cols.size == 0:
            return leaf
        ind = self.cands.indicator[np.ix_(idx, cols)]
        right_n = ind.sum(axis=0)
        left_n = idx.size - right_n
        valid = (right_n >= self.min_samples_leaf) & (left_n >= self.min_samples_leaf)
        if not valid.any():
            return leaf
        score = self.split_score(idx, ind)
        score[~valid] = np.inf
        best = int(np.argmin(score))
        if not np.isfinite(score[best]) or score[best] >= self.node_score(idx) - _EPS:
            return leaf
        col = int(cols[best])
        go_right = self.cands.indicator[idx, col] > 0.5
        node = {
            "leaf": False,
            "feature": int(self.cands.feature[col]),
            "threshold": float(self.cands.threshold[col]),
            "left": self.grow(idx[~go_right], depth + 1),
            "right": self.grow(idx[go_right], depth + 1),
        }
        return node

    # hooks -----------------------------------------------------------------
    def make_leaf(self, idx: np.ndarray) -> dict:
        raise NotImplementedError

    def is_pure(self, idx: np.ndarray) -> bool:
        raise NotImplementedError

    def split_score(self, idx: np.ndarray, ind: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def node_score(self, idx: np.ndarray) -> float:
        raise NotImplementedError


class _GiniGrower(_Grower):
    def __init__(self, cands, y, w, n_classes, **kw):
        super().__init__(cands, **kw)
        self.y = y
        self.w = w
        self.onehot_w = np.zeros((y.size, n_classes), dtype=np.float64)
        self.onehot_w[np.arange(y.size), y] = w
        self.n_classes = n_classes

    def make_leaf(self, idx):
        return _leaf_class(self.onehot_w[idx].sum(axis=0))

    def is_pure(self, idx):
        return np.unique(self.y[idx]).size <= 1

    def _weighted_gini(self, counts: np.ndarray) -> np.ndarray:
        # counts: (n_classes, n_candidates); returns weight * gini per candidate
        totals = counts.sum(axis=0)
        safe = np.where(totals > 0, totals, 1.0)
        return totals - (counts * counts).sum(axis=0) / safe

    def split_score(self, idx, ind):
        right = self.onehot_w[idx].T @ ind            # (n_classes, n_candidates)
        left = self.onehot_w[idx].sum(axis=0)[:, None] - right
        return self._weighted_gini(left) + self._weighted_gini(right)

    def node_score(self, idx):
        counts = self.onehot_w[idx].sum(axis=0)
        return float(self._weighted_gini(counts[:, None])[0])


class _VarianceGrower(_Grower):
    def __init__(self, cands, y, w, **kw):
        super().__init__(cands, **kw)
        self.y = y
        self.w = w
        self.wy = w * y
        self.wyy = w * y * y

    def make_leaf(self, idx):
        return _leaf_mean(self.y[idx], self.w[idx])

    def is_pure(self, idx):
        return np.unique(self.y[idx]).size <= 1

    def _sse(self, s0: np.ndarray, s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
        safe = np.where(s0 > 0, s0, 1.0)
        return s2 - s1 * s1 / safe

    def split_score(self, idx, ind):
        s0r = self.w[idx] @ ind
        s1r = self.wy[idx] @ ind
        s2r = self.wyy[idx] @ ind
        s0l = self.w[idx].sum() - s0r
        s1l = self.wy[idx].sum() - s1r
        s2l = self.wyy[idx].sum() - s2r
        return self._sse(s0l, s1l, s2l) + self._sse(s0r, s1r, s2r)

    def node_score(self, idx):
        s0 = self.w[idx].sum()
        s1 = self.wy[idx].sum()
        s2 = self.wyy[idx].sum()
        return float(self._sse(np.array([s0]), np.array([s1]), np.array([s2]))[0])


def fit_classification_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    max_depth: int,
    min_samples_leaf: int,
    sample_weight: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    feature_fraction: float = 1.0,
    candidates: SplitCandidates | None = None,
) -> dict:
    if sample_weight is None:
        sample_weight = np.ones(y.size, dtype=np.float64)
    cands = candidates if candidates is not None else build_candidates(X)
    grower = _GiniGrower(
        cands, y, sample_weight, n_classes,
        max_depth=max_depth, min_samples_leaf=min_samples_leaf,
        rng=rng, feature_fraction=feature_fraction,
    )
    return grower.grow(np.arange(y.size), 0)


def fit_regression_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    min_samples_leaf: int,
    sample_weight: np.ndarray | None = None,
    candidates: SplitCandidates | None = None,
) -> dict:
    if sample_weight is None:
        sample_weight = np.ones(y.size, dtype=np.float64)
    cands = candidates if candidates is not None else build_candidates(X)
    grower = _VarianceGrower(
        cands, y.astype(np.float64), sample_weight,
        max_depth=max_depth, min_samples_leaf=min_samples_leaf,
        rng=None, feature_fraction=1.0,
    )
    return grower.grow(np.arange(y.size), 0)


def tree_apply(node: dict, X: np.ndarray) -> np.ndarray:
    """Route every row to its leaf and return the leaf values.

    Classification leaves yield class indices (int array); regression leaves
    yield means (float array).
    """
    n = X.shape[0]
    out = np.zeros(n, dtype=np.float64)
    is_int = True
    stack = [(node, np.arange(n))]
    while stack:
        cur, idx = stack.pop()
        if idx.size == 0:
            continue
        if cur["leaf"]:
            value = cur["value"]
            if isinstance(value, float):
                is_int = False
            out[idx] = value
            continue
        go_right = X[idx, cur["feature"]] > cur["threshold"]
        stack.append((cur["left"], idx[~go_right]))
        stack.append((cur["right"], idx[go_right]))
    return out.astype(np.int64) if is_int else out


def tree_probs(node: dict, X: np.ndarray, n_classes: int) -> np.ndarray:
    """Per-row leaf class distributions for a classification tree."""
    n = X.shape[0]
    out = np.zeros((n, n_classes), dtype=np.float64)
    stack = [(node, np.arange(n))]
    while stack:
        cur, idx = stack.pop()
        if idx.size == 0:
            continue
        if cur["leaf"]:
            out[idx] = np.array(cur["probs"])
            continue
        go_right = X[idx, cur["feature"]] > cur["threshold"]
        stack.append((cur["left"], idx[~go_right]))
        stack.append((cur["right"], idx[go_right]))
    return out


def tree_depth(node: dict) -> int:
    if node["leaf"]:
        return 0
    return 1 + max(tree_depth(node["left"]), tree_depth(node["right"]))
