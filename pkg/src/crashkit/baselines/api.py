"""Train/predict/save/load dispatch for the baseline model kinds."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, EmptyMatrix, OutOfRange, SchemaMismatch
from ..model import Task
from .bayes import fit_naive_bayes, naive_bayes_scores
from .boost import (
    adaboost_scores,
    fit_adaboost,
    fit_forest,
    fit_gbdt,
    forest_scores,
    gbdt_scores,
)
from .encode import EncodedDataset, EncoderState, FieldBlock
from .linear import fit_logreg, logreg_scores
from .trees import fit_classification_tree, tree_probs

MODEL_KINDS = ("logreg", "tree", "forest", "adaboost", "naive_bayes", "gbdt")

_DISPLAY = {
    "logreg": "logreg",
    "tree": "tree",
    "forest": "forest",
    "adaboost": "adaboost",
    "naive_bayes": "naive_bayes (Bayesian Network stand-in)",
    "gbdt": "gbdt (CatBoost stand-in)",
}

_FORMAT_VERSION = 1

DEFAULT_HYPERPARAMS: dict[str, dict] = {
    "logreg": {"learning_rate": 0.5, "l2": 1e-4, "epochs": 300},
    "tree": {"max_depth": 10, "min_samples_leaf": 5},
    "forest": {
        "n_estimators": 15, "max_depth": 10, "min_samples_leaf": 5,
        "bootstrap": True, "feature_fraction": None,
    },
    "adaboost": {"n_estimators": 40, "max_depth": 1},
    "naive_bayes": {},
    "gbdt": {"n_estimators": 20, "max_depth": 3, "learning_rate": 0.3},
}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    task: Task
    seed: int = 0
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise OutOfRange("unknown model kind", kind=self.kind, known=MODEL_KINDS)
        unknown = set(self.hyperparams) - set(DEFAULT_HYPERPARAMS[self.kind])
        if unknown:
            raise OutOfRange(
                "unknown hyperparameters for model kind",
                kind=self.kind, unknown=sorted(unknown),
            )

    def resolved_hyperparams(self) -> dict:
        merged = dict(DEFAULT_HYPERPARAMS[self.kind])
        merged.update(self.hyperparams)
        return merged


@dataclass(frozen=True)
class BaselineModel:
    spec: ModelSpec
    state: EncoderState
    class_names: tuple[str, ...]
    params: dict
    degenerate: bool = False

    @property
    def display_name(self) -> str:
        return _DISPLAY[self.spec.kind]


def display_name(kind: str) -> str:
    if kind not in _DISPLAY:
        raise OutOfRange("unknown model kind", kind=kind, known=MODEL_KINDS)
    return _DISPLAY[kind]


def train(spec: ModelSpec, dataset: EncodedDataset) -> BaselineModel:
    """Fit one baseline on an encoded training set.

    A training set whose labels collapse to a single class cannot support any
    of the estimators; the result is a constant model flagged ``degenerate``
    that always predicts that class.
    """
    if dataset.y is None:
        raise EmptyMatrix("training requires labeled data; encode with a task")
    if dataset.X.shape[0] == 0:
        raise EmptyMatrix("training requires at least one record")
    X, y = dataset.X, dataset.y
    n_classes = len(dataset.class_names)
    hp = spec.resolved_hyperparams()
    if np.unique(y).size <= 1:
        params = {"constant_class": int(y[0]), "n_classes": n_classes}
        return BaselineModel(spec, dataset.state, dataset.class_names, params, degenerate=True)
    if spec.kind == "logreg":
        params = fit_logreg(X, y, n_classes, **hp)
    elif spec.kind == "tree":
        params = {
            "tree": fit_classification_tree(X, y, n_classes, **hp),
            "n_classes": n_classes,
        }
    elif spec.kind == "forest":
        params = fit_forest(X, y, n_classes, seed=spec.seed, **hp)
    elif spec.kind == "adaboost":
        params = fit_adaboost(X, y, n_classes, seed=spec.seed, **hp)
    elif spec.kind == "naive_bayes":
        params = fit_naive_bayes(X, y, n_classes, dataset.state, **hp)
    else:
        params = fit_gbdt(X, y, n_classes, **hp)
    return BaselineModel(spec, dataset.state, dataset.class_names, params)


def predict_scores(model: BaselineModel, X: np.ndarray) -> np.ndarray:
    if X.ndim != 2 or X.shape[1] != model.state.n_features:
        raise DimensionMismatch(
            "feature matrix does not match the model's encoder",
            expected=model.state.n_features,
            got=None if X.ndim != 2 else X.shape[1],
        )
    n_classes = len(model.class_names)
    if model.degenerate:
        scores = np.zeros((X.shape[0], n_classes), dtype=np.float64)
        scores[:, model.params["constant_class"]] = 1.0
        return scores
    kind = model.spec.kind
    if kind == "logreg":
        return logreg_scores(model.params, X)
    if kind == "tree":
        return tree_probs(model.params["tree"], X, n_classes)
    if kind == "forest":
        return forest_scores(model.params, X)
    if kind == "adaboost":
        return adaboost_scores(model.params, X)
    if kind == "naive_bayes":
        return naive_bayes_scores(model.params, X, model.state)
    return gbdt_scores(model.params, X)


def predict(model: BaselineModel, X: np.ndarray) -> list[str]:
    """Predicted class names; score ties resolve to the lowest class index."""
    scores = predict_scores(model, X)
    idx = np.argmax(scores, axis=1)
    return [model.class_names[i] for i in idx]


# persistence -----------------------------------------------------------------

def _state_to_dict(state: EncoderState) -> dict:
    return {
        "dictionary_version": state.dictionary_version,
        "feature_names": list(state.feature_names),
        "blocks": [
            {
                "key": b.key, "kind": b.kind, "start": b.start, "width": b.width,
                "categories": list(b.categories), "mean": b.mean, "std": b.std,
            }
            for b in state.blocks
        ],
    }


def _state_from_dict(data: dict) -> EncoderState:
    blocks = tuple(
        FieldBlock(
            b["key"], b["kind"], b["start"], b["width"],
            tuple(b["categories"]), b["mean"], b["std"],
        )
        for b in data["blocks"]
    )
    return EncoderState(data["dictionary_version"], blocks, tuple(data["feature_names"]))


def save_model(model: BaselineModel, path: str | Path) -> None:
    payload = {
        "format_version": _FORMAT_VERSION,
        "kind": model.spec.kind,
        "task": model.spec.task.value,
        "seed": model.spec.seed,
        "hyperparams": model.spec.hyperparams,
        "class_names": list(model.class_names),
        "degenerate": model.degenerate,
        "encoder": _state_to_dict(model.state),
        "params": model.params,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> BaselineModel:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format_version") != _FORMAT_VERSION:
        raise SchemaMismatch(
            "unsupported model file format",
            found=data.get("format_version"), expected=_FORMAT_VERSION,
        )
    spec = ModelSpec(
        kind=data["kind"],
        task=Task(data["task"]),
        seed=data["seed"],
        hyperparams=data["hyperparams"],
    )
    return BaselineModel(
        spec=spec,
        state=_state_from_dict(data["encoder"]),
        class_names=tuple(data["class_names"]),
        params=data["params"],
        degenerate=data["degenerate"],
    )
