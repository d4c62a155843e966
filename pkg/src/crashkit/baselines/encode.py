"""Feature encoding: crash records to dense numeric matrices.

Layout is one block per non-text dictionary field, in dictionary order:

* categorical fields get one indicator column per category observed in the
  training set (sorted), plus a trailing ``<missing>`` indicator. Multi-valued
  fields may set several indicators at once. Unseen categories at apply time
  light only the missing indicator.
* numeric fields get one standardized value column plus a missing indicator.
  Standardization uses training mean and standard deviation (a zero standard
  deviation is replaced by one); missing values sit at the training mean,
  which is 0.0 after standardization.
* boolean fields get one 0/1 column plus a missing indicator.

The fitted :class:`EncoderState` freezes the layout and statistics so the same
transform can be replayed on any later record batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dictionary import FeatureDictionary, FieldSpec
from ..errors import DimensionMismatch, EmptyMatrix
from ..model import MISSING, CrashRecord, Task, get_field, task_class

MISSING_COLUMN = "<missing>"


@dataclass(frozen=True)
class FieldBlock:
    """Column block for one field in the encoded matrix."""

    key: str
    kind: str
    start: int
    width: int
    categories: tuple[str, ...]  # categorical only, sorted train categories
    mean: float
    std: float


@dataclass(frozen=True)
class EncoderState:
    dictionary_version: int
    blocks: tuple[FieldBlock, ...]
    feature_names: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def block(self, key: str) -> FieldBlock:
        for blk in self.blocks:
            if blk.key == key:
                return blk
        raise KeyError(key)


@dataclass(frozen=True)
class EncodedDataset:
    X: np.ndarray
    y: np.ndarray | None
    case_ids: tuple[str, ...]
    class_names: tuple[str, ...]
    state: EncoderState


def _raw_values(record: CrashRecord, spec: FieldSpec) -> list:
    """Field value(s) as a list; empty list means missing."""
    value = get_field(record, spec.key)
    if value is MISSING:
        return []
    if spec.multi:
        return list(value)
    return [value]


def _collect(records: list[CrashRecord], spec: FieldSpec) -> list[list]:
    return [_raw_values(rec, spec) for rec in records]


def encode_fit(
    records: list[CrashRecord],
    dictionary: FeatureDictionary,
    task: Task | None = None,
) -> EncodedDataset:
    """Fit the encoder on ``records`` and return their encoded dataset."""
    if not records:
        raise EmptyMatrix("cannot fit an encoder on zero records")
    blocks: list[FieldBlock] = []
    names: list[str] = []
    start = 0
    per_field: list[tuple[FieldSpec, list[list]]] = []
    for spec in dictionary.feature_fields():
        values = _collect(records, spec)
        per_field.append((spec, values))
        if spec.kind == "categorical":
            seen = sorted({str(v) for vals in values for v in vals})
            width = len(seen) + 1
            names.extend(f"{spec.key}={cat}" for cat in seen)
            names.append(f"{spec.key}={MISSING_COLUMN}")
            blocks.append(FieldBlock(spec.key, spec.kind, start, width, tuple(seen), 0.0, 1.0))
        elif spec.kind == "numeric":
            present = np.array([vals[0] for vals in values if vals], dtype=float)
            mean = float(present.mean()) if present.size else 0.0
            std = float(present.std()) if present.size else 1.0
            if std == 0.0:
                std = 1.0
            width = 2
            names.extend([spec.key, f"{spec.key}={MISSING_COLUMN}"])
            blocks.append(FieldBlock(spec.key, spec.kind, start, width, (), mean, std))
        else:  # boolean
            width = 2
            names.extend([spec.key, f"{spec.key}={MISSING_COLUMN}"])
            blocks.append(FieldBlock(spec.key, spec.kind, start, width, (), 0.0, 1.0))
        start += width
    state = EncoderState(dictionary.version, tuple(blocks), tuple(names))
    X = _transform(per_field, state, len(records))
    return _finish(records, X, state, task)


def encode_apply(
    records: list[CrashRecord],
    state: EncoderState,
    dictionary: FeatureDictionary,
    task: Task | None = None,
) -> EncodedDataset:
    """Encode ``records`` with a previously fitted :class:`EncoderState`."""
    if state.dictionary_version != dictionary.version:
        raise DimensionMismatch(
            "encoder was fitted against a different dictionary version",
            fitted=state.dictionary_version,
            given=dictionary.version,
        )
    per_field = [
        (dictionary.field_spec(blk.key), _collect(records, dictionary.field_spec(blk.key)))
        for blk in state.blocks
    ]
    X = _transform(per_field, state, len(records))
    return _finish(records, X, state, task)


def _transform(
    per_field: list[tuple[FieldSpec, list[list]]],
    state: EncoderState,
    n_rows: int,
) -> np.ndarray:
    X = np.zeros((n_rows, state.n_features), dtype=np.float64)
    for (spec, values), blk in zip(per_field, state.blocks):
        if spec.key != blk.key:
            raise DimensionMismatch("field order mismatch", expected=blk.key, got=spec.key)
        if blk.kind == "categorical":
            index = {cat: blk.start + j for j, cat in enumerate(blk.categories)}
            missing_col = blk.start + blk.width - 1
            for i, vals in enumerate(values):
                hit = False
                for v in vals:
                    col = index.get(str(v))
                    if col is not None:
                        X[i, col] = 1.0
                        hit = True
                if not hit:
                    X[i, missing_col] = 1.0
        elif blk.kind == "numeric":
            for i, vals in enumerate(values):
                if vals:
                    X[i, blk.start] = (float(vals[0]) - blk.mean) / blk.std
                else:
                    X[i, blk.start + 1] = 1.0
        else:
            for i, vals in enumerate(values):
                if vals:
                    X[i, blk.start] = 1.0 if vals[0] else 0.0
                else:
                    X[i, blk.start + 1] = 1.0
    return X


def _finish(
    records: list[CrashRecord],
    X: np.ndarray,
    state: EncoderState,
    task: Task | None,
) -> EncodedDataset:
    case_ids = tuple(rec.case_id for rec in records)
    if task is None:
        return EncodedDataset(X, None, case_ids, (), state)
    classes = task.class_names
    lookup = {name: i for i, name in enumerate(classes)}
    y = np.array([lookup[task_class(task, rec.labels)] for rec in records], dtype=np.int64)
    return EncodedDataset(X, y, case_ids, classes, state)
