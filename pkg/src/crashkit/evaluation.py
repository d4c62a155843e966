"""Classification scoring and cross-model rank aggregation.

Metrics follow the prevalence-weighted convention: per-class precision,
recall, and F1 are averaged with weights equal to each class's share of the
truth vector. Division by an empty denominator scores 0 rather than raising,
so a class a model never predicts (or that never occurs) contributes zero.
All arithmetic is done in full precision; rounding happens only in rendered
reports (3 decimals for metrics, 2 for rank scores).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import EmptyMatrix, LengthMismatch, MissingCell, UnknownLabel

METRIC_KEYS = ("accuracy", "precision", "recall", "f1")
TASK_ORDER = ("injury", "severity", "accident_type")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row = true class, column = predicted class, cell = count."""

    classes: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def as_dict(self) -> dict:
        return {"classes": list(self.classes), "counts": [list(r) for r in self.counts]}


def confusion(truth: Sequence[str], predicted: Sequence[str], classes: Sequence[str]) -> ConfusionMatrix:
    """Count (true, predicted) pairs over a fixed class list."""
    if len(truth) != len(predicted):
        raise LengthMismatch(
            f"truth has {len(truth)} entries, predictions have {len(predicted)}")
    if len(truth) == 0:
        raise EmptyMatrix("cannot build a confusion matrix from zero pairs")
    if len(set(classes)) != len(classes) or not classes:
        raise UnknownLabel("class list must be non-empty and duplicate-free")
    index = {c: i for i, c in enumerate(classes)}
    counts = [[0] * len(classes) for _ in classes]
    for t, p in zip(truth, predicted):
        if t not in index:
            raise UnknownLabel(f"truth label {t!r} is not in the class list")
        if p not in index:
            raise UnknownLabel(f"predicted label {p!r} is not in the class list")
        counts[index[t]][index[p]] += 1
    return ConfusionMatrix(classes=tuple(classes), counts=tuple(tuple(r) for r in counts))


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class: dict[str, dict[str, float]]
    support: dict[str, int]

    def cell(self, key: str) -> float:
        return getattr(self, key)


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def metrics(cm: ConfusionMatrix) -> MetricReport:
    """Accuracy plus prevalence-weighted precision/recall/F1."""
    k = len(cm.classes)
    total = cm.total
    if total == 0:
        raise EmptyMatrix("confusion matrix has zero total count")
    row_sums = [sum(cm.counts[i]) for i in range(k)]
    col_sums = [sum(cm.counts[i][j] for i in range(k)) for j in range(k)]
    diag = [cm.counts[i][i] for i in range(k)]

    per_class = {}
    sum_p = sum_r = sum_f = 0.0
    for i, cls in enumerate(cm.classes):
        p = _safe_div(diag[i], col_sums[i])
        r = _safe_div(diag[i], row_sums[i])
        f = _safe_div(2.0 * p * r, p + r)
        per_class[cls] = {"precision": p, "recall": r, "f1": f}
        # scale by the integer support and divide once at the end, so the
        # weighted sums cannot creep past 1.0 by accumulated rounding
        sum_p += row_sums[i] * p
        sum_r += row_sums[i] * r
        sum_f += row_sums[i] * f

    return MetricReport(
        accuracy=sum(diag) / total,
        precision=sum_p / total,
        recall=sum_r / total,
        f1=sum_f / total,
        per_class=per_class,
        support={cls: row_sums[i] for i, cls in enumerate(cm.classes)},
    )


def score(truth: Sequence[str], predicted: Sequence[str], classes: Sequence[str]) -> MetricReport:
    return metrics(confusion(truth, predicted, classes))


# ---------------------------------------------------------------------------
# Rank aggregation across models.
#
# Input: per-model metric cells for the three tasks. Each model must fill all
# 12 cells (4 metrics x 3 tasks). Within each of the 12 columns, rank 1 goes
# to the best (highest) value and ties receive the average of the positions
# they span. A model's score is the mean of its 12 ranks; lower is better.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankRow:
    model_name: str
    score: float
    position: int


def _average_ranks(values: Sequence[float]) -> list[float]:
    """Rank descending (1 = highest), tied values share the average position."""
    order = sorted(range(len(values)), key=lambda i: -values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + 1 + j + 1) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def rank_table(cells: Mapping[str, Mapping[str, Mapping[str, float]]]) -> list[RankRow]:
    """Aggregate models by average column-wise rank.

    cells maps model name -> task name -> metric name -> value. The result is
    sorted ascending by score; equal scores share their sorted block in model
    name order. Input iteration order never affects the outcome.
    """
    if not cells:
        raise EmptyMatrix("rank table needs at least one model")
    models = sorted(cells)
    columns = [(task, metric) for task in TASK_ORDER for metric in METRIC_KEYS]
    for model in models:
        for task, metric in columns:
            try:
                value = cells[model][task][metric]
            except (KeyError, TypeError):
                value = None
            if not isinstance(value, (int, float)):
                raise MissingCell(f"model {model!r} is missing cell {task}/{metric}")

    totals = {m: 0.0 for m in models}
    for task, metric in columns:
        column = [float(cells[m][task][metric]) for m in models]
        for m, r in zip(models, _average_ranks(column)):
            totals[m] += r

    scored = sorted(((totals[m] / len(columns), m) for m in models))
    return [RankRow(model_name=m, score=s, position=i + 1)
            for i, (s, m) in enumerate(scored)]


# ---------------------------------------------------------------------------
# Report rendering. Human-readable text uses fixed-width columns; the
# machine-readable form is plain JSON. Metric values are rounded to 3
# decimals for display, rank scores to 2.
# ---------------------------------------------------------------------------

def report_to_dict(task: str, model_name: str, report: MetricReport, cm: ConfusionMatrix) -> dict:
    return {
        "task": task,
        "model": model_name,
        "accuracy": report.accuracy,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "per_class": report.per_class,
        "support": report.support,
        "confusion": cm.as_dict(),
    }


def render_report(task: str, model_name: str, report: MetricReport) -> str:
    lines = [
        f"task: {task}",
        f"model: {model_name}",
        "",
        f"{'metric':<12}{'value':>8}",
        f"{'accuracy':<12}{report.accuracy:>8.3f}",
        f"{'precision':<12}{report.precision:>8.3f}",
        f"{'recall':<12}{report.recall:>8.3f}",
        f"{'f1':<12}{report.f1:>8.3f}",
        "",
        f"{'class':<16}{'support':>8}{'prec':>8}{'rec':>8}{'f1':>8}",
    ]
    for cls, row in report.per_class.items():
        lines.append(
            f"{cls:<16}{report.support[cls]:>8d}"
            f"{row['precision']:>8.3f}{row['recall']:>8.3f}{row['f1']:>8.3f}")
    return "\n".join(lines) + "\n"


def render_rank_table(rows: Sequence[RankRow]) -> str:
    lines = [f"{'position':<10}{'model':<28}{'avg rank':>9}"]
    for row in rows:
        lines.append(f"{row.position:<10d}{row.model_name:<28}{row.score:>9.2f}")
    return "\n".join(lines) + "\n"


def rank_table_to_dict(rows: Sequence[RankRow]) -> dict:
    return {"ranking": [
        {"position": r.position, "model": r.model_name, "score": r.score}
        for r in rows
    ]}


def write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
