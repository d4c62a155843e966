"""Counterfactual test-set perturbation and distribution-shift reporting.

A what-if run flips an adverse condition on in a seeded random subset of the
records that do not already have it, re-renders their prompt text, and
compares a predictor's label distribution before and after. Rates are
multiples of the existing adverse-case count: 1.0 doubles it, 2.0 triples it,
and ALL converts the entire complement. The test-set size never changes;
conversion happens in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dictionary import FeatureDictionary
from .errors import EmptyComplement, LengthMismatch, OutOfRange
from .model import CrashRecord, Task, is_missing, set_field
from .textualize import TemplateSet, build_prompt

ALL = "ALL"
RATES = (1.0, 2.0, ALL)
IMPAIRMENT_FACTOR = "impairment"


@dataclass(frozen=True)
class Factor:
    name: str
    base_predicate: Callable[[CrashRecord], bool]
    rewrite: Callable[[CrashRecord, FeatureDictionary], CrashRecord]


def _alcohol_holds(record: CrashRecord) -> bool:
    return record.event.alcohol_involved is True


def _alcohol_rewrite(record: CrashRecord, dictionary: FeatureDictionary) -> CrashRecord:
    record = set_field(record, "alcohol_involved", True)
    factors = record.event.contributing_factors
    if is_missing(factors):
        factors = ()
    if IMPAIRMENT_FACTOR not in factors:
        record = set_field(record, "contributing_factors", factors + (IMPAIRMENT_FACTOR,))
    return record


def _icy_holds(record: CrashRecord) -> bool:
    return record.infrastructure.road_surface == "icy"


def _icy_rewrite(record: CrashRecord, dictionary: FeatureDictionary) -> CrashRecord:
    return set_field(record, "road_surface", "icy")


def _work_zone_holds(record: CrashRecord) -> bool:
    return record.infrastructure.work_zone is True


def _work_zone_rewrite(record: CrashRecord, dictionary: FeatureDictionary) -> CrashRecord:
    return set_field(record, "work_zone", True)


def _with_dependents(
    rewrite: Callable[[CrashRecord, FeatureDictionary], CrashRecord],
    factor_name: str,
) -> Callable[[CrashRecord, FeatureDictionary], CrashRecord]:
    def wrapped(record: CrashRecord, dictionary: FeatureDictionary) -> CrashRecord:
        record = rewrite(record, dictionary)
        for key, value in dictionary.whatif_dependents.get(factor_name, ()):
            spec = dictionary.field_spec(key)
            if spec.kind == "boolean":
                parsed, _ = dictionary.normalize_value(key, value)
                record = set_field(record, key, parsed)
            else:
                record = set_field(record, key, value)
        return record

    return wrapped


FACTORS: dict[str, Factor] = {
    "alcohol": Factor("alcohol", _alcohol_holds, _with_dependents(_alcohol_rewrite, "alcohol")),
    "icy_road": Factor("icy_road", _icy_holds, _with_dependents(_icy_rewrite, "icy_road")),
    "work_zone": Factor("work_zone", _work_zone_holds,
                        _with_dependents(_work_zone_rewrite, "work_zone")),
}


def get_factor(name: str) -> Factor:
    if name not in FACTORS:
        raise OutOfRange("unknown what-if factor", factor=name, known=sorted(FACTORS))
    return FACTORS[name]


@dataclass(frozen=True)
class PerturbationPlan:
    factor: str
    rate: float | str
    seed: int
    selected_case_ids: tuple[str, ...]
    base_count: int
    complement_count: int

    def as_dict(self) -> dict:
        return {
            "factor": self.factor,
            "rate": self.rate if isinstance(self.rate, str) else float(self.rate),
            "seed": self.seed,
            "selected_case_ids": list(self.selected_case_ids),
            "base_count": self.base_count,
            "complement_count": self.complement_count,
        }


def plan(
    test_set: list[CrashRecord],
    factor: Factor,
    rate: float | str,
    seed: int,
) -> PerturbationPlan:
    """Choose which complement cases to convert, uniformly without replacement.

    Numeric rates select min(round(base_count * rate), complement_count)
    cases; ALL selects the whole complement.
    """
    if rate != ALL and (not isinstance(rate, (int, float)) or rate <= 0):
        raise OutOfRange("rate must be positive or ALL", given=rate)
    base_ids = [r.case_id for r in test_set if factor.base_predicate(r)]
    complement_ids = [r.case_id for r in test_set if not factor.base_predicate(r)]
    if not complement_ids:
        raise EmptyComplement(
            "no cases left to convert", factor=factor.name, base_count=len(base_ids))
    if rate == ALL:
        count = len(complement_ids)
    else:
        count = min(round(len(base_ids) * float(rate)), len(complement_ids))
    gen = np.random.Generator(np.random.Philox(seed))
    picks = gen.choice(len(complement_ids), size=count, replace=False)
    chosen = {complement_ids[i] for i in picks}
    # selection order follows the test set, keeping plans order-insensitive
    selected = tuple(cid for cid in complement_ids if cid in chosen)
    return PerturbationPlan(
        factor=factor.name, rate=rate, seed=seed,
        selected_case_ids=selected,
        base_count=len(base_ids), complement_count=len(complement_ids),
    )


@dataclass(frozen=True)
class PerturbedCase:
    record: CrashRecord
    user_text: str
    changed: bool


def apply_plan(
    test_set: list[CrashRecord],
    plan_: PerturbationPlan,
    templates: TemplateSet,
    dictionary: FeatureDictionary,
    task: Task = Task.SEVERITY,
) -> list[PerturbedCase]:
    """Convert the planned cases in place and re-render their prompt text.

    The output has exactly one case per input record, in input order.
    Unselected records pass through untouched, so their rendered text is
    byte-identical to a render of the input. Applying a plan twice produces
    the same output as applying it once.
    """
    factor = get_factor(plan_.factor)
    selected = set(plan_.selected_case_ids)
    unknown = selected - {r.case_id for r in test_set}
    if unknown:
        raise OutOfRange(
            "plan selects case ids absent from the test set",
            missing=sorted(unknown)[:5], count=len(unknown),
        )
    out: list[PerturbedCase] = []
    for record in test_set:
        if record.case_id in selected:
            rewritten = factor.rewrite(record, dictionary)
            changed = rewritten != record
            record = rewritten
        else:
            changed = False
        bundle = build_prompt(record, task, templates, dictionary)
        out.append(PerturbedCase(record=record, user_text=bundle.user_text, changed=changed))
    return out


@dataclass(frozen=True)
class ClassShift:
    class_name: str
    before: int
    after: int

    @property
    def delta(self) -> int:
        return self.after - self.before

    @property
    def relative_change(self) -> float:
        return self.delta / max(self.before, 1)


@dataclass(frozen=True)
class ShiftReport:
    classes: tuple[str, ...]
    shifts: tuple[ClassShift, ...]

    def as_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "shifts": [
                {
                    "class": s.class_name, "before": s.before, "after": s.after,
                    "delta": s.delta, "relative_change": s.relative_change,
                }
                for s in self.shifts
            ],
        }

    def plot_data(self) -> dict:
        """Bar-chart data: one bar per class, height = prediction-count delta."""
        return {
            "x": [s.class_name for s in self.shifts],
            "y": [s.delta for s in self.shifts],
            "x_label": "predicted class",
            "y_label": "case change",
        }


def shift_report(
    pred_before: list[str],
    pred_after: list[str],
    classes: list[str],
) -> ShiftReport:
    """Per-class prediction-count deltas between two aligned label vectors."""
    if len(pred_before) != len(pred_after):
        raise LengthMismatch(
            "prediction vectors differ in length",
            before=len(pred_before), after=len(pred_after),
        )
    known = set(classes)
    for label in pred_before:
        if label not in known:
            raise OutOfRange("unknown class in before-labels", label=label)
    for label in pred_after:
        if label not in known:
            raise OutOfRange("unknown class in after-labels", label=label)
    before = {c: 0 for c in classes}
    after = {c: 0 for c in classes}
    for label in pred_before:
        before[label] += 1
    for label in pred_after:
        after[label] += 1
    shifts = tuple(ClassShift(c, before[c], after[c]) for c in classes)
    return ShiftReport(classes=tuple(classes), shifts=shifts)


def adverse_count(test_set: list[CrashRecord], factor: Factor) -> int:
    return sum(1 for record in test_set if factor.base_predicate(record))
