"""Structured records to prompt text.

Every record renders as four titled paragraphs in fixed order (General,
Infrastructure, Event, Unit). Paragraphs are assembled from sentence
templates whose slots resolve through the feature dictionary; outcome fields
are not addressable from templates, so label leakage is impossible by
construction. A sentence whose slot has no recorded value is replaced by an
explicit hedge so the reader knows the value is absent rather than zero.

Target texts always take the form "The answer is: <TOKEN>".
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
import re
from dataclasses import dataclass

from .dictionary import FeatureDictionary
from .errors import TemplateError
from .model import (
    AccidentType,
    CrashRecord,
    InjuryBucket,
    Severity,
    Task,
    day_period,
    get_field,
    is_missing,
    month_name,
    task_token,
)

PARAGRAPH_ORDER = ("general", "infrastructure", "event", "unit")
ANSWER_PREFIX = "The answer is: "
WORD_BUDGET = (60, 160)

# Prose-only slots derived from crash_datetime; everything else must be a
# feature dictionary key.
_DERIVED_SLOTS = ("crash_date", "crash_time", "crash_month_name", "crash_period")

_SLOT_RE = re.compile(r"\{([a-z_]+)(?::([^{}|]*)\|([^{}|]*))?\}")

# Outcome vocabulary that must never appear in rendered user text. Tokens are
# banned as raw substrings; label phrases are banned as whole words, except
# where a label word doubles as a legal feature category (for example "other"
# is a road surface value, so the bare word cannot be treated as leakage).
_BANNED_TOKENS = tuple(
    [s.token for s in Severity] + [t.token for t in AccidentType]
    + [b.token for b in InjuryBucket]
)
_BANNED_LABELS = tuple(
    [s.label for s in Severity] + [t.label for t in AccidentType]
)


def leakage_hits(text: str, dictionary: FeatureDictionary | None = None) -> list[str]:
    """Outcome vocabulary found in a piece of user-facing text."""
    folded = text.casefold()
    hits = [tok for tok in _BANNED_TOKENS if tok.casefold() in folded]
    exempt = set()
    if dictionary is not None:
        for spec in dictionary.fields:
            for value in spec.values:
                exempt.add(value.replace("_", " ").casefold())
    for label in _BANNED_LABELS:
        phrase = label.casefold()
        if phrase in exempt:
            continue
        if re.search(rf"(?<![a-z]){re.escape(phrase)}(?![a-z])", folded):
            hits.append(label)
    return hits


@dataclass(frozen=True)
class Paragraph:
    name: str
    title: str
    text: str

    @property
    def word_count(self) -> int:
        return len(self.text.split())


@dataclass(frozen=True)
class TemplateSet:
    version: str
    system: dict[str, str]            # task name -> system prompt template
    paragraphs: dict[str, tuple[str, tuple[str, ...]]]  # name -> (title, sentences)
    missing_phrases: dict[str, str]   # slot -> noun phrase for hedges
    display: dict[str, str]           # raw value -> prose form
    sha256: str                       # hash of the template file bytes


def default_templates_path() -> str:
    return str(importlib.resources.files("crashkit.data") / "templates.txt")


def load_templates(path: str | None = None,
                   dictionary: FeatureDictionary | None = None) -> TemplateSet:
    """Parse and validate a template file.

    With a dictionary given, every slot is checked against it up front:
    unknown slots, conditional phrasing on non-boolean fields, and label
    vocabulary appearing in sentence text all fail the load.
    """
    path = path or default_templates_path()
    with open(path, "rb") as fh:
        raw = fh.read()
    sha = hashlib.sha256(raw).hexdigest()

    section = None
    version = "0"
    system: dict[str, list[str]] = {}
    paragraphs: dict[str, tuple[str | None, list[str]]] = {}
    missing_phrases: dict[str, str] = {}
    display: dict[str, str] = {}
    for line_no, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].split()
            continue
        if section is None:
            raise TemplateError(f"line {line_no}: text before any section header")
        kind = section[0]
        if kind == "meta":
            key, _, value = stripped.partition("=")
            if key.strip() == "version":
                version = value.strip()
        elif kind == "system":
            system.setdefault(section[1], []).append(stripped)
        elif kind == "paragraph":
            name = section[1]
            title, sentences = paragraphs.get(name, (None, []))
            if stripped.startswith("title") and "=" in stripped and title is None:
                title = stripped.partition("=")[2].strip()
            else:
                sentences.append(stripped)
            paragraphs[name] = (title, sentences)
        elif kind == "missing":
            key, _, value = stripped.partition("=")
            missing_phrases[key.strip()] = value.strip()
        elif kind == "display":
            key, _, value = stripped.partition("=")
            display[key.strip()] = value.strip()
        else:
            raise TemplateError(f"line {line_no}: unknown section {kind!r}")

    for name in PARAGRAPH_ORDER:
        if name not in paragraphs or paragraphs[name][0] is None:
            raise TemplateError(f"template file must define paragraph {name!r} with a title")
    for task in Task:
        if task.value not in system:
            raise TemplateError(f"template file must define a system prompt for {task.value!r}")

    templates = TemplateSet(
        version=version,
        system={k: " ".join(v) for k, v in system.items()},
        paragraphs={k: (t, tuple(s)) for k, (t, s) in paragraphs.items()},
        missing_phrases=missing_phrases,
        display=display,
        sha256=sha,
    )
    if dictionary is not None:
        _validate(templates, dictionary)
    return templates


def _validate(templates: TemplateSet, dictionary: FeatureDictionary) -> None:
    for name in PARAGRAPH_ORDER:
        _, sentences = templates.paragraphs[name]
        for sentence in sentences:
            hits = leakage_hits(sentence, dictionary)
            if hits:
                raise TemplateError(
                    f"paragraph {name!r} sentence mentions outcome vocabulary {hits[0]!r}")
            for match in _SLOT_RE.finditer(sentence):
                slot, true_text, _ = match.group(1), match.group(2), match.group(3)
                if slot in _DERIVED_SLOTS:
                    if true_text is not None:
                        raise TemplateError(f"derived slot {slot!r} cannot be conditional")
                    continue
                if not dictionary.has_key(slot):
                    raise TemplateError(f"template slot {slot!r} is not a dictionary field")
                spec = dictionary.field_spec(slot)
                if true_text is not None and spec.kind != "boolean":
                    raise TemplateError(
                        f"conditional phrasing on non-boolean slot {slot!r}")
            leftover = _SLOT_RE.sub("", sentence)
            if "{" in leftover or "}" in leftover:
                raise TemplateError(f"malformed slot syntax in: {sentence!r}")
    for task_name, text in templates.system.items():
        if "{label_tokens}" not in text:
            raise TemplateError(f"system prompt for {task_name!r} must place {{label_tokens}}")


def _format_number(value: float) -> str:
    if float(value) == int(value):
        return str(int(value))
    return f"{value:.2f}".rstrip("0").rstrip(".")


def _display_value(value, display: dict[str, str]) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, (int, float)):
        return _format_number(float(value))
    if isinstance(value, tuple):
        if not value:
            return "none listed"
        parts = [_display_value(v, display) for v in value]
        if len(parts) == 1:
            return parts[0]
        return ", ".join(parts[:-1]) + " and " + parts[-1]
    text = str(value)
    if text in display:
        return display[text]
    return text.replace("_", " ")


def _slot_value(record: CrashRecord, slot: str):
    when = record.general.crash_datetime
    if slot == "crash_date":
        if is_missing(when):
            return when
        return f"{month_name(when.month)} {when.day}, {when.year}"
    if slot == "crash_time":
        return when if is_missing(when) else f"{when.hour:02d}:{when.minute:02d}"
    if slot == "crash_month_name":
        return when if is_missing(when) else month_name(when.month)
    if slot == "crash_period":
        return when if is_missing(when) else day_period(when.hour)
    return get_field(record, slot)


def _render_sentence(record: CrashRecord, sentence: str, templates: TemplateSet,
                     dictionary: FeatureDictionary) -> tuple[str | None, list[str]]:
    """Render one sentence; returns (text or None, missing slot names)."""
    missing_slots: list[str] = []

    def fill(match: re.Match) -> str:
        slot, true_text, false_text = match.group(1), match.group(2), match.group(3)
        if slot not in _DERIVED_SLOTS and not dictionary.has_key(slot):
            raise TemplateError(f"template slot {slot!r} is not a dictionary field")
        value = _slot_value(record, slot)
        if is_missing(value) or value is None:
            missing_slots.append(slot)
            return ""
        if true_text is not None:
            return true_text if value else false_text
        return _display_value(value, templates.display)

    text = _SLOT_RE.sub(fill, sentence)
    if missing_slots:
        return None, missing_slots
    return text, []


def _hedge(slot: str, templates: TemplateSet) -> str:
    phrase = templates.missing_phrases.get(slot, slot.replace("_", " "))
    return f"The {phrase} was not recorded."


def render_paragraphs(record: CrashRecord, templates: TemplateSet,
                      dictionary: FeatureDictionary) -> list[Paragraph]:
    """Render the four titled paragraphs for one record, in fixed order."""
    out = []
    for name in PARAGRAPH_ORDER:
        title, sentences = templates.paragraphs[name]
        rendered: list[str] = []
        hedged: list[str] = []
        seen_hedges: set[str] = set()
        for sentence in sentences:
            text, missing_slots = _render_sentence(record, sentence, templates, dictionary)
            if text is not None:
                rendered.append(text)
                continue
            for slot in missing_slots:
                if slot not in seen_hedges:
                    seen_hedges.add(slot)
                    hedged.append(_hedge(slot, templates))
        out.append(Paragraph(name=name, title=title, text=" ".join(rendered + hedged)))
    return out


def budget_warnings(paragraphs: list[Paragraph]) -> list[str]:
    """Soft word-budget check; violations are reported, never fatal."""
    low, high = WORD_BUDGET
    notes = []
    for p in paragraphs:
        if not low <= p.word_count <= high:
            notes.append(f"paragraph {p.name!r} has {p.word_count} words "
                         f"(soft budget {low}..{high})")
    return notes


def user_text_from_paragraphs(paragraphs: list[Paragraph]) -> str:
    return "\n\n".join(f"{p.title}: {p.text}" for p in paragraphs)


@dataclass(frozen=True)
class PromptBundle:
    case_id: str
    task: Task
    system_text: str
    user_text: str
    target_text: str


def build_prompt(record: CrashRecord, task: Task, templates: TemplateSet,
                 dictionary: FeatureDictionary,
                 paragraphs: list[Paragraph] | None = None) -> PromptBundle:
    if paragraphs is None:
        paragraphs = render_paragraphs(record, templates, dictionary)
    tokens = ", ".join(task.tokens)
    system_text = templates.system[task.value].replace("{label_tokens}", tokens)
    return PromptBundle(
        case_id=record.case_id,
        task=task,
        system_text=system_text,
        user_text=user_text_from_paragraphs(paragraphs),
        target_text=ANSWER_PREFIX + task_token(task, record.labels),
    )


# ---------------------------------------------------------------------------
# File formats: prompt bundles (for prediction) and training triplets.
# ---------------------------------------------------------------------------

def bundle_to_json(bundle: PromptBundle) -> str:
    return json.dumps({
        "case_id": bundle.case_id,
        "task": bundle.task.value,
        "system": bundle.system_text,
        "user": bundle.user_text,
        "target": bundle.target_text,
    }, ensure_ascii=False, separators=(",", ":"))


def bundle_from_json(line: str) -> PromptBundle:
    doc = json.loads(line)
    return PromptBundle(
        case_id=doc["case_id"],
        task=Task.from_name(doc["task"]),
        system_text=doc["system"],
        user_text=doc["user"],
        target_text=doc.get("target", ""),
    )


def write_bundles(path: str, bundles: list[PromptBundle]) -> int:
    with open(path, "w", encoding="utf-8") as fh:
        for bundle in bundles:
            fh.write(bundle_to_json(bundle))
            fh.write("\n")
    return len(bundles)


def read_bundles(path: str) -> list[PromptBundle]:
    with open(path, "r", encoding="utf-8") as fh:
        return [bundle_from_json(line) for line in fh if line.strip()]


def export_sft(records: list[CrashRecord], task: Task, templates: TemplateSet,
               dictionary: FeatureDictionary, path: str) -> int:
    """Write instruction-tuning triplets, one JSON object per line.

    Lines are sorted by case_id so exports are byte-stable regardless of
    input order. Keys are exactly case_id / system / user / assistant.
    """
    bundles = sorted(
        (build_prompt(r, task, templates, dictionary) for r in records),
        key=lambda b: b.case_id)
    with open(path, "w", encoding="utf-8") as fh:
        for b in bundles:
            fh.write(json.dumps({
                "case_id": b.case_id,
                "system": b.system_text,
                "user": b.user_text,
                "assistant": b.target_text,
            }, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
    return len(bundles)
