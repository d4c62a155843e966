"""Domain model: label codecs, injury buckets, and the crash record type.

The three label vocabularies (severity scale, accident type, injury bucket)
are closed sets. Each carries the canonical token string used in prompts and
model output parsing; tokens are exact byte strings and must never be edited.
"""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass, field, replace
from typing import Any, Union

from .errors import LengthMismatch, OutOfRange


class _MissingType:
    """Singleton marker for a value that is absent from the source data."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MISSING"

    def __bool__(self):
        return False

    def __deepcopy__(self, memo):
        return self

    def __copy__(self):
        return self


MISSING = _MissingType()

# A field that may be absent. Kept loose on purpose: values are validated by
# the feature dictionary, not by the type system.
Maybe = Union[Any, _MissingType]


def is_missing(value) -> bool:
    return value is MISSING


class Severity(enum.Enum):
    """Crash severity on the five-letter police scale, ordinal 1 (least) to 5."""

    NO_APPARENT_INJURY = ("O", 1, "No Apparent Injury", "<NO APPARENT INJURY>")
    POSSIBLE_INJURY = ("C", 2, "Possible Injury", "<POSSIBLE INJURY>")
    MINOR_INJURY = ("B", 3, "Minor Injury", "<MINOR INJURY>")
    SERIOUS_INJURY = ("A", 4, "Serious Injury", "<SERIOUS INJURY>")
    FATAL = ("K", 5, "Fatal", "<FATAL>")

    def __init__(self, code: str, ordinal: int, label: str, token: str):
        self.code = code
        self.ordinal = ordinal
        self.label = label
        self.token = token

    @classmethod
    def from_code(cls, code: str) -> "Severity":
        for s in cls:
            if s.code == code:
                return s
        raise OutOfRange(f"unknown severity code {code!r}")

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "Severity":
        for s in cls:
            if s.ordinal == ordinal:
                return s
        raise OutOfRange(f"severity ordinal must be 1..5, got {ordinal!r}")

    @classmethod
    def from_token(cls, token: str) -> "Severity":
        for s in cls:
            if s.token == token:
                return s
        raise OutOfRange(f"unknown severity token {token!r}")


class AccidentType(enum.Enum):
    """The fourteen collision categories, ids 1..14."""

    SINGLE_VEHICLE_WITH_OBJECT = (1, "SVO", "Single Vehicle With Object", "<SINGLE VEHICLE WITH OBJECT>")
    ANGLE_IMPACTS_RIGHT = (2, "AIR", "Angle Impacts Right", "<ANGLE IMPACTS_RIGHT>")
    OTHER = (3, "Oth", "Other", "<OTHER>")
    SIDESWIPES_LEFT = (4, "SL", "Sideswipes Left", "<SIDESWIPES_LEFT>")
    FRONT_END_COLLISION = (5, "FEC", "Front End Collision", "<FRONT END COLLISIONS>")
    REAR_END_COLLISION = (6, "REC", "Rear End Collision", "<REAR END COLLISIONS>")
    OVERTURN = (7, "OT", "Overturn", "<OVERTURN>")
    ANIMAL_COLLISION = (8, "AC", "Animal Collision", "<ANIMAL COLLISIONS>")
    PEDESTRIAN_COLLISION = (9, "PC", "Pedestrian Collision", "<PEDESTRIAN COLLISIONS>")
    SIDESWIPES_RIGHT = (10, "SR", "Sideswipes Right", "<SIDESWIPES_RIGHT>")
    PEDAL_CYCLIST_COLLISION = (11, "PCC", "Pedal Cyclist Collision", "<PEDALCYCLIST COLLISIONS>")
    HEAD_ON_COLLISION = (12, "HOC", "Head On Collision", "<HEAD ON COLLISIONS>")
    OFF_ROAD = (13, "OR", "Off Road", "<OFF ROAD>")
    ANGLE_IMPACTS_LEFT = (14, "AIL", "Angle Impacts Left", "<ANGLE IMPACTS_LEFT>")

    def __init__(self, type_id: int, abbr: str, label: str, token: str):
        self.type_id = type_id
        self.abbr = abbr
        self.label = label
        self.token = token

    @classmethod
    def from_id(cls, type_id: int) -> "AccidentType":
        for t in cls:
            if t.type_id == type_id:
                return t
        raise OutOfRange(f"accident type id must be 1..14, got {type_id!r}")

    @classmethod
    def from_abbr(cls, abbr: str) -> "AccidentType":
        for t in cls:
            if t.abbr == abbr:
                return t
        raise OutOfRange(f"unknown accident type abbreviation {abbr!r}")

    @classmethod
    def from_token(cls, token: str) -> "AccidentType":
        for t in cls:
            if t.token == token:
                return t
        raise OutOfRange(f"unknown accident type token {token!r}")


class InjuryBucket(enum.Enum):
    """Total injured persons, bucketed: 0, 1, 2, or 3-and-up."""

    ZERO = ("ZERO", "<ZERO>")
    ONE = ("ONE", "<ONE>")
    TWO = ("TWO", "<TWO>")
    THREE_OR_MORE = ("THREE_OR_MORE", "<THREE OR MORE>")

    def __init__(self, bucket_name: str, token: str):
        self.bucket_name = bucket_name
        self.token = token

    @classmethod
    def from_token(cls, token: str) -> "InjuryBucket":
        for b in cls:
            if b.token == token:
                return b
        raise OutOfRange(f"unknown injury bucket token {token!r}")

    @classmethod
    def from_name(cls, name: str) -> "InjuryBucket":
        for b in cls:
            if b.bucket_name == name:
                return b
        raise OutOfRange(f"unknown injury bucket name {name!r}")


def bucket_injuries(count: int) -> InjuryBucket:
    """Map a non-negative injured-person count onto its bucket."""
    if not isinstance(count, int) or isinstance(count, bool) or count < 0:
        raise OutOfRange(f"injured count must be a non-negative integer, got {count!r}")
    if count == 0:
        return InjuryBucket.ZERO
    if count == 1:
        return InjuryBucket.ONE
    if count == 2:
        return InjuryBucket.TWO
    return InjuryBucket.THREE_OR_MORE


class Task(enum.Enum):
    """The three prediction tasks and their legal output tokens."""

    INJURY = "injury"
    SEVERITY = "severity"
    ACCIDENT_TYPE = "accident_type"

    @property
    def tokens(self) -> tuple[str, ...]:
        return _TASK_TOKENS[self]

    @property
    def class_names(self) -> tuple[str, ...]:
        return _TASK_CLASSES[self]

    @classmethod
    def from_name(cls, name: str) -> "Task":
        for t in cls:
            if t.value == name:
                return t
        raise OutOfRange(f"unknown task {name!r}")


_TASK_TOKENS = {
    Task.INJURY: tuple(b.token for b in InjuryBucket),
    Task.SEVERITY: tuple(s.token for s in Severity),
    Task.ACCIDENT_TYPE: tuple(t.token for t in AccidentType),
}

_TASK_CLASSES = {
    Task.INJURY: tuple(b.bucket_name for b in InjuryBucket),
    Task.SEVERITY: tuple(s.code for s in Severity),
    Task.ACCIDENT_TYPE: tuple(t.abbr for t in AccidentType),
}


@dataclass(frozen=True)
class Labels:
    """The three outcome labels. Never rendered into prompt text."""

    injured_count: int
    severity: Severity
    accident_type: AccidentType

    @property
    def injury_bucket(self) -> InjuryBucket:
        return bucket_injuries(self.injured_count)


def format_crash_result(labels: Labels) -> str:
    """Compact result notation: <type abbr>_<severity code>^<injury bucket>."""
    return f"{labels.accident_type.abbr}_{labels.severity.code}^{labels.injury_bucket.bucket_name}"


def task_token(task: Task, labels: Labels) -> str:
    """The canonical target token for one record under one task."""
    if task is Task.INJURY:
        return labels.injury_bucket.token
    if task is Task.SEVERITY:
        return labels.severity.token
    return labels.accident_type.token


def task_class(task: Task, labels: Labels) -> str:
    """The short class name (bucket name / severity code / type abbr) for a record."""
    if task is Task.INJURY:
        return labels.injury_bucket.bucket_name
    if task is Task.SEVERITY:
        return labels.severity.code
    return labels.accident_type.abbr


def token_to_class(task: Task, token: str) -> str:
    """Convert a legal output token to the matching short class name."""
    idx = _token_index(task, token)
    return task.class_names[idx]


def _token_index(task: Task, token: str) -> int:
    try:
        return task.tokens.index(token)
    except ValueError:
        raise OutOfRange(f"token {token!r} is not legal for task {task.value}") from None


@dataclass(frozen=True)
class GeneralInfo:
    """Where and when: the first prompt paragraph's source fields."""

    crash_datetime: Maybe = MISSING  # datetime.datetime when present
    city: Maybe = MISSING
    route_id: Maybe = MISSING
    milepost: Maybe = MISSING
    road_type: Maybe = MISSING
    state_plane_easting: Maybe = MISSING
    state_plane_northing: Maybe = MISSING


@dataclass(frozen=True)
class InfrastructureInfo:
    """Static roadway attributes at the crash location."""

    lane_count: Maybe = MISSING
    speed_limit: Maybe = MISSING
    work_zone: Maybe = MISSING
    lighting: Maybe = MISSING
    road_surface: Maybe = MISSING
    intersection_related: Maybe = MISSING


@dataclass(frozen=True)
class EventInfo:
    """Event-level circumstances around the crash."""

    alcohol_involved: Maybe = MISSING
    drug_involved: Maybe = MISSING
    # Ordered (factor name, value) pairs; factor names come from the feature
    # dictionary so downstream consumers can treat them like any other field.
    narrative_facts: tuple[tuple[str, Any], ...] = ()
    contributing_factors: Maybe = MISSING  # tuple[str, ...] when present


@dataclass(frozen=True)
class UnitInfo:
    """One involved unit (vehicle, pedestrian, or cyclist)."""

    unit_kind: Maybe = MISSING  # vehicle | pedestrian | cyclist
    vehicle_type: Maybe = MISSING
    driver_age: Maybe = MISSING
    driver_gender: Maybe = MISSING
    action: Maybe = MISSING


@dataclass(frozen=True)
class RawField:
    """One unresolved source value kept for the cleaning stage."""

    key: str
    source: str  # "table.column"
    value: str


@dataclass(frozen=True)
class CrashRecord:
    """One crash event: identifier, four feature groups, at least one unit, labels.

    raw_candidates holds multi-source values that the cleaning stage has not
    merged yet; it is empty on every cleaned record.
    """

    case_id: str
    general: GeneralInfo
    infrastructure: InfrastructureInfo
    event: EventInfo
    units: tuple[UnitInfo, ...]
    labels: Labels
    raw_candidates: tuple[RawField, ...] = ()

    def __post_init__(self):
        if not self.case_id:
            raise LengthMismatch("case_id must be non-empty")
        if len(self.units) < 1:
            raise LengthMismatch(f"record {self.case_id} must have at least one unit")


# ---------------------------------------------------------------------------
# Field access by feature-dictionary key.
#
# All feature-level operations (encoding, textualization, completeness,
# perturbation) address record fields through these accessors so that the
# field list lives in the dictionary config, not in scattered attribute code.
# ---------------------------------------------------------------------------

_GROUP_ATTRS = {
    "general": ("general", GeneralInfo),
    "infrastructure": ("infrastructure", InfrastructureInfo),
    "event": ("event", EventInfo),
}

_MONTH_NAMES = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)


def _first_vehicle(record: CrashRecord) -> UnitInfo | None:
    for u in record.units:
        if u.unit_kind == "vehicle" or is_missing(u.unit_kind):
            return u
    return None


def get_field(record: CrashRecord, key: str):
    """Read one dictionary-addressable value off a record (MISSING when absent)."""
    gen, infra, ev = record.general, record.infrastructure, record.event
    if key == "crash_month":
        return MISSING if is_missing(gen.crash_datetime) else gen.crash_datetime.month
    if key == "crash_hour":
        return MISSING if is_missing(gen.crash_datetime) else gen.crash_datetime.hour
    if key == "unit_count":
        return len(record.units)
    if key == "pedestrian_involved":
        return any(u.unit_kind == "pedestrian" for u in record.units)
    if key == "cyclist_involved":
        return any(u.unit_kind == "cyclist" for u in record.units)
    if hasattr(gen, key):
        return getattr(gen, key)
    if hasattr(infra, key):
        return getattr(infra, key)
    if key in ("alcohol_involved", "drug_involved", "contributing_factors"):
        return getattr(ev, key)
    for name, value in ev.narrative_facts:
        if name == key:
            return value
    if key in ("vehicle_type", "driver_age", "driver_gender", "action"):
        unit = _first_vehicle(record)
        return MISSING if unit is None else getattr(unit, key)
    # Unknown narrative factor: absent, not an error, so a dictionary can grow
    # fields before the data catches up.
    return MISSING


def set_field(record: CrashRecord, key: str, value) -> CrashRecord:
    """Functional field update; returns a new record. Derived keys are rejected."""
    if key in ("crash_month", "crash_hour", "unit_count", "pedestrian_involved", "cyclist_involved"):
        raise OutOfRange(f"field {key!r} is derived and cannot be set directly")
    if hasattr(record.general, key):
        return replace(record, general=replace(record.general, **{key: value}))
    if hasattr(record.infrastructure, key):
        return replace(record, infrastructure=replace(record.infrastructure, **{key: value}))
    if key in ("alcohol_involved", "drug_involved", "contributing_factors"):
        return replace(record, event=replace(record.event, **{key: value}))
    facts = list(record.event.narrative_facts)
    for i, (name, _) in enumerate(facts):
        if name == key:
            facts[i] = (name, value)
            break
    else:
        facts.append((key, value))
    return replace(record, event=replace(record.event, narrative_facts=tuple(facts)))


def month_name(month: int) -> str:
    if not 1 <= month <= 12:
        raise OutOfRange(f"month must be 1..12, got {month!r}")
    return _MONTH_NAMES[month - 1]


def day_period(hour: int) -> str:
    """Coarse time-of-day bucket used in prompt text."""
    if not 0 <= hour <= 23:
        raise OutOfRange(f"hour must be 0..23, got {hour!r}")
    if 5 <= hour <= 11:
        return "morning"
    if 12 <= hour <= 16:
        return "afternoon"
    if 17 <= hour <= 20:
        return "evening"
    return "night"


def parse_datetime(text: str) -> dt.datetime:
    return dt.datetime.strptime(text, "%Y-%m-%dT%H:%M:%S")


def format_datetime(value: dt.datetime) -> str:
    return value.strftime("%Y-%m-%dT%H:%M:%S")
