"""Crash record serialization: one JSON object per line.

The wire form is self-describing and binary-free so corpora can be diffed,
hashed, and inspected with standard tools. Missing values serialize as null;
round-tripping a record list is byte-stable.
"""

from __future__ import annotations

import json
from typing import Iterable, Iterator

from .errors import ParseError
from .model import (
    MISSING,
    AccidentType,
    CrashRecord,
    EventInfo,
    GeneralInfo,
    InfrastructureInfo,
    Labels,
    RawField,
    Severity,
    UnitInfo,
    format_datetime,
    is_missing,
    parse_datetime,
)


def _dump(value):
    if is_missing(value):
        return None
    return value


def _load(value):
    if value is None:
        return MISSING
    if isinstance(value, list):
        return tuple(value)
    return value


def record_to_dict(record: CrashRecord) -> dict:
    gen = record.general
    return {
        "case_id": record.case_id,
        "general": {
            "crash_datetime": None if is_missing(gen.crash_datetime) else format_datetime(gen.crash_datetime),
            "city": _dump(gen.city),
            "route_id": _dump(gen.route_id),
            "milepost": _dump(gen.milepost),
            "road_type": _dump(gen.road_type),
            "state_plane_easting": _dump(gen.state_plane_easting),
            "state_plane_northing": _dump(gen.state_plane_northing),
        },
        "infrastructure": {
            "lane_count": _dump(record.infrastructure.lane_count),
            "speed_limit": _dump(record.infrastructure.speed_limit),
            "work_zone": _dump(record.infrastructure.work_zone),
            "lighting": _dump(record.infrastructure.lighting),
            "road_surface": _dump(record.infrastructure.road_surface),
            "intersection_related": _dump(record.infrastructure.intersection_related),
        },
        "event": {
            "alcohol_involved": _dump(record.event.alcohol_involved),
            "drug_involved": _dump(record.event.drug_involved),
            "narrative_facts": [[k, _dump(v)] for k, v in record.event.narrative_facts],
            "contributing_factors": None if is_missing(record.event.contributing_factors)
            else list(record.event.contributing_factors),
        },
        "units": [
            {
                "unit_kind": _dump(u.unit_kind),
                "vehicle_type": _dump(u.vehicle_type),
                "driver_age": _dump(u.driver_age),
                "driver_gender": _dump(u.driver_gender),
                "action": _dump(u.action),
            }
            for u in record.units
        ],
        "labels": {
            "injured_count": record.labels.injured_count,
            "severity": record.labels.severity.code,
            "accident_type": record.labels.accident_type.type_id,
        },
        "raw_candidates": [[rf.key, rf.source, rf.value] for rf in record.raw_candidates],
    }


def record_from_dict(doc: dict) -> CrashRecord:
    gen = doc["general"]
    dt_text = gen.get("crash_datetime")
    return CrashRecord(
        case_id=doc["case_id"],
        general=GeneralInfo(
            crash_datetime=MISSING if dt_text is None else parse_datetime(dt_text),
            city=_load(gen.get("city")),
            route_id=_load(gen.get("route_id")),
            milepost=_load(gen.get("milepost")),
            road_type=_load(gen.get("road_type")),
            state_plane_easting=_load(gen.get("state_plane_easting")),
            state_plane_northing=_load(gen.get("state_plane_northing")),
        ),
        infrastructure=InfrastructureInfo(
            **{k: _load(doc["infrastructure"].get(k)) for k in (
                "lane_count", "speed_limit", "work_zone", "lighting",
                "road_surface", "intersection_related")}
        ),
        event=EventInfo(
            alcohol_involved=_load(doc["event"].get("alcohol_involved")),
            drug_involved=_load(doc["event"].get("drug_involved")),
            narrative_facts=tuple((k, _load(v)) for k, v in doc["event"].get("narrative_facts", [])),
            contributing_factors=_load(doc["event"].get("contributing_factors")),
        ),
        units=tuple(
            UnitInfo(**{k: _load(u.get(k)) for k in (
                "unit_kind", "vehicle_type", "driver_age", "driver_gender", "action")})
            for u in doc["units"]
        ),
        labels=Labels(
            injured_count=int(doc["labels"]["injured_count"]),
            severity=Severity.from_code(doc["labels"]["severity"]),
            accident_type=AccidentType.from_id(int(doc["labels"]["accident_type"])),
        ),
        raw_candidates=tuple(RawField(*row) for row in doc.get("raw_candidates", [])),
    )


def record_to_json(record: CrashRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False, separators=(",", ":"))


def record_from_json(line: str) -> CrashRecord:
    return record_from_dict(json.loads(line))


def write_records(path: str, records: Iterable[CrashRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_json(record))
            fh.write("\n")
            n += 1
    return n


def iter_records(path: str) -> Iterator[CrashRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield record_from_json(line)
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad record line: {exc}", line_no=line_no) from exc


def read_records(path: str) -> list[CrashRecord]:
    return list(iter_records(path))
