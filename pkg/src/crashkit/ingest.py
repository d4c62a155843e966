"""Source-table parsing, joining, cleaning, and completeness filtering.

The flow mirrors how multi-table crash data actually arrives: a crash table
keyed by case, a road inventory keyed by route and milepost interval, a unit
table keyed by case and unit number, and an optional person table keyed by
case and unit number.

Joining keeps values close to their raw source form: categorical cells stay
trimmed strings and multi-source fields are parked in ``raw_candidates``.
:func:`clean_features` then resolves aliased sources by priority, normalizes
every categorical value through the feature dictionary, and reports unknown
categories. Cleaning is idempotent, so it can run defensively on any input.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

from .dictionary import FeatureDictionary
from .errors import OutOfRange, ParseError, SchemaMismatch
from .model import (
    MISSING,
    get_field,
    set_field,
    AccidentType,
    CrashRecord,
    EventInfo,
    GeneralInfo,
    InfrastructureInfo,
    Labels,
    RawField,
    Severity,
    UnitInfo,
    is_missing,
)

_UNIT_KINDS = ("vehicle", "pedestrian", "cyclist")
_FACTOR_SEPARATOR = ";"


@dataclass(frozen=True)
class SourceBundle:
    crash_table: str | Path
    road_table: str | Path
    unit_table: str | Path
    person_table: str | Path | None = None
    delimiter: str = ","


@dataclass(frozen=True)
class MalformedLine:
    line_no: int
    reason: str


@dataclass(frozen=True)
class ParsedTable:
    name: str
    header: tuple[str, ...]
    rows: tuple[dict, ...]
    malformed: tuple[MalformedLine, ...]


@dataclass
class IngestReport:
    rows_read: dict[str, int] = field(default_factory=dict)
    malformed: dict[str, int] = field(default_factory=dict)
    records_built: int = 0
    records_dropped: int = 0
    drop_reasons: Counter = field(default_factory=Counter)
    road_unmatched: int = 0

    def drop(self, reason: str) -> None:
        self.records_dropped += 1
        self.drop_reasons[reason] += 1

    def as_dict(self) -> dict:
        return {
            "rows_read": dict(self.rows_read),
            "malformed": dict(self.malformed),
            "records_built": self.records_built,
            "records_dropped": self.records_dropped,
            "drop_reasons": dict(self.drop_reasons),
            "road_unmatched": self.road_unmatched,
        }


def parse_table(
    path: str | Path,
    schema_name: str,
    dictionary: FeatureDictionary,
    delimiter: str = ",",
) -> ParsedTable:
    """Parse one delimiter-separated table against its declared schema.

    The header must contain every column the feature dictionary requires for
    ``schema_name`` (extras are allowed and carried through). Data lines whose
    field count disagrees with the header are collected as malformed rather
    than dropped silently.
    """
    required = dictionary.tables.get(schema_name)
    if required is None:
        raise SchemaMismatch("unknown table schema", schema=schema_name,
                             known=sorted(dictionary.tables))
    text_path = Path(path)
    try:
        handle = text_path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {text_path}: {exc.strerror}", line_no=0) from exc
    with handle:
        reader = csv.reader(handle, delimiter=delimiter)
        try:
            header_cells = next(reader, None)
        except csv.Error as exc:
            raise ParseError(f"unreadable header: {exc}", line_no=1) from exc
        if header_cells is None:
            raise SchemaMismatch("empty file has no header row", table=schema_name)
        header = tuple(cell.strip() for cell in header_cells)
        missing_cols = [col for col in required if col not in header]
        if missing_cols:
            raise SchemaMismatch(
                "header is missing required columns",
                table=schema_name, missing=missing_cols, header=list(header),
            )
        rows: list[dict] = []
        malformed: list[MalformedLine] = []
        while True:
            try:
                cells = next(reader, None)
            except csv.Error as exc:
                raise ParseError(f"unparseable line: {exc}", line_no=reader.line_num) from exc
            if cells is None:
                break
            if not cells:
                continue  # blank line
            if len(cells) != len(header):
                malformed.append(MalformedLine(
                    reader.line_num,
                    f"expected {len(header)} fields, found {len(cells)}",
                ))
                continue
            rows.append(dict(zip(header, cells)))
    return ParsedTable(schema_name, header, tuple(rows), tuple(malformed))


def _cell(row: dict, column: str, dictionary: FeatureDictionary):
    raw = row.get(column)
    if raw is None:
        return MISSING
    raw = raw.strip()
    if dictionary.is_missing_token(raw):
        return MISSING
    return raw


def _parse_severity(raw) -> Severity | None:
    if is_missing(raw):
        return None
    word = str(raw).strip()
    try:
        return Severity.from_code(word.upper())
    except OutOfRange:
        pass
    loose = word.casefold().replace("_", " ")
    for sev in Severity:
        if sev.label.casefold() == loose:
            return sev
    return None


def _parse_accident_type(raw) -> AccidentType | None:
    if is_missing(raw):
        return None
    word = str(raw).strip()
    if word.isdigit():
        try:
            return AccidentType.from_id(int(word))
        except OutOfRange:
            return None
    for at in AccidentType:
        if at.abbr.casefold() == word.casefold():
            return at
    loose = word.casefold().replace("_", " ")
    for at in AccidentType:
        if at.label.casefold() == loose:
            return at
    return None


def _parse_injuries(raw) -> int | None:
    if is_missing(raw):
        return None
    try:
        count = int(str(raw).strip())
    except ValueError:
        return None
    return count if count >= 0 else None


def _parse_number(raw):
    if is_missing(raw):
        return MISSING
    try:
        return float(str(raw).strip())
    except ValueError:
        return MISSING


def _parse_bool(raw, dictionary: FeatureDictionary, key: str):
    if is_missing(raw):
        return MISSING
    value, ok = dictionary.normalize_value(key, raw)
    if not ok or value is None:
        return MISSING
    return value


def _parse_datetime(date_raw, time_raw) -> datetime | object:
    if is_missing(date_raw):
        return MISSING
    clock = "00:00" if is_missing(time_raw) else str(time_raw).strip()
    for fmt in ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"):
        try:
            return datetime.strptime(f"{str(date_raw).strip()} {clock}", fmt)
        except ValueError:
            continue
    return MISSING


def join_records(
    bundle: SourceBundle,
    dictionary: FeatureDictionary,
) -> tuple[list[CrashRecord], IngestReport]:
    """Parse and join the source tables into one record per usable crash row.

    A crash row is dropped when any of its three labels is absent or
    unparseable (``missing_labels``) or when no unit row joins to it
    (``missing_join``). A crash row with no matching road segment is kept with
    the road-sourced fields Missing; those cases are tallied separately.
    """
    report = IngestReport()
    tables: dict[str, ParsedTable] = {}
    sources = [("crash", bundle.crash_table), ("road", bundle.road_table),
               ("unit", bundle.unit_table)]
    if bundle.person_table is not None:
        sources.append(("person", bundle.person_table))
    for name, path in sources:
        table = parse_table(path, name, dictionary, delimiter=bundle.delimiter)
        tables[name] = table
        report.rows_read[name] = len(table.rows)
        report.malformed[name] = len(table.malformed)

    units_by_case: dict[str, list[dict]] = {}
    for row in tables["unit"].rows:
        case = row.get("case_id", "").strip()
        if case:
            units_by_case.setdefault(case, []).append(row)
    for rows in units_by_case.values():
        rows.sort(key=lambda r: _parse_number(r.get("unit_no", "")) or 0.0)

    person_by_unit: dict[tuple[str, str], dict] = {}
    if "person" in tables:
        for row in tables["person"].rows:
            key = (row.get("case_id", "").strip(), row.get("unit_no", "").strip())
            person_by_unit[key] = row

    segments_by_route: dict[str, list[tuple[float, float, dict]]] = {}
    for row in tables["road"].rows:
        route = row.get("route_id", "").strip()
        begin = _parse_number(row.get("begin_mp"))
        end = _parse_number(row.get("end_mp"))
        if not route or begin is MISSING or end is MISSING:
            continue
        segments_by_route.setdefault(route, []).append((begin, end, row))
    for spans in segments_by_route.values():
        spans.sort(key=lambda s: (s[0], s[1]))

    records: list[CrashRecord] = []
    for row in tables["crash"].rows:
        case_id = row.get("case_id", "").strip()
        if not case_id:
            report.drop("missing_join")
            continue
        severity = _parse_severity(_cell(row, "severity", dictionary))
        accident_type = _parse_accident_type(_cell(row, "accident_type", dictionary))
        injuries = _parse_injuries(_cell(row, "injuries", dictionary))
        if severity is None or accident_type is None or injuries is None:
            report.drop("missing_labels")
            continue
        unit_rows = units_by_case.get(case_id, [])
        if not unit_rows:
            report.drop("missing_join")
            continue

        milepost = _parse_number(_cell(row, "milepost", dictionary))
        route_id = _cell(row, "route_id", dictionary)
        road_row: dict | None = None
        if route_id is not MISSING and milepost is not MISSING:
            # half-open [begin, end) so segment boundaries match exactly once
            for begin, end, seg in segments_by_route.get(route_id, []):
                if begin <= milepost < end:
                    road_row = seg
                    break
        if road_row is None:
            report.road_unmatched += 1

        candidates: list[RawField] = []
        for key, sources_list in dictionary.column_aliases.items():
            if len(sources_list) < 2:
                continue
            for source in sources_list:
                table_name, column = source.split(".", 1)
                if table_name == "crash":
                    value = _cell(row, column, dictionary)
                elif table_name == "road" and road_row is not None:
                    value = _cell(road_row, column, dictionary)
                else:
                    value = MISSING
                if value is not MISSING:
                    candidates.append(RawField(key=key, source=source, value=value))

        facts = []
        for fact_key in ("weather", "traffic_control"):
            column = dictionary.column_aliases[fact_key][0].split(".", 1)[1]
            value = _cell(row, column, dictionary)
            if value is not MISSING:
                facts.append((fact_key, value))

        raw_factors = _cell(row, "contributing_factors", dictionary)
        if raw_factors is MISSING:
            factors: tuple = ()
        else:
            factors = tuple(
                part.strip() for part in str(raw_factors).split(_FACTOR_SEPARATOR)
                if part.strip() and not dictionary.is_missing_token(part)
            )

        units = []
        for unit_row in unit_rows:
            person = person_by_unit.get((case_id, unit_row.get("unit_no", "").strip()), {})
            units.append(UnitInfo(
                unit_kind=_cell(unit_row, "unit_kind", dictionary),
                vehicle_type=_cell(unit_row, "vehicle_type", dictionary),
                driver_age=_parse_number(_cell(person, "driver_age", dictionary)),
                driver_gender=_cell(person, "driver_gender", dictionary),
                action=_cell(unit_row, "action", dictionary),
            ))

        record = CrashRecord(
            case_id=case_id,
            general=GeneralInfo(
                crash_datetime=_parse_datetime(
                    _cell(row, "crash_date", dictionary), _cell(row, "crash_time", dictionary)),
                city=_cell(row, "city", dictionary),
                route_id=route_id,
                milepost=milepost,
                road_type=MISSING,  # multi-source; resolved by clean_features
                state_plane_easting=_parse_number(_cell(row, "easting", dictionary)),
                state_plane_northing=_parse_number(_cell(row, "northing", dictionary)),
            ),
            infrastructure=InfrastructureInfo(
                lane_count=MISSING if road_row is None
                else _parse_number(_cell(road_row, "lane_count", dictionary)),
                speed_limit=MISSING if road_row is None
                else _parse_number(_cell(road_row, "speed_limit", dictionary)),
                work_zone=_parse_bool(_cell(row, "work_zone", dictionary), dictionary, "work_zone"),
                lighting=_cell(row, "lighting", dictionary),
                road_surface=_cell(row, "surface_condition", dictionary),
                intersection_related=_parse_bool(
                    _cell(row, "intersection", dictionary), dictionary, "intersection_related"),
            ),
            event=EventInfo(
                alcohol_involved=_parse_bool(
                    _cell(row, "alcohol", dictionary), dictionary, "alcohol_involved"),
                drug_involved=_parse_bool(
                    _cell(row, "drugs", dictionary), dictionary, "drug_involved"),
                narrative_facts=tuple(facts),
                contributing_factors=factors,
            ),
            units=tuple(units),
            labels=Labels(injured_count=injuries, severity=severity, accident_type=accident_type),
            raw_candidates=tuple(candidates),
        )
        records.append(record)
        report.records_built += 1
    return records, report


# cleaning --------------------------------------------------------------------

@dataclass(frozen=True)
class Conflict:
    case_id: str
    key: str
    kept: str
    discarded: tuple[str, ...]


@dataclass(frozen=True)
class UnknownValue:
    case_id: str
    key: str
    value: str


@dataclass
class CleanReport:
    conflicts: list[Conflict] = field(default_factory=list)
    unknown_values: list[UnknownValue] = field(default_factory=list)
    changed_records: int = 0

    def as_dict(self) -> dict:
        return {
            "conflicts": [
                {"case_id": c.case_id, "key": c.key, "kept": c.kept,
                 "discarded": list(c.discarded)}
                for c in self.conflicts
            ],
            "unknown_values": [
                {"case_id": u.case_id, "key": u.key, "value": u.value}
                for u in self.unknown_values
            ],
            "changed_records": self.changed_records,
        }


def _resolve_candidates(
    record: CrashRecord,
    dictionary: FeatureDictionary,
    report: CleanReport,
) -> CrashRecord:
    if not record.raw_candidates:
        return record
    by_key: dict[str, list[RawField]] = {}
    for cand in record.raw_candidates:
        by_key.setdefault(cand.key, []).append(cand)
    updated = record
    for key, cands in by_key.items():
        order = {source: i for i, source in enumerate(dictionary.column_aliases.get(key, []))}
        cands.sort(key=lambda c: order.get(c.source, len(order)))
        normalized: list[tuple[RawField, object]] = []
        for cand in cands:
            value, ok = dictionary.normalize_value(key, cand.value)
            if not ok:
                report.unknown_values.append(UnknownValue(record.case_id, key, str(cand.value)))
                continue
            if value is not None:
                normalized.append((cand, value))
        if not normalized:
            continue
        kept_cand, kept_value = normalized[0]
        others = sorted({str(v) for _, v in normalized[1:] if v != kept_value})
        if others:
            report.conflicts.append(
                Conflict(record.case_id, key, str(kept_value), tuple(others)))
        updated = _set_by_key(updated, key, kept_value)
    return replace(updated, raw_candidates=())


def _set_by_key(record: CrashRecord, key: str, value) -> CrashRecord:
    return set_field(record, key, value)


def _normalize_field(record, key, value, dictionary, report):
    """Return (new_value, changed). Unknown categories become Missing."""
    if is_missing(value):
        return value, False
    spec = dictionary.field_spec(key)
    if spec.multi:
        members = []
        changed = False
        for member in value:
            norm, ok = dictionary.normalize_value(key, member)
            if not ok:
                report.unknown_values.append(UnknownValue(record.case_id, key, str(member)))
                changed = True
                continue
            if norm is None:
                changed = True
                continue
            if norm not in members:
                members.append(norm)
            if norm != member:
                changed = True
        return tuple(members), changed or len(members) != len(value)
    norm, ok = dictionary.normalize_value(key, value)
    if not ok:
        report.unknown_values.append(UnknownValue(record.case_id, key, str(value)))
        return MISSING, True
    if norm is None:
        return MISSING, not is_missing(value)
    return norm, norm != value


def _clean_units(record: CrashRecord, dictionary: FeatureDictionary,
                 report: CleanReport) -> tuple[tuple[UnitInfo, ...], bool]:
    unit_keys = ("vehicle_type", "driver_age", "driver_gender", "action")
    cleaned = []
    changed = False
    for unit in record.units:
        updates = {}
        if not is_missing(unit.unit_kind):
            loose = str(unit.unit_kind).strip().casefold()
            if loose in _UNIT_KINDS:
                if loose != unit.unit_kind:
                    updates["unit_kind"] = loose
            else:
                report.unknown_values.append(
                    UnknownValue(record.case_id, "unit_kind", str(unit.unit_kind)))
                updates["unit_kind"] = MISSING
        for key in unit_keys:
            value = getattr(unit, key)
            new_value, field_changed = _normalize_field(record, key, value, dictionary, report)
            if field_changed:
                updates[key] = new_value
        if updates:
            changed = True
            cleaned.append(replace(unit, **updates))
        else:
            cleaned.append(unit)
    return tuple(cleaned), changed


def clean_features(
    records: list[CrashRecord],
    dictionary: FeatureDictionary,
) -> tuple[list[CrashRecord], CleanReport]:
    """Resolve multi-source fields and normalize every categorical value.

    Idempotent: cleaning already-clean records returns them unchanged and
    reports nothing.
    """
    report = CleanReport()
    out: list[CrashRecord] = []
    record_keys = [
        spec.key for spec in dictionary.fields
        if not spec.derived and spec.group != "unit" and spec.kind in ("categorical", "text")
    ]
    for record in records:
        original = record
        record = _resolve_candidates(record, dictionary, report)
        for key in record_keys:
            value = get_field(record, key)
            new_value, changed = _normalize_field(record, key, value, dictionary, report)
            if changed:
                record = _set_by_key(record, key, new_value)
        units, units_changed = _clean_units(record, dictionary, report)
        if units_changed:
            record = replace(record, units=units)
        if record != original:
            report.changed_records += 1
        out.append(record)
    return out, report


def completeness_filter(
    records: list[CrashRecord],
    dictionary: FeatureDictionary,
    min_fraction: float = 0.6,
) -> tuple[list[CrashRecord], list[CrashRecord]]:
    """Split records into (kept, dropped) by fraction of non-Missing fields.

    The fraction is computed over the dictionary's non-derived fields; records
    exactly at the threshold are kept.
    """
    if not 0.0 <= min_fraction <= 1.0:
        raise OutOfRange("min_fraction must be within [0, 1]", given=min_fraction)
    keys = [spec.key for spec in dictionary.completeness_fields()]
    kept, dropped = [], []
    for record in records:
        present = sum(1 for key in keys if not is_missing(get_field(record, key)))
        fraction = present / len(keys) if keys else 1.0
        (kept if fraction >= min_fraction else dropped).append(record)
    return kept, dropped
