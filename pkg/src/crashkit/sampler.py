"""Dataset partitioning, class-balanced resampling, and synthetic corpora.

The synthetic generator exists so the whole pipeline can be exercised and
benchmarked without any real crash data. It plants configurable conditional
effects (for example: icy surface multiplies the overturn probability) so
that downstream what-if analyses have a known ground truth to recover.

All randomness flows from one seed through a counter-based generator
(Philox); record i draws from stream i, so corpora are reproducible and
insensitive to generation order.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import EmptyBucket, LengthMismatch, OutOfRange
from .model import (
    MISSING,
    AccidentType,
    CrashRecord,
    EventInfo,
    GeneralInfo,
    InfrastructureInfo,
    Labels,
    Severity,
    Task,
    UnitInfo,
    is_missing,
    task_class,
)
from . import geo

DEFAULT_SEED = 20220101
DEFAULT_TEST_MONTHS = (1, 6, 12)


# ---------------------------------------------------------------------------
# Splitting and resampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitResult:
    train: tuple[str, ...]
    test: tuple[str, ...]
    unassigned: tuple[str, ...]

    def as_dict(self) -> dict:
        return {"train": list(self.train), "test": list(self.test),
                "unassigned": list(self.unassigned)}


def split_by_month(records: list[CrashRecord], test_months=DEFAULT_TEST_MONTHS) -> SplitResult:
    """Partition records by crash month; undated records land in unassigned.

    The three lists preserve input order and together cover every record
    exactly once. Counts are reported as-is; nothing is silently dropped.
    """
    months = set(test_months)
    if not months or not all(isinstance(m, int) and 1 <= m <= 12 for m in months):
        raise OutOfRange(f"test months must be integers in 1..12, got {test_months!r}")
    seen = set()
    train, test, unassigned = [], [], []
    for record in records:
        if record.case_id in seen:
            raise LengthMismatch(f"duplicate case_id {record.case_id!r}")
        seen.add(record.case_id)
        when = record.general.crash_datetime
        if is_missing(when):
            unassigned.append(record.case_id)
        elif when.month in months:
            test.append(record.case_id)
        else:
            train.append(record.case_id)
    return SplitResult(train=tuple(train), test=tuple(test), unassigned=tuple(unassigned))


def resample_uniform(records: list[CrashRecord], task: Task, seed: int = DEFAULT_SEED) -> tuple[str, ...]:
    """Downsample to a class-uniform subset for the given task.

    Every class present keeps min-class-count randomly chosen members
    (without replacement); every class must be non-empty. The returned ids
    preserve the input record order.
    """
    buckets: dict[str, list[str]] = {name: [] for name in task.class_names}
    for record in records:
        buckets[task_class(task, record.labels)].append(record.case_id)
    empty = [name for name, ids in buckets.items() if not ids]
    if empty:
        raise EmptyBucket(
            f"cannot build a uniform {task.value} subset: empty classes {empty}")
    floor = min(len(ids) for ids in buckets.values())
    gen = np.random.Generator(np.random.Philox(seed))
    chosen: set[str] = set()
    for name in task.class_names:
        ids = buckets[name]
        picks = gen.choice(len(ids), size=floor, replace=False)
        chosen.update(ids[i] for i in picks)
    return tuple(r.case_id for r in records if r.case_id in chosen)


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Effect:
    """One planted conditional effect.

    When `factor` holds on a draft record, the probability of `target` under
    `task` is multiplied by `multiplier` exactly; the remaining classes are
    scaled down proportionally. Expressed as a probability ratio, the planted
    effect therefore equals the multiplier in expectation.
    """

    factor: str  # alcohol | icy_road | work_zone
    task: str    # accident_type | severity
    target: str  # class name under the task (type abbr or severity code)
    multiplier: float


DEFAULT_EFFECTS = (
    Effect("icy_road", "accident_type", "OT", 3.0),
    Effect("work_zone", "accident_type", "REC", 1.5),
    Effect("alcohol", "accident_type", "HOC", 2.0),
    Effect("alcohol", "severity", "K", 3.0),
    Effect("work_zone", "severity", "A", 1.5),
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_records: int
    seed: int = DEFAULT_SEED
    year: int = 2022
    effects: tuple[Effect, ...] = DEFAULT_EFFECTS
    # Base transition rates the effects multiply; overridable for stress tests.
    base_accident_type: dict[str, float] = dc_field(default_factory=lambda: dict(_BASE_TYPE))
    base_severity: dict[str, float] = dc_field(default_factory=lambda: dict(_BASE_SEVERITY))
    missing_rate_scale: float = 1.0
    alcohol_rate_night: float = 0.13
    alcohol_rate_day: float = 0.04
    work_zone_rate: float = 0.06
    icy_rate_boost: float = 1.0


_BASE_TYPE = {
    "SVO": 0.13, "AIR": 0.06, "Oth": 0.05, "SL": 0.05, "FEC": 0.04,
    "REC": 0.20, "OT": 0.07, "AC": 0.06, "PC": 0.04, "SR": 0.05,
    "PCC": 0.03, "HOC": 0.04, "OR": 0.14, "AIL": 0.04,
}

_BASE_SEVERITY = {"O": 0.35, "C": 0.25, "B": 0.22, "A": 0.12, "K": 0.06}

_CITIES = ("seattle", "spokane", "tacoma", "vancouver", "bellevue", "everett",
           "kent", "renton", "yakima", "spokane_valley", "federal_way",
           "bellingham", "kennewick", "auburn", "pasco", "marysville",
           "redmond", "sammamish", "lakewood", "richland")
_CITY_W = np.array([14, 9, 9, 8, 6, 5, 5, 5, 4, 4, 4, 4, 4, 4, 3, 3, 3, 2, 2, 2], float)

_ROUTES = (("I-5", 276.6), ("I-90", 297.5), ("I-82", 132.6), ("US-2", 326.8),
           ("US-97", 321.8), ("US-101", 366.5), ("SR-8", 20.7), ("SR-14", 180.7),
           ("SR-20", 436.9), ("SR-167", 27.2), ("SR-410", 116.0), ("SR-512", 12.1),
           ("SR-520", 12.8), ("SR-522", 24.7))

_HOUR_W = np.array([2.5, 1.8, 1.5, 1.2, 1.5, 2.5, 4.5, 6.5, 7.5, 6.0, 5.5, 5.5,
                    6.5, 6.5, 7.0, 8.0, 9.0, 9.5, 8.0, 6.0, 4.5, 3.5, 3.0, 2.8])

_ROAD_TYPE_BY_PREFIX = {
    "I": (("interstate", 0.9), ("ramp", 0.1)),
    "US": (("urban_highway", 0.45), ("rural_highway", 0.5), ("ramp", 0.05)),
    "SR": (("urban_highway", 0.3), ("rural_highway", 0.35), ("city_street", 0.25),
           ("county_road", 0.07), ("ramp", 0.03)),
}

_LANES = {
    "interstate": ((2, 3, 4, 5), (0.3, 0.4, 0.2, 0.1)),
    "urban_highway": ((2, 3, 4), (0.45, 0.4, 0.15)),
    "rural_highway": ((1, 2, 3), (0.35, 0.5, 0.15)),
    "city_street": ((1, 2, 3), (0.3, 0.55, 0.15)),
    "county_road": ((1, 2), (0.55, 0.45)),
    "ramp": ((1, 2), (0.8, 0.2)),
}

_SPEEDS = {
    "interstate": ((60, 65, 70), (0.3, 0.4, 0.3)),
    "urban_highway": ((45, 50, 55, 60), (0.3, 0.3, 0.25, 0.15)),
    "rural_highway": ((50, 55, 60), (0.35, 0.4, 0.25)),
    "city_street": ((25, 30, 35, 40), (0.3, 0.35, 0.25, 0.1)),
    "county_road": ((35, 45, 50), (0.4, 0.35, 0.25)),
    "ramp": ((25, 35, 45), (0.4, 0.4, 0.2)),
}

# Road surface by season: winter / shoulder / summer.
_SURFACE_SEASON = {
    "winter": (("dry", 0.45), ("wet", 0.25), ("icy", 0.17), ("snow", 0.10), ("other", 0.03)),
    "shoulder": (("dry", 0.55), ("wet", 0.33), ("icy", 0.04), ("snow", 0.03), ("other", 0.05)),
    "summer": (("dry", 0.82), ("wet", 0.14), ("icy", 0.005), ("snow", 0.005), ("other", 0.04)),
}

_WEATHER_BY_SURFACE = {
    "dry": (("clear", 0.70), ("overcast", 0.25), ("fog", 0.03), ("severe_crosswind", 0.02)),
    "wet": (("raining", 0.75), ("overcast", 0.20), ("fog", 0.05)),
    "icy": (("clear", 0.35), ("snowing", 0.25), ("overcast", 0.20), ("fog", 0.20)),
    "snow": (("snowing", 0.80), ("overcast", 0.15), ("clear", 0.05)),
    "other": (("overcast", 0.50), ("clear", 0.30), ("fog", 0.10), ("severe_crosswind", 0.10)),
}

_VEHICLES = (("passenger_car", 0.55), ("pickup_truck", 0.15), ("suv", 0.15),
             ("van", 0.05), ("motorcycle", 0.04), ("semi_truck", 0.04), ("bus", 0.02))

_ACTIONS = (("going_straight", 0.50), ("turning_left", 0.12), ("turning_right", 0.08),
            ("changing_lanes", 0.08), ("slowing_or_stopped", 0.12), ("backing", 0.03),
            ("overtaking", 0.04), ("parked", 0.03))

_FACTOR_POOL = (("inattention", 0.30), ("speeding", 0.25), ("following_too_closely", 0.15),
                ("failure_to_yield", 0.12), ("improper_turn", 0.08), ("fatigue", 0.05),
                ("defective_equipment", 0.05))

# Per-field base rates of unrecorded values, scaled by missing_rate_scale.
_MISSING_RATES = {
    "city": 0.01, "milepost": 0.02, "lane_count": 0.03, "speed_limit": 0.03,
    "work_zone": 0.02, "lighting": 0.03, "road_surface": 0.02,
    "intersection_related": 0.03, "weather": 0.03, "traffic_control": 0.05,
    "contributing_factors": 0.04, "vehicle_type": 0.02, "driver_age": 0.04,
    "driver_gender": 0.03, "action": 0.05, "drug_involved": 0.05,
}

_DAYS_IN_MONTH = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)

# Geographic box that stays well inside the projection zone.
_LAT_RANGE = (45.7, 47.3)
_LON_RANGE = (-123.3, -117.3)

_TWO_UNIT_TYPES = frozenset({"AIR", "SL", "FEC", "REC", "SR", "HOC", "AIL"})


def _pick(gen, pairs):
    names = [p[0] for p in pairs]
    weights = np.array([p[1] for p in pairs], float)
    return names[int(gen.choice(len(names), p=weights / weights.sum()))]


def _season(month: int) -> str:
    if month in (12, 1, 2):
        return "winter"
    if month in (6, 7, 8, 9):
        return "summer"
    return "shoulder"


def _apply_effects(base: dict[str, float], active: list[Effect]) -> dict[str, float]:
    """Scale target-class probabilities by exact ratios, renormalizing the rest.

    Targets get p * multiplier (multipliers stack multiplicatively if several
    effects hit one class); the non-target classes share the leftover mass
    proportionally. Raises if the boosted targets exceed the whole simplex.
    """
    if not active:
        return base
    mult: dict[str, float] = {}
    for eff in active:
        mult[eff.target] = mult.get(eff.target, 1.0) * eff.multiplier
    boosted = {cls: base[cls] * m for cls, m in mult.items()}
    boosted_sum = sum(boosted.values())
    if boosted_sum >= 1.0:
        raise OutOfRange(
            f"planted effects push target mass to {boosted_sum:.3f} >= 1; "
            "lower the multipliers or base rates")
    rest = {cls: p for cls, p in base.items() if cls not in boosted}
    rest_base = sum(rest.values())
    scale = (1.0 - boosted_sum) / rest_base
    out = {cls: p * scale for cls, p in rest.items()}
    out.update(boosted)
    return out


def _draw_class(gen, dist: dict[str, float], order: tuple[str, ...]) -> str:
    probs = np.array([dist[c] for c in order], float)
    return order[int(gen.choice(len(order), p=probs / probs.sum()))]


_INJURY_BY_SEVERITY = {
    "O": ((0, 1, 2), (0.85, 0.12, 0.03)),
    "C": ((0, 1, 2, 3), (0.30, 0.50, 0.15, 0.05)),
    "B": ((0, 1, 2, 3, 4), (0.20, 0.50, 0.20, 0.07, 0.03)),
    "A": ((0, 1, 2, 3, 4, 5), (0.05, 0.40, 0.30, 0.15, 0.07, 0.03)),
    "K": ((1, 2, 3, 4, 5, 6), (0.35, 0.30, 0.18, 0.10, 0.05, 0.02)),
}


def generate_synthetic(spec: SyntheticSpec) -> list[CrashRecord]:
    """Generate a deterministic synthetic corpus under the given spec."""
    if spec.n_records < 0:
        raise OutOfRange(f"n_records must be >= 0, got {spec.n_records}")
    records = []
    type_order = tuple(t.abbr for t in AccidentType)
    sev_order = tuple(s.code for s in Severity)
    root = np.random.Philox(spec.seed)
    for i in range(spec.n_records):
        gen = np.random.Generator(root.jumped(i))
        records.append(_one_record(gen, spec, i, type_order, sev_order))
    return records


def _maybe_missing(gen, spec: SyntheticSpec, key: str, value):
    rate = _MISSING_RATES.get(key, 0.0) * spec.missing_rate_scale
    if rate > 0 and gen.random() < rate:
        return MISSING
    return value


def _one_record(gen, spec: SyntheticSpec, index: int,
                type_order: tuple[str, ...], sev_order: tuple[str, ...]) -> CrashRecord:
    # When
    month = int(gen.choice(12, p=np.array(_DAYS_IN_MONTH, float) / sum(_DAYS_IN_MONTH))) + 1
    day = int(gen.integers(1, _DAYS_IN_MONTH[month - 1] + 1))
    hour = int(gen.choice(24, p=_HOUR_W / _HOUR_W.sum()))
    minute = int(gen.integers(0, 60))
    when = dt.datetime(spec.year, month, day, hour, minute, 0)

    # Where
    city = _CITIES[int(gen.choice(len(_CITIES), p=_CITY_W / _CITY_W.sum()))]
    route_id, route_len = _ROUTES[int(gen.integers(0, len(_ROUTES)))]
    milepost = round(float(gen.uniform(0.0, route_len)), 2)
    prefix = route_id.split("-")[0]
    road_type = _pick(gen, _ROAD_TYPE_BY_PREFIX[prefix])
    lat = float(gen.uniform(*_LAT_RANGE))
    lon = float(gen.uniform(*_LON_RANGE))
    easting, northing = geo.lcc_forward(lat, lon)
    easting, northing = round(easting, 1), round(northing, 1)

    # Infrastructure
    lanes, lane_w = _LANES[road_type]
    lane_count = float(lanes[int(gen.choice(len(lanes), p=np.array(lane_w) / sum(lane_w)))])
    speeds, speed_w = _SPEEDS[road_type]
    speed_limit = float(speeds[int(gen.choice(len(speeds), p=np.array(speed_w) / sum(speed_w)))])
    work_zone = bool(gen.random() < spec.work_zone_rate)
    if 6 <= hour <= 17:
        lighting = "daylight" if not (hour in (6, 7) and gen.random() < 0.5) else "dawn"
    elif hour in (18, 19) and gen.random() < 0.6:
        lighting = "dusk"
    else:
        lit = 0.75 if road_type in ("city_street", "urban_highway") else 0.35
        lighting = "dark_street_lights_on" if gen.random() < lit else "dark_no_street_lights"
    surface_pairs = list(_SURFACE_SEASON[_season(month)])
    if spec.icy_rate_boost != 1.0:
        surface_pairs = [(name, w * spec.icy_rate_boost if name == "icy" else w)
                         for name, w in surface_pairs]
    road_surface = _pick(gen, surface_pairs)
    intersection = {"city_street": 0.45, "urban_highway": 0.30, "interstate": 0.02}.get(road_type, 0.08)
    intersection_related = bool(gen.random() < intersection)

    # Event
    weather = _pick(gen, _WEATHER_BY_SURFACE[road_surface])
    if intersection_related:
        traffic_control = _pick(gen, (("signal", 0.5), ("stop_sign", 0.3), ("yield_sign", 0.1),
                                      ("none", 0.08), ("flagger", 0.02)))
    else:
        traffic_control = _pick(gen, (("none", 0.9), ("signal", 0.04), ("stop_sign", 0.03),
                                      ("yield_sign", 0.02), ("flagger", 0.01)))
    night = hour >= 21 or hour <= 4
    alcohol = bool(gen.random() < (spec.alcohol_rate_night if night else spec.alcohol_rate_day))
    drugs = bool(gen.random() < 0.03)
    n_factors = int(gen.choice(3, p=np.array([0.35, 0.45, 0.20])))
    pool_names = [p[0] for p in _FACTOR_POOL]
    pool_w = np.array([p[1] for p in _FACTOR_POOL], float)
    picks = gen.choice(len(pool_names), size=n_factors, replace=False, p=pool_w / pool_w.sum())
    factors = sorted(pool_names[i] for i in picks)
    if alcohol and "impairment" not in factors:
        factors = sorted(factors + ["impairment"])

    # Labels with planted effects
    active_flags = {
        "alcohol": alcohol,
        "icy_road": road_surface == "icy",
        "work_zone": work_zone,
    }
    type_effects = [e for e in spec.effects
                    if e.task == "accident_type" and active_flags.get(e.factor, False)]
    sev_effects = [e for e in spec.effects
                   if e.task == "severity" and active_flags.get(e.factor, False)]
    type_dist = _apply_effects(spec.base_accident_type, type_effects)
    sev_dist = _apply_effects(spec.base_severity, sev_effects)
    type_abbr = _draw_class(gen, type_dist, type_order)
    sev_code = _draw_class(gen, sev_dist, sev_order)
    counts, count_w = _INJURY_BY_SEVERITY[sev_code]
    injured = int(counts[int(gen.choice(len(counts), p=np.array(count_w) / sum(count_w)))])

    labels = Labels(
        injured_count=injured,
        severity=Severity.from_code(sev_code),
        accident_type=AccidentType.from_abbr(type_abbr),
    )

    units = _draw_units(gen, spec, type_abbr)

    general = GeneralInfo(
        crash_datetime=when,
        city=_maybe_missing(gen, spec, "city", city),
        route_id=route_id,
        milepost=_maybe_missing(gen, spec, "milepost", milepost),
        road_type=road_type,
        state_plane_easting=easting,
        state_plane_northing=northing,
    )
    infrastructure = InfrastructureInfo(
        lane_count=_maybe_missing(gen, spec, "lane_count", lane_count),
        speed_limit=_maybe_missing(gen, spec, "speed_limit", speed_limit),
        work_zone=_maybe_missing(gen, spec, "work_zone", work_zone),
        lighting=_maybe_missing(gen, spec, "lighting", lighting),
        road_surface=_maybe_missing(gen, spec, "road_surface", road_surface),
        intersection_related=_maybe_missing(gen, spec, "intersection_related", intersection_related),
    )
    event = EventInfo(
        alcohol_involved=alcohol,
        drug_involved=_maybe_missing(gen, spec, "drug_involved", drugs),
        narrative_facts=(
            ("weather", _maybe_missing(gen, spec, "weather", weather)),
            ("traffic_control", _maybe_missing(gen, spec, "traffic_control", traffic_control)),
        ),
        contributing_factors=_maybe_missing(gen, spec, "contributing_factors", tuple(factors)),
    )
    return CrashRecord(
        case_id=f"SYN{index + 1:06d}",
        general=general,
        infrastructure=infrastructure,
        event=event,
        units=units,
        labels=labels,
    )


def _draw_vehicle(gen, spec: SyntheticSpec) -> UnitInfo:
    age = int(np.clip(round(float(gen.normal(38.0, 16.0))), 16, 90))
    return UnitInfo(
        unit_kind="vehicle",
        vehicle_type=_maybe_missing(gen, spec, "vehicle_type", _pick(gen, _VEHICLES)),
        driver_age=_maybe_missing(gen, spec, "driver_age", float(age)),
        driver_gender=_maybe_missing(
            gen, spec, "driver_gender",
            _pick(gen, (("male", 0.54), ("female", 0.44), ("not_stated", 0.02)))),
        action=_maybe_missing(gen, spec, "action", _pick(gen, _ACTIONS)),
    )


def _draw_units(gen, spec: SyntheticSpec, type_abbr: str) -> tuple[UnitInfo, ...]:
    units = [_draw_vehicle(gen, spec)]
    if type_abbr == "PC":
        units.append(UnitInfo(unit_kind="pedestrian"))
    elif type_abbr == "PCC":
        units.append(UnitInfo(unit_kind="cyclist"))
    elif type_abbr in _TWO_UNIT_TYPES:
        extra = 1 if gen.random() < 0.85 else 2
        for _ in range(extra):
            units.append(_draw_vehicle(gen, spec))
        if type_abbr == "REC" and gen.random() < 0.7:
            # Struck unit in a rear-end crash is usually slowing or stopped.
            units[-1] = UnitInfo(
                unit_kind="vehicle",
                vehicle_type=units[-1].vehicle_type,
                driver_age=units[-1].driver_age,
                driver_gender=units[-1].driver_gender,
                action="slowing_or_stopped",
            )
    elif type_abbr == "Oth" and gen.random() < 0.5:
        units.append(_draw_vehicle(gen, spec))
    return tuple(units)
