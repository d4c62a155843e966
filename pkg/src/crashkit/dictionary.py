"""Feature dictionary loading and value normalization.

The dictionary is a plain-text YAML config declaring every record field the
toolkit knows about: its kind (categorical / numeric / boolean / text), its
closed vocabulary when categorical, which source columns feed it, and how raw
spellings map onto canonical category values. A default copy ships with the
package; callers may point any stage at their own file.
"""

from __future__ import annotations

import importlib.resources
import re
from dataclasses import dataclass, field

import yaml

from .errors import DictionaryError

KINDS = ("categorical", "numeric", "boolean", "text")
GROUPS = ("general", "infrastructure", "event", "unit")

_TRUE_WORDS = frozenset({"y", "yes", "true", "t", "1"})
_FALSE_WORDS = frozenset({"n", "no", "false", "f", "0"})


@dataclass(frozen=True)
class FieldSpec:
    """One dictionary entry."""

    key: str
    kind: str
    group: str
    values: tuple[str, ...] = ()
    multi: bool = False
    derived: bool = False


@dataclass(frozen=True)
class FeatureDictionary:
    version: int
    fields: tuple[FieldSpec, ...]
    tables: dict[str, tuple[str, ...]]
    column_aliases: dict[str, tuple[str, ...]]
    value_aliases: dict[str, dict[str, str]]
    missing_tokens: frozenset[str]
    whatif_dependents: dict[str, tuple[tuple[str, str], ...]]
    _by_key: dict[str, FieldSpec] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_key", {f.key: f for f in self.fields})

    def field_spec(self, key: str) -> FieldSpec:
        try:
            return self._by_key[key]
        except KeyError:
            raise DictionaryError(f"unknown feature key {key!r}") from None

    def has_key(self, key: str) -> bool:
        return key in self._by_key

    def feature_fields(self) -> tuple[FieldSpec, ...]:
        """Fields that enter the numeric encoding (text kind is excluded)."""
        return tuple(f for f in self.fields if f.kind != "text")

    def completeness_fields(self) -> tuple[FieldSpec, ...]:
        """Fields counted toward record completeness (derived ones mirror
        their base fields, so they are excluded to avoid double counting)."""
        return tuple(f for f in self.fields if not f.derived)

    def is_missing_token(self, raw: str) -> bool:
        return raw.strip().casefold() in self.missing_tokens

    def normalize_value(self, key: str, raw):
        """Normalize one raw source value for a field.

        Returns (value, ok). value is the canonical category, float, bool, or
        trimmed text; ok is False when the raw text maps to no known category
        (the caller treats the value as missing and reports it).
        """
        spec = self.field_spec(key)
        if isinstance(raw, str) and self.is_missing_token(raw):
            return None, True
        if spec.kind == "text":
            # already-typed values (parsed datetimes) pass through untouched
            return (raw.strip(), True) if isinstance(raw, str) else (raw, True)
        if spec.kind == "numeric":
            try:
                return float(raw), True
            except (TypeError, ValueError):
                return None, False
        if spec.kind == "boolean":
            if isinstance(raw, bool):
                return raw, True
            word = str(raw).strip().casefold()
            if word in _TRUE_WORDS:
                return True, True
            if word in _FALSE_WORDS:
                return False, True
            return None, False
        # categorical
        loose = _loose_form(str(raw))
        aliased = self.value_aliases.get(key, {}).get(loose, loose.replace(" ", "_"))
        if aliased in spec.values:
            return aliased, True
        return None, False


def _loose_form(raw: str) -> str:
    """Case-fold, trim, and collapse separator runs to single spaces."""
    return re.sub(r"[\s/_-]+", " ", raw.strip().casefold()).strip()


def default_dictionary_path() -> str:
    return str(importlib.resources.files("crashkit.data") / "feature_dictionary.yaml")


def load_dictionary(path: str | None = None) -> FeatureDictionary:
    """Load and validate a feature dictionary file."""
    path = path or default_dictionary_path()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise DictionaryError(f"cannot read feature dictionary: {exc}") from exc
    except yaml.YAMLError as exc:
        raise DictionaryError(f"feature dictionary is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise DictionaryError("feature dictionary must be a mapping at top level")

    fields = []
    seen = set()
    for entry in doc.get("fields", []):
        key = entry.get("key")
        kind = entry.get("kind")
        group = entry.get("group")
        if not key or key in seen:
            raise DictionaryError(f"duplicate or empty field key {key!r}")
        seen.add(key)
        if kind not in KINDS:
            raise DictionaryError(f"field {key!r} has unknown kind {kind!r}")
        if group not in GROUPS:
            raise DictionaryError(f"field {key!r} has unknown group {group!r}")
        values = tuple(entry.get("values", ()) or ())
        if kind == "categorical" and not values:
            raise DictionaryError(f"categorical field {key!r} declares no values")
        if kind != "categorical" and values:
            raise DictionaryError(f"non-categorical field {key!r} must not declare values")
        if len(set(values)) != len(values):
            raise DictionaryError(f"field {key!r} lists duplicate values")
        fields.append(FieldSpec(
            key=key, kind=kind, group=group, values=values,
            multi=bool(entry.get("multi", False)),
            derived=bool(entry.get("derived", False)),
        ))
    if not fields:
        raise DictionaryError("feature dictionary declares no fields")

    by_key = {f.key: f for f in fields}

    tables = {}
    for name, cols in (doc.get("tables") or {}).items():
        tables[name] = tuple(cols)

    column_aliases = {}
    for key, sources in (doc.get("column_aliases") or {}).items():
        if key not in by_key:
            raise DictionaryError(f"column alias for unknown field {key!r}")
        srcs = tuple(sources)
        for src in srcs:
            table, _, col = src.partition(".")
            if table not in tables or col not in tables[table]:
                raise DictionaryError(f"alias source {src!r} is not a declared table column")
        column_aliases[key] = srcs

    value_aliases = {}
    for key, amap in (doc.get("value_aliases") or {}).items():
        if key not in by_key:
            raise DictionaryError(f"value aliases for unknown field {key!r}")
        spec = by_key[key]
        canon = {}
        for raw, target in amap.items():
            if target not in spec.values:
                raise DictionaryError(
                    f"alias target {target!r} is not a declared value of {key!r}")
            canon[_loose_form(str(raw))] = target
        value_aliases[key] = canon

    dependents = {}
    for factor, pairs in (doc.get("whatif_dependents") or {}).items():
        resolved = []
        for pair in pairs or ():
            if isinstance(pair, dict):
                items = list(pair.items())
            else:
                items = [tuple(pair)]
            for k, v in items:
                if k not in by_key:
                    raise DictionaryError(f"what-if dependent names unknown field {k!r}")
                resolved.append((k, v))
        dependents[factor] = tuple(resolved)

    missing = frozenset(str(tok).casefold() for tok in doc.get("missing_tokens", [""]))

    return FeatureDictionary(
        version=int(doc.get("version", 1)),
        fields=tuple(fields),
        tables=tables,
        column_aliases=column_aliases,
        value_aliases=value_aliases,
        missing_tokens=missing,
        whatif_dependents=dependents,
    )
