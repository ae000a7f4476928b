"""Declarative Book machinery.

A Book is one incarnation of the framework: a set of input masks with
typed fields, code tables, and the migration chain that brings old stores
up to the current schema version. Masks can cross-link each other (a find
referencing its container). This module owns the descriptor types, entry
validation with per-field states, and human-readable display resolution
for listings and export.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Callable

from . import model
from .model import FieldValue, GlobalKey

FIELD_KINDS = ("text", "number", "decimal", "flag", "code", "multicode",
               "timestamp", "crosslink")

_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


class BookError(Exception):
    """Malformed Book definition or use of an undeclared mask/field."""


class FieldState(Enum):
    OK = "ok"
    MANDATORY_MISSING = "mandatory_missing"
    INVALID = "invalid"


@dataclass(frozen=True)
class FieldDef:
    """One input field of a mask.

    `kind` names the value variant; `table` qualifies code/multicode
    kinds, `target` qualifies crosslink kinds. Constraints are optional
    and must match the kind.
    """

    name: str
    kind: str
    table: str | None = None
    target: str | None = None
    mandatory: bool = False
    min_value: int | None = None
    max_value: int | None = None
    max_len: int | None = None

    def __post_init__(self) -> None:
        if _NAME_RE.fullmatch(self.name) is None:
            raise BookError(f"bad field name {self.name!r}")
        if self.kind not in FIELD_KINDS:
            raise BookError(f"unknown field kind {self.kind!r}")
        if (self.kind in ("code", "multicode")) != (self.table is not None):
            raise BookError(f"field {self.name}: table= is for code kinds only")
        if (self.kind == "crosslink") != (self.target is not None):
            raise BookError(f"field {self.name}: target= is for crosslink only")
        if (self.min_value is not None or self.max_value is not None) and self.kind != "number":
            raise BookError(f"field {self.name}: range is for number only")
        if self.max_len is not None and self.kind != "text":
            raise BookError(f"field {self.name}: max_len is for text only")

    def kind_token(self) -> str:
        """Canonical kind string, e.g. "number", "code:species"."""
        if self.kind in ("code", "multicode"):
            return f"{self.kind}:{self.table}"
        if self.kind == "crosslink":
            return f"crosslink:{self.target}"
        return self.kind


def parse_kind_token(token: str) -> tuple[str, str | None, str | None]:
    """Split a kind token into (kind, table, target)."""
    kind, _, param = token.partition(":")
    if kind in ("code", "multicode"):
        if not param:
            raise BookError(f"kind {token!r} needs a table")
        return kind, param, None
    if kind == "crosslink":
        if not param:
            raise BookError(f"kind {token!r} needs a target mask")
        return kind, None, param
    if kind not in FIELD_KINDS or param:
        raise BookError(f"unknown field kind {token!r}")
    return kind, None, None


@dataclass(frozen=True)
class MaskDef:
    """One input mask: ordered fields plus their display grouping."""

    name: str
    fields: tuple[FieldDef, ...]
    sections: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def __post_init__(self) -> None:
        if _NAME_RE.fullmatch(self.name) is None:
            raise BookError(f"bad mask name {self.name!r}")
        names = [f.name for f in self.fields]
        if len(names) != len(set(names)):
            raise BookError(f"mask {self.name}: duplicate field names")

    def field(self, name: str) -> FieldDef:
        for f in self.fields:
            if f.name == name:
                return f
        raise BookError(f"mask {self.name} has no field {name!r}")

    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]

    def display_field(self) -> str | None:
        """The field used as representative text for cross-links pointing
        here: by convention the first mandatory text field."""
        for f in self.fields:
            if f.kind == "text" and f.mandatory:
                return f.name
        return None


@dataclass
class BookDescriptor:
    book_id: str
    book_name: str
    schema_version: int
    masks: tuple[MaskDef, ...]
    code_tables: tuple[model.CodeTable, ...] = ()
    migrations: tuple[model.Migration, ...] = ()

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if _NAME_RE.fullmatch(self.book_id) is None:
            raise BookError(f"bad book id {self.book_id!r}")
        if not self.book_name or any(ch in self.book_name for ch in "\r\n"):
            raise BookError("book name must be one non-empty line")
        mask_names = [m.name for m in self.masks]
        if len(mask_names) != len(set(mask_names)):
            raise BookError("duplicate mask names")
        table_names = {t.name for t in self.code_tables}
        for m in self.masks:
            for f in m.fields:
                if f.kind in ("code", "multicode") and f.table not in table_names:
                    raise BookError(f"{m.name}.{f.name}: unknown code table {f.table!r}")
                if f.kind == "crosslink" and f.target not in mask_names:
                    raise BookError(f"{m.name}.{f.name}: unknown target mask {f.target!r}")

    def mask(self, name: str) -> MaskDef:
        for m in self.masks:
            if m.name == name:
                return m
        raise BookError(f"no mask {name!r}")

    def code_table(self, name: str) -> model.CodeTable:
        for t in self.code_tables:
            if t.name == name:
                return t
        raise BookError(f"no code table {name!r}")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

_KIND_TYPES = {
    "text": model.Text,
    "number": model.Number,
    "decimal": model.Decimal,
    "flag": model.Flag,
    "code": model.Code,
    "multicode": model.MultiCode,
    "timestamp": model.Timestamp,
    "crosslink": model.CrossLink,
}

# link_exists(target_mask, key) -> True when the target entry exists and is
# not tombstoned in the local store.
LinkExists = Callable[[str, GlobalKey], bool]


def validate(mask: MaskDef, values: dict[str, FieldValue],
             code_tables: dict[str, model.CodeTable] | None = None,
             link_exists: LinkExists | None = None) -> dict[str, FieldState]:
    """Per-field validation states for one entry draft.

    MANDATORY_MISSING for mandatory fields left empty, INVALID for
    constraint violations (wrong kind, range, unknown code id, dangling
    cross-link), OK otherwise. An entry is saveable iff every field is OK.
    """
    code_tables = code_tables or {}
    declared = {f.name for f in mask.fields}
    for name in values:
        if name not in declared:
            raise BookError(f"mask {mask.name} has no field {name!r}")

    states: dict[str, FieldState] = {}
    for f in mask.fields:
        value = values.get(f.name, model.EMPTY)
        if isinstance(value, model.Empty):
            states[f.name] = (FieldState.MANDATORY_MISSING if f.mandatory
                              else FieldState.OK)
            continue
        states[f.name] = _check_value(f, value, code_tables, link_exists)
    return states


def _check_value(f: FieldDef, value: FieldValue,
                 code_tables: dict[str, model.CodeTable],
                 link_exists: LinkExists | None) -> FieldState:
    if not isinstance(value, _KIND_TYPES[f.kind]):
        return FieldState.INVALID
    if isinstance(value, model.Number):
        if f.min_value is not None and value.value < f.min_value:
            return FieldState.INVALID
        if f.max_value is not None and value.value > f.max_value:
            return FieldState.INVALID
    elif isinstance(value, model.Text):
        if f.max_len is not None and len(value.value) > f.max_len:
            return FieldState.INVALID
    elif isinstance(value, model.Code):
        table = code_tables.get(f.table)
        if value.table != f.table or table is None or value.code_id not in table.rows:
            return FieldState.INVALID
    elif isinstance(value, model.MultiCode):
        table = code_tables.get(f.table)
        if value.table != f.table or table is None \
                or not all(cid in table.rows for cid in value.code_ids):
            return FieldState.INVALID
    elif isinstance(value, model.CrossLink):
        if value.target_mask != f.target:
            return FieldState.INVALID
        if link_exists is not None and not link_exists(value.target_mask, value.key):
            return FieldState.INVALID
    return FieldState.OK


def saveable(states: dict[str, FieldState]) -> bool:
    return all(s is FieldState.OK for s in states.values())


# ---------------------------------------------------------------------------
# Display resolution
# ---------------------------------------------------------------------------

# link_display(target_mask, key) -> representative text of the target entry,
# or None when the target is unknown.
LinkDisplay = Callable[[str, GlobalKey], "str | None"]


def render_timestamp(millis: int) -> str:
    dt = datetime.fromtimestamp(millis / 1000, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{millis % 1000:03d}Z"


def render_value(value: FieldValue, code_tables: dict[str, model.CodeTable],
                 language: str, link_display: LinkDisplay | None = None) -> str:
    """Human-readable text for one field value.

    Code values render the table text for `language`, falling back to the
    first available language and finally to "#<id>". Cross-links render the
    target's representative text plus the key.
    """
    if isinstance(value, model.Empty):
        return ""
    if isinstance(value, model.Text):
        return value.value
    if isinstance(value, model.Number):
        return str(value.value)
    if isinstance(value, model.Decimal):
        return value.text
    if isinstance(value, model.Flag):
        return "true" if value.value else "false"
    if isinstance(value, model.Timestamp):
        return render_timestamp(value.millis)
    if isinstance(value, model.Code):
        return _code_text(value.table, value.code_id, code_tables, language)
    if isinstance(value, model.MultiCode):
        return "; ".join(_code_text(value.table, cid, code_tables, language)
                         for cid in sorted(value.code_ids))
    if isinstance(value, model.CrossLink):
        text = link_display(value.target_mask, value.key) if link_display else None
        if text:
            return f"{text} ({value.key})"
        return f"({value.key})"
    raise BookError(f"not a field value: {value!r}")


def _code_text(table_name: str, code_id: int,
               code_tables: dict[str, model.CodeTable], language: str) -> str:
    table = code_tables.get(table_name)
    if table is not None:
        text = table.lookup(code_id, language)
        if text is not None:
            return text
    return f"#{code_id}"


def resolve_display(entry: model.Entry, mask: MaskDef,
                    code_tables: dict[str, model.CodeTable], language: str,
                    link_display: LinkDisplay | None = None) -> list[tuple[str, str]]:
    """Ordered (column, display text) pairs for one entry, one pair per
    declared field of the mask."""
    return [(f.name, render_value(entry.values.get(f.name, model.EMPTY),
                                  code_tables, language, link_display))
            for f in mask.fields]


# ---------------------------------------------------------------------------
# JSON codec for field values (local control API and store columns)
# ---------------------------------------------------------------------------


def field_value_to_json(value: FieldValue):
    if isinstance(value, model.Empty):
        return None
    if isinstance(value, model.Text):
        return {"kind": "text", "value": value.value}
    if isinstance(value, model.Number):
        return {"kind": "number", "value": value.value}
    if isinstance(value, model.Decimal):
        return {"kind": "decimal", "value": value.text}
    if isinstance(value, model.Flag):
        return {"kind": "flag", "value": value.value}
    if isinstance(value, model.Code):
        return {"kind": "code", "table": value.table, "id": value.code_id}
    if isinstance(value, model.MultiCode):
        return {"kind": "multicode", "table": value.table, "ids": sorted(value.code_ids)}
    if isinstance(value, model.Timestamp):
        return {"kind": "timestamp", "ms": value.millis}
    if isinstance(value, model.CrossLink):
        return {"kind": "crosslink", "mask": value.target_mask,
                "id": value.key.id, "dbid": value.key.dbid}
    raise BookError(f"not a field value: {value!r}")


def field_value_from_json(data) -> FieldValue:
    if data is None:
        return model.EMPTY
    try:
        kind = data["kind"]
        if kind == "text":
            return model.Text(str(data["value"]))
        if kind == "number":
            return model.Number(int(data["value"]))
        if kind == "decimal":
            return model.Decimal(str(data["value"]))
        if kind == "flag":
            return model.Flag(bool(data["value"]))
        if kind == "code":
            return model.Code(str(data["table"]), int(data["id"]))
        if kind == "multicode":
            return model.MultiCode(str(data["table"]), frozenset(int(i) for i in data["ids"]))
        if kind == "timestamp":
            return model.Timestamp(int(data["ms"]))
        if kind == "crosslink":
            return model.CrossLink(str(data["mask"]),
                                   GlobalKey(int(data["id"]), int(data["dbid"])))
    except (KeyError, TypeError, ValueError, model.ModelError) as e:
        raise BookError(f"bad field value json {data!r}: {e}") from e
    raise BookError(f"unknown field value kind {data!r}")


def values_to_json(values: dict[str, FieldValue]) -> dict:
    return {name: field_value_to_json(v) for name, v in model.strip_empty(values).items()}


def values_from_json(data: dict) -> dict[str, FieldValue]:
    out = {}
    for name, v in data.items():
        fv = field_value_from_json(v)
        if not isinstance(fv, model.Empty):
            out[name] = fv
    return out


# ---------------------------------------------------------------------------
# Reference Book
# ---------------------------------------------------------------------------


def reference_book() -> BookDescriptor:
    """The bundled "DemoFinds" Book: containers and the finds stored in
    them, cross-linked, with three migrations forming versions 1 to 4."""
    from . import bookfile
    from importlib import resources

    text = resources.files("xbook").joinpath("books/demofinds.book").read_text("utf-8")
    return bookfile.parse_book(text)


def reference_book_v1() -> BookDescriptor:
    """The historical version-1 layout of DemoFinds, used to exercise the
    migration chain: only the Container mask existed, finds came later."""
    current = reference_book()
    return BookDescriptor(
        book_id=current.book_id,
        book_name=current.book_name,
        schema_version=1,
        masks=(MaskDef("Container", (
            FieldDef("label", "text", mandatory=True, max_len=120),
        ), sections=(("General", ("label",)),)),),
        code_tables=current.code_tables,
        migrations=current.migrations,
    )
