"""Value-level semantics of migration statements.

Schema changes (tables, columns) are executed by each store; the value
conversions of transform_column and data_fix live here so client stores
and the server's generic entry rows apply exactly the same rules.
"""

from __future__ import annotations

from typing import Callable

from . import model
from .model import FieldValue


class TransformError(Exception):
    pass


def _text_to_int(value: FieldValue) -> FieldValue:
    if not isinstance(value, model.Text):
        raise TransformError(f"text_to_int needs a text value, got {value!r}")
    try:
        return model.Number(int(value.value.strip()))
    except ValueError as e:
        raise TransformError(f"not an integer: {value.value!r}") from e


def _int_to_text(value: FieldValue) -> FieldValue:
    if not isinstance(value, model.Number):
        raise TransformError(f"int_to_text needs a number value, got {value!r}")
    return model.Text(str(value.value))


def _int_to_decimal(value: FieldValue) -> FieldValue:
    if not isinstance(value, model.Number):
        raise TransformError(f"int_to_decimal needs a number value, got {value!r}")
    return model.Decimal(str(value.value))


TRANSFORMS: dict[str, Callable[[FieldValue], FieldValue]] = {
    "text_to_int": _text_to_int,
    "int_to_text": _int_to_text,
    "int_to_decimal": _int_to_decimal,
}


def transform_value(name: str, value: FieldValue) -> FieldValue:
    if name not in TRANSFORMS:
        raise TransformError(f"unknown transform {name!r}")
    return TRANSFORMS[name](value)


def apply_value_statement(stmt: model.Statement, mask: str,
                          values: dict[str, FieldValue]) -> dict[str, FieldValue]:
    """Apply one statement's effect on a single entry's values map.
    Schema-only statements leave the map untouched."""
    params = stmt.params
    if params.get("table") != mask:
        return values
    out = dict(values)
    if stmt.op == "transform_column":
        column = params["column"]
        if column in out:
            out[column] = transform_value(params["transform"], out[column])
    elif stmt.op == "drop_column":
        out.pop(params["column"], None)
    elif stmt.op == "data_fix":
        if params.get("fix") != "copy_column":
            raise TransformError(f"unknown data fix {params.get('fix')!r}")
        src, dst = params["from"], params["to"]
        skip = params.get("only_if_empty", False) and dst in out
        if src in out and not skip:
            out[dst] = out[src]
    return out
