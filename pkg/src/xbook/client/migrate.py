"""Recursive migration runner.

Fetches and applies one migration after another until the store's schema
version matches what the server requires. Each migration runs in a single
transaction: a failing statement rolls the store back to the last
completed version. A store that is AHEAD of the server is refused.
"""

from __future__ import annotations

import json
import logging

from .. import book as bookmod
from .. import migrations as shared
from .. import model
from ..book import parse_kind_token
from .errors import MigrationError, VersionAhead
from .store import LocalStore, _col, _table

log = logging.getLogger("xbook.client")


def apply_migrations(store: LocalStore, session) -> int:
    """Bring the store to the server's required schema version; returns the
    final version."""
    required = session.required_version()
    if store.schema_version > required:
        raise VersionAhead(
            f"store schema {store.schema_version} is newer than the server's "
            f"required {required}; refusing to run")
    while store.schema_version < required:
        current = store.schema_version
        batch = session.migrations_from(current)
        if not batch:
            raise MigrationError(
                f"server requires schema {required} but offers no migration "
                f"from {current}", at_version=current)
        for migration in batch:
            if migration.from_version != store.schema_version:
                raise MigrationError(
                    f"expected migration from {store.schema_version}, got "
                    f"{migration.from_version}", at_version=store.schema_version)
            apply_one(store, migration)
            log.info("migrated store to schema version %d", store.schema_version)
    return store.schema_version


def apply_one(store: LocalStore, migration: model.Migration) -> None:
    """One migration, one transaction."""
    version = store.schema_version
    if migration.from_version != version:
        raise MigrationError(f"migration starts at {migration.from_version}, "
                             f"store is at {version}", at_version=version)
    try:
        with store._txn() as c:
            for stmt in migration.statements:
                _execute(store, c, stmt)
            store._set_meta(c, "schema_version", str(version + 1))
    except (shared.TransformError, bookmod.BookError, model.ModelError) as e:
        raise MigrationError(str(e), at_version=version) from e


def _require(params: dict, *names: str) -> list:
    missing = [n for n in names if n not in params]
    if missing:
        raise MigrationError(f"statement misses parameters {missing}")
    return [params[n] for n in names]


def _execute(store: LocalStore, c, stmt: model.Statement) -> None:
    if stmt.op == "add_table":
        (table,) = _require(stmt.params, "table")
        position = c.execute("SELECT COALESCE(MAX(position), -1) + 1 AS p "
                             "FROM _masks").fetchone()["p"]
        store._create_mask_table(c, table, position)
    elif stmt.op == "add_column":
        table, column, kind = _require(stmt.params, "table", "column", "kind")
        parse_kind_token(kind)  # validates
        position = c.execute("SELECT COALESCE(MAX(position), -1) + 1 AS p "
                             "FROM _fields WHERE mask = ?", (table,)).fetchone()["p"]
        store._add_field_column(c, table, column, kind, position)
    elif stmt.op == "drop_column":
        table, column = _require(stmt.params, "table", "column")
        c.execute(f"ALTER TABLE {_table(table)} DROP COLUMN {_col(column)}")
        c.execute("DELETE FROM _fields WHERE mask = ? AND name = ?", (table, column))
    elif stmt.op == "transform_column":
        table, column, kind, transform = _require(
            stmt.params, "table", "column", "kind", "transform")
        parse_kind_token(kind)
        if transform not in shared.TRANSFORMS:
            raise MigrationError(f"unknown transform {transform!r}")
        rows = c.execute(f"SELECT _id, _dbid, {_col(column)} AS v FROM {_table(table)} "
                         f"WHERE {_col(column)} IS NOT NULL").fetchall()
        for row in rows:
            value = bookmod.field_value_from_json(json.loads(row["v"]))
            converted = shared.transform_value(transform, value)
            c.execute(f"UPDATE {_table(table)} SET {_col(column)} = ? "
                      "WHERE _id = ? AND _dbid = ?",
                      (json.dumps(bookmod.field_value_to_json(converted)),
                       row["_id"], row["_dbid"]))
        c.execute("UPDATE _fields SET kind = ? WHERE mask = ? AND name = ?",
                  (kind, table, column))
    elif stmt.op == "data_fix":
        fix = stmt.params.get("fix")
        if fix != "copy_column":
            raise MigrationError(f"unknown data fix {fix!r}")
        table, src, dst = _require(stmt.params, "table", "from", "to")
        only_if_empty = bool(stmt.params.get("only_if_empty", False))
        condition = f" AND {_col(dst)} IS NULL" if only_if_empty else ""
        c.execute(f"UPDATE {_table(table)} SET {_col(dst)} = {_col(src)} "
                  f"WHERE {_col(src)} IS NOT NULL{condition}")
    else:
        raise MigrationError(f"unknown statement {stmt.op!r}")
