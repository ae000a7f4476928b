"""The local persistent store: one SQLite file per Book installation.

Each mask gets its own table whose columns mirror the synchronized fields
(one JSON-encoded value per column) plus sync bookkeeping: key, project,
server version stamp, sync status, tombstone flag, modification time.
Deletes keep the row as a hidden tombstone so they replicate like edits.

All mutations serialize through one writer lock; every public method is a
complete transaction, so a crash never leaves a half-applied operation.
"""

from __future__ import annotations

import hashlib
import json
import sqlite3
import threading
import time
from contextlib import contextmanager
from pathlib import Path

from .. import book as bookmod
from .. import model
from ..book import BookDescriptor
from ..model import Entry, FieldValue, GlobalKey, SyncEvent, SyncStatus
from .errors import ClientError, MigrationsPending, UnknownEntry, ValidationFailed, VersionAhead

_META_SCHEMA = """
CREATE TABLE IF NOT EXISTS _meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS _masks (
    name TEXT PRIMARY KEY,
    position INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS _fields (
    mask TEXT NOT NULL,
    name TEXT NOT NULL,
    kind TEXT NOT NULL,
    position INTEGER NOT NULL,
    PRIMARY KEY (mask, name)
);
CREATE TABLE IF NOT EXISTS _projects (
    id INTEGER NOT NULL,
    dbid INTEGER NOT NULL,
    name TEXT NOT NULL,
    owner INTEGER NOT NULL,
    server_entries INTEGER NOT NULL DEFAULT 0,
    last_sync_ms INTEGER,
    PRIMARY KEY (id, dbid)
);
CREATE TABLE IF NOT EXISTS _last_pulled (
    project_id INTEGER NOT NULL,
    project_dbid INTEGER NOT NULL,
    stamp INTEGER NOT NULL,
    PRIMARY KEY (project_id, project_dbid)
);
CREATE TABLE IF NOT EXISTS _code_tables (
    name TEXT PRIMARY KEY,
    version INTEGER NOT NULL,
    rows TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS _conflicts (
    mask TEXT NOT NULL,
    id INTEGER NOT NULL,
    dbid INTEGER NOT NULL,
    theirs TEXT NOT NULL,
    PRIMARY KEY (mask, id, dbid)
);
"""

_BOOKKEEPING = ("_id", "_dbid", "_project_id", "_project_dbid",
                "_version", "_status", "_deleted", "_modified_ms")


def _table(mask: str) -> str:
    return f'"m_{mask}"'


def _col(field: str) -> str:
    return f'"f_{field}"'


class LocalStore:
    """Open with `create` (fresh install) or `open` (existing file)."""

    def __init__(self, conn: sqlite3.Connection, book: BookDescriptor,
                 path: str, clock=time.time):
        self._conn = conn
        self.book = book
        self.path = path
        self.clock = clock
        self._lock = threading.RLock()
        self.sync_lock = threading.Lock()  # one sync worker per store

    # -- lifecycle -----------------------------------------------------------

    @classmethod
    def _connect(cls, path: str) -> sqlite3.Connection:
        conn = sqlite3.connect(path, timeout=30, check_same_thread=False,
                               isolation_level=None)
        conn.row_factory = sqlite3.Row
        return conn

    @classmethod
    def create(cls, path: str | Path, book: BookDescriptor, clock=time.time) -> "LocalStore":
        conn = cls._connect(str(path))
        store = cls(conn, book, str(path), clock)
        conn.executescript(_META_SCHEMA)  # executescript commits by itself
        with store._txn() as c:
            store._set_meta(c, "book_id", book.book_id)
            store._set_meta(c, "schema_version", str(book.schema_version))
            store._set_meta(c, "id_counter", "0")
            store._set_meta(c, "identity_pending", "0")
            for position, mask in enumerate(book.masks):
                store._create_mask_table(c, mask.name, position)
                for fpos, f in enumerate(mask.fields):
                    store._add_field_column(c, mask.name, f.name, f.kind_token(), fpos)
            for table in book.code_tables:
                c.execute("INSERT INTO _code_tables (name, version, rows) VALUES (?, ?, ?)",
                          (table.name, table.version,
                           json.dumps({str(k): v for k, v in table.rows.items()})))
        return store

    @classmethod
    def open(cls, path: str | Path, book: BookDescriptor, clock=time.time) -> "LocalStore":
        if not Path(path).exists():
            raise ClientError(f"no store at {path}")
        conn = cls._connect(str(path))
        store = cls(conn, book, str(path), clock)
        stored_id = store._get_meta("book_id")
        if stored_id != book.book_id:
            conn.close()
            raise ClientError(f"store belongs to Book {stored_id!r}, not {book.book_id!r}")
        if store.schema_version > book.schema_version:
            conn.close()
            raise VersionAhead(
                f"store schema {store.schema_version} is newer than the "
                f"application's {book.schema_version}")
        if store.schema_version == book.schema_version:
            expect = sorted((m.name, f.name, f.kind_token())
                            for m in book.masks for f in m.fields)
            if store.schema_descriptor() != expect:
                conn.close()
                raise ClientError("store schema does not match the Book "
                                  "definition at the same version")
        return store

    def close(self) -> None:
        self._conn.close()

    @contextmanager
    def _txn(self):
        with self._lock:
            self._conn.execute("BEGIN IMMEDIATE")
            try:
                yield self._conn
            except BaseException:
                self._conn.execute("ROLLBACK")
                raise
            self._conn.execute("COMMIT")

    # -- meta ------------------------------------------------------------------

    def _get_meta(self, key: str, default: str | None = None) -> str | None:
        with self._lock:
            row = self._conn.execute("SELECT value FROM _meta WHERE key = ?",
                                     (key,)).fetchone()
        return default if row is None else row["value"]

    @staticmethod
    def _set_meta(c, key: str, value: str) -> None:
        c.execute("INSERT INTO _meta (key, value) VALUES (?, ?) "
                  "ON CONFLICT(key) DO UPDATE SET value = excluded.value", (key, value))

    @property
    def book_id(self) -> str:
        return self._get_meta("book_id")

    @property
    def schema_version(self) -> int:
        return int(self._get_meta("schema_version"))

    @property
    def database_id(self) -> int | None:
        value = self._get_meta("database_id")
        return None if value is None else int(value)

    def set_database_id(self, dbid: int) -> None:
        with self._txn() as c:
            self._set_meta(c, "database_id", str(dbid))

    @property
    def id_counter(self) -> int:
        return int(self._get_meta("id_counter", "0"))

    @property
    def identity_pending(self) -> bool:
        return self._get_meta("identity_pending", "0") == "1"

    def set_identity_pending(self, pending: bool) -> None:
        with self._txn() as c:
            self._set_meta(c, "identity_pending", "1" if pending else "0")

    def _now_ms(self) -> int:
        return int(self.clock() * 1000)

    # -- schema catalog ----------------------------------------------------------

    def _create_mask_table(self, c, mask: str, position: int) -> None:
        c.execute("INSERT INTO _masks (name, position) VALUES (?, ?)", (mask, position))
        c.execute(f"""
            CREATE TABLE {_table(mask)} (
                _id INTEGER NOT NULL,
                _dbid INTEGER NOT NULL,
                _project_id INTEGER NOT NULL,
                _project_dbid INTEGER NOT NULL,
                _version INTEGER NOT NULL,
                _status TEXT NOT NULL,
                _deleted INTEGER NOT NULL,
                _modified_ms INTEGER NOT NULL,
                PRIMARY KEY (_id, _dbid)
            )""")

    def _add_field_column(self, c, mask: str, field: str, kind_token: str,
                          position: int) -> None:
        c.execute("INSERT INTO _fields (mask, name, kind, position) VALUES (?, ?, ?, ?)",
                  (mask, field, kind_token, position))
        c.execute(f"ALTER TABLE {_table(mask)} ADD COLUMN {_col(field)} TEXT")

    def mask_names(self) -> list[str]:
        with self._lock:
            return [r["name"] for r in self._conn.execute(
                "SELECT name FROM _masks ORDER BY position")]

    def catalog_fields(self, mask: str) -> list[tuple[str, str]]:
        with self._lock:
            return [(r["name"], r["kind"]) for r in self._conn.execute(
                "SELECT name, kind FROM _fields WHERE mask = ? ORDER BY position", (mask,))]

    def schema_descriptor(self) -> list[tuple[str, str, str]]:
        """Canonical, order-insensitive schema listing: sorted
        (mask, field, kind token) triples."""
        out = []
        for mask in self.mask_names():
            for name, kind in self.catalog_fields(mask):
                out.append((mask, name, kind))
        return sorted(out)

    def schema_hash(self) -> str:
        blob = json.dumps(self.schema_descriptor()).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    # -- entry persistence ---------------------------------------------------------

    def _row_to_entry(self, mask: str, row: sqlite3.Row,
                      catalog: list[tuple[str, str]] | None = None) -> Entry:
        values: dict[str, FieldValue] = {}
        for name, _kind in (catalog if catalog is not None
                            else self.catalog_fields(mask)):
            raw = row[f"f_{name}"]
            if raw is not None:
                values[name] = bookmod.field_value_from_json(json.loads(raw))
        return Entry(
            key=GlobalKey(row["_id"], row["_dbid"]),
            mask=mask,
            project=GlobalKey(row["_project_id"], row["_project_dbid"]),
            values=values,
            version=row["_version"],
            status=SyncStatus(row["_status"]),
            modified_ms=row["_modified_ms"],
            deleted=bool(row["_deleted"]))

    def _entry_columns(self, entry: Entry) -> tuple[list[str], list]:
        catalog = dict(self.catalog_fields(entry.mask))
        unknown = set(entry.values) - set(catalog)
        if unknown:
            raise ClientError(f"mask {entry.mask!r} has no columns for {sorted(unknown)}")
        names = ["_id", "_dbid", "_project_id", "_project_dbid",
                 "_version", "_status", "_deleted", "_modified_ms"]
        params = [entry.key.id, entry.key.dbid, entry.project.id, entry.project.dbid,
                  entry.version, entry.status.value, int(entry.deleted), entry.modified_ms]
        for name in catalog:
            names.append(f"f_{name}")
            value = entry.values.get(name)
            params.append(None if value is None
                          else json.dumps(bookmod.field_value_to_json(value)))
        return names, params

    def put_row(self, entry: Entry) -> None:
        """Raw upsert, no status logic; sync machinery and tests use it."""
        names, params = self._entry_columns(entry)
        cols = ", ".join(f'"{n}"' for n in names)
        marks = ", ".join("?" for _ in names)
        updates = ", ".join(f'"{n}" = excluded."{n}"' for n in names[2:])
        with self._txn() as c:
            c.execute(f"INSERT INTO {_table(entry.mask)} ({cols}) VALUES ({marks}) "
                      f"ON CONFLICT(_id, _dbid) DO UPDATE SET {updates}", params)

    def get_entry(self, key: GlobalKey, mask: str | None = None) -> Entry | None:
        masks = [mask] if mask else self.mask_names()
        with self._lock:
            for m in masks:
                row = self._conn.execute(
                    f"SELECT * FROM {_table(m)} WHERE _id = ? AND _dbid = ?",
                    (key.id, key.dbid)).fetchone()
                if row is not None:
                    return self._row_to_entry(m, row)
        return None

    def entries(self, mask: str | None = None, project: GlobalKey | None = None,
                include_deleted: bool = False) -> list[Entry]:
        """Rows ordered by key (dbid, then id); tombstones excluded unless
        asked for."""
        out: list[Entry] = []
        for m in ([mask] if mask else self.mask_names()):
            query = f"SELECT * FROM {_table(m)}"
            cond, params = [], []
            if project is not None:
                cond.append("_project_id = ? AND _project_dbid = ?")
                params += [project.id, project.dbid]
            if not include_deleted:
                cond.append("_deleted = 0")
            if cond:
                query += " WHERE " + " AND ".join(cond)
            query += " ORDER BY _dbid, _id"
            with self._lock:
                rows = self._conn.execute(query, params).fetchall()
            catalog = self.catalog_fields(m)
            out.extend(self._row_to_entry(m, r, catalog) for r in rows)
        return out

    def entry_count(self, project: GlobalKey) -> int:
        """Visible (non-tombstoned) rows of one project across all masks."""
        total = 0
        for m in self.mask_names():
            with self._lock:
                total += self._conn.execute(
                    f"SELECT COUNT(*) AS n FROM {_table(m)} WHERE _project_id = ? "
                    "AND _project_dbid = ? AND _deleted = 0",
                    (project.id, project.dbid)).fetchone()["n"]
        return total

    # -- entry operations -----------------------------------------------------------

    def allocate_key(self) -> GlobalKey:
        with self._txn() as c:
            counter = int(self._get_meta("id_counter", "0")) + 1
            key = model.next_local_key(counter, self.database_id)
            self._set_meta(c, "id_counter", str(counter))
            return key

    def save_entry(self, mask: str, project: GlobalKey,
                   values: dict[str, FieldValue], key: GlobalKey | None = None) -> Entry:
        """Create (key=None) or edit an entry. Validates against the Book's
        mask definition; rejection carries the per-field states."""
        if self.schema_version != self.book.schema_version:
            raise MigrationsPending(
                f"store is at schema {self.schema_version}, "
                f"Book needs {self.book.schema_version}")
        mask_def = self.book.mask(mask)
        states = bookmod.validate(mask_def, values, self.code_tables(),
                                  link_exists=self.link_exists)
        if not bookmod.saveable(states):
            raise ValidationFailed(states)

        if key is None:
            entry = Entry(key=self.allocate_key(), mask=mask, project=project,
                          values=dict(values), version=0,
                          status=SyncStatus.CHANGED_LOCALLY,
                          modified_ms=self._now_ms(), deleted=False)
        else:
            current = self.get_entry(key, mask)
            if current is None:
                raise UnknownEntry(f"no entry {key} in mask {mask!r}")
            if current.project != project:
                raise ClientError(f"entry {key} belongs to project "
                                  f"{current.project}, not {project}")
            entry = current
            entry.values = dict(values)
            entry.status = model.transition_status(entry.status, SyncEvent.LOCAL_EDIT)
            entry.modified_ms = self._now_ms()
            entry.deleted = False
            self.drop_conflict(key)  # an edit supersedes a stored conflict copy
        self.put_row(entry)
        return entry

    def delete_entry(self, key: GlobalKey) -> Entry:
        """Tombstone an entry: values are retained, the row is hidden from
        listings and replicates like an edit."""
        entry = self.get_entry(key)
        if entry is None:
            raise UnknownEntry(f"no entry {key}")
        if entry.deleted and entry.status is SyncStatus.DELETED_LOCALLY:
            return entry
        entry.deleted = True
        entry.status = model.transition_status(entry.status, SyncEvent.LOCAL_DELETE)
        entry.modified_ms = self._now_ms()
        self.drop_conflict(key)
        self.put_row(entry)
        return entry

    def rows_to_push(self, project: GlobalKey) -> list[Entry]:
        out = []
        for m in self.mask_names():
            with self._lock:
                rows = self._conn.execute(
                    f"SELECT * FROM {_table(m)} WHERE _project_id = ? AND _project_dbid = ? "
                    "AND _status IN (?, ?) ORDER BY _dbid, _id",
                    (project.id, project.dbid, SyncStatus.CHANGED_LOCALLY.value,
                     SyncStatus.DELETED_LOCALLY.value)).fetchall()
            out.extend(self._row_to_entry(m, r) for r in rows)
        return out

    def mark_committed(self, key: GlobalKey, stamp: int,
                       pushed: Entry | None = None) -> None:
        """Record a server commit. If the row changed again while the push
        was in flight (another writer between snapshot and reply), only the
        version advances: the row stays a pending local change, and the
        next push commits the newer values cleanly on top of this stamp."""
        entry = self.get_entry(key)
        if entry is None:
            raise UnknownEntry(f"no entry {key}")
        entry.version = stamp
        edited_meanwhile = pushed is not None and (
            entry.values != pushed.values
            or entry.deleted != pushed.deleted
            or entry.modified_ms != pushed.modified_ms)
        if not edited_meanwhile:
            entry.status = model.transition_status(entry.status, SyncEvent.SYNC_COMMIT)
        self.put_row(entry)

    def apply_conflict(self, key: GlobalKey, theirs: Entry) -> None:
        entry = self.get_entry(key)
        if entry is None:
            raise UnknownEntry(f"no entry {key}")
        if entry.status is SyncStatus.DELETED_LOCALLY:
            # a conflicting local delete is still a local change
            entry.status = SyncStatus.CHANGED_LOCALLY
        entry.status = model.transition_status(entry.status, SyncEvent.REMOTE_CONFLICT)
        self.put_row(entry)
        blob = json.dumps({
            "values": bookmod.values_to_json(theirs.values),
            "version": theirs.version,
            "deleted": theirs.deleted,
            "modified_ms": theirs.modified_ms,
        })
        with self._txn() as c:
            c.execute("INSERT INTO _conflicts (mask, id, dbid, theirs) VALUES (?, ?, ?, ?) "
                      "ON CONFLICT(mask, id, dbid) DO UPDATE SET theirs = excluded.theirs",
                      (entry.mask, key.id, key.dbid, blob))

    def apply_remote(self, incoming: Entry) -> bool:
        """Phase-2 application of one pulled row. Inserts unknown rows and
        overwrites rows that are still SYNCHRONIZED at an older version;
        local changes and conflicts are never clobbered. A conflicted row
        stays untouched, but its stored server copy is refreshed so a later
        TAKE_THEIRS adopts current data, not the row as of the conflict."""
        local = self.get_entry(incoming.key, incoming.mask)
        row = incoming.copy()
        row.status = SyncStatus.SYNCHRONIZED
        if local is None:
            self.put_row(row)
            return True
        if local.status is SyncStatus.CONFLICTED:
            pair = self.get_conflict(local.key)
            if pair is not None and incoming.version > pair[1].version:
                self._refresh_conflict(local.key, incoming)
            return False
        if local.status is not SyncStatus.SYNCHRONIZED:
            return False
        if incoming.version <= local.version:
            return False
        self.put_row(row)
        return True

    def _refresh_conflict(self, key: GlobalKey, theirs: Entry) -> None:
        blob = json.dumps({
            "values": bookmod.values_to_json(theirs.values),
            "version": theirs.version,
            "deleted": theirs.deleted,
            "modified_ms": theirs.modified_ms,
        })
        with self._txn() as c:
            c.execute("UPDATE _conflicts SET theirs = ? WHERE id = ? AND dbid = ?",
                      (blob, key.id, key.dbid))

    def unsynced_count(self, project: GlobalKey | None = None) -> int:
        total = 0
        for m in self.mask_names():
            query = f"SELECT COUNT(*) AS n FROM {_table(m)} WHERE _status != ?"
            params: list = [SyncStatus.SYNCHRONIZED.value]
            if project is not None:
                query += " AND _project_id = ? AND _project_dbid = ?"
                params += [project.id, project.dbid]
            with self._lock:
                total += self._conn.execute(query, params).fetchone()["n"]
        return total

    # -- cross-link helpers -----------------------------------------------------------

    def link_exists(self, mask: str, key: GlobalKey) -> bool:
        if mask not in self.mask_names():
            return False
        entry = self.get_entry(key, mask)
        return entry is not None and not entry.deleted

    def link_display(self, mask: str, key: GlobalKey) -> str | None:
        try:
            display = self.book.mask(mask).display_field()
        except bookmod.BookError:
            return None
        if display is None:
            return None
        entry = self.get_entry(key, mask)
        if entry is None or entry.deleted:
            return None
        value = entry.values.get(display)
        return value.value if isinstance(value, model.Text) else None

    # -- conflicts -----------------------------------------------------------

    def _conflict_entry(self, mine: Entry, blob: str) -> Entry:
        data = json.loads(blob)
        return Entry(key=mine.key, mask=mine.mask, project=mine.project,
                     values=bookmod.values_from_json(data["values"]),
                     version=data["version"], status=SyncStatus.SYNCHRONIZED,
                     modified_ms=data["modified_ms"], deleted=data["deleted"])

    def get_conflict(self, key: GlobalKey) -> tuple[Entry, Entry] | None:
        mine = self.get_entry(key)
        if mine is None or mine.status is not SyncStatus.CONFLICTED:
            return None
        with self._lock:
            row = self._conn.execute(
                "SELECT theirs FROM _conflicts WHERE id = ? AND dbid = ?",
                (key.id, key.dbid)).fetchone()
        if row is None:
            return None
        return mine, self._conflict_entry(mine, row["theirs"])

    def conflicts(self) -> list[tuple[Entry, Entry]]:
        out = []
        with self._lock:
            rows = self._conn.execute(
                "SELECT mask, id, dbid FROM _conflicts ORDER BY dbid, id").fetchall()
        for row in rows:
            pair = self.get_conflict(GlobalKey(row["id"], row["dbid"]))
            if pair is not None:
                out.append(pair)
        return out

    def drop_conflict(self, key: GlobalKey) -> None:
        with self._txn() as c:
            c.execute("DELETE FROM _conflicts WHERE id = ? AND dbid = ?", (key.id, key.dbid))

    # -- code tables -----------------------------------------------------------

    def code_table_versions(self) -> dict[str, int]:
        with self._lock:
            return {r["name"]: r["version"] for r in
                    self._conn.execute("SELECT name, version FROM _code_tables")}

    def code_tables(self) -> dict[str, model.CodeTable]:
        with self._lock:
            rows = self._conn.execute("SELECT * FROM _code_tables").fetchall()
        return {r["name"]: model.CodeTable(
            r["name"], r["version"],
            {int(k): v for k, v in json.loads(r["rows"]).items()}) for r in rows}

    def replace_code_tables(self, tables: list[model.CodeTable]) -> None:
        """Replace the given tables in one transaction; partial refresh is
        not possible."""
        with self._txn() as c:
            for t in tables:
                c.execute("INSERT INTO _code_tables (name, version, rows) VALUES (?, ?, ?) "
                          "ON CONFLICT(name) DO UPDATE SET version = excluded.version, "
                          "rows = excluded.rows",
                          (t.name, t.version,
                           json.dumps({str(k): v for k, v in t.rows.items()})))

    # -- projects -----------------------------------------------------------

    def upsert_projects(self, listed: list[tuple[model.Project, int, int]]) -> None:
        with self._txn() as c:
            for project, server_entries, _max_stamp in listed:
                c.execute(
                    "INSERT INTO _projects (id, dbid, name, owner, server_entries) "
                    "VALUES (?, ?, ?, ?, ?) "
                    "ON CONFLICT(id, dbid) DO UPDATE SET name = excluded.name, "
                    "owner = excluded.owner, server_entries = excluded.server_entries",
                    (project.key.id, project.key.dbid, project.name, project.owner,
                     server_entries))

    def get_project(self, key: GlobalKey) -> model.Project | None:
        with self._lock:
            row = self._conn.execute("SELECT * FROM _projects WHERE id = ? AND dbid = ?",
                                     (key.id, key.dbid)).fetchone()
        if row is None:
            return None
        return model.Project(key, row["name"], row["owner"])

    def project_infos(self) -> list[dict]:
        """Everything the sync panel shows, computed locally."""
        with self._lock:
            rows = self._conn.execute("SELECT * FROM _projects ORDER BY dbid, id").fetchall()
        out = []
        for row in rows:
            key = GlobalKey(row["id"], row["dbid"])
            visible = self.entry_count(key)
            out.append({
                "id": key.id, "dbid": key.dbid,
                "name": row["name"], "owner": row["owner"],
                "entryCount": visible,
                "unsyncedCount": self.unsynced_count(key),
                "lastPulled": self.last_pulled(key),
                "lastSyncAt": row["last_sync_ms"],
            })
        return out

    def touch_project_sync(self, key: GlobalKey) -> None:
        with self._txn() as c:
            c.execute("UPDATE _projects SET last_sync_ms = ? WHERE id = ? AND dbid = ?",
                      (self._now_ms(), key.id, key.dbid))

    def last_pulled(self, project: GlobalKey) -> int:
        with self._lock:
            row = self._conn.execute(
                "SELECT stamp FROM _last_pulled WHERE project_id = ? AND project_dbid = ?",
                (project.id, project.dbid)).fetchone()
        return 0 if row is None else row["stamp"]

    def set_last_pulled(self, project: GlobalKey, stamp: int) -> None:
        with self._txn() as c:
            c.execute("INSERT INTO _last_pulled (project_id, project_dbid, stamp) "
                      "VALUES (?, ?, ?) ON CONFLICT(project_id, project_dbid) "
                      "DO UPDATE SET stamp = excluded.stamp",
                      (project.id, project.dbid, stamp))

    # -- identity re-keying ----------------------------------------------------

    def rekey_unsynced(self, new_dbid: int) -> int:
        """Give every not-yet-synchronized row minted under the store's old
        Database ID a fresh key under `new_dbid`, and follow every
        cross-link that pointed at a re-keyed row. Rows the server already
        owns keep their keys."""
        old_dbid = self.database_id
        if old_dbid is None:
            return 0
        key_map: dict[GlobalKey, GlobalKey] = {}
        with self._txn() as c:
            counter = int(self._get_meta("id_counter", "0"))
            for mask in self.mask_names():
                rows = c.execute(
                    f"SELECT _id FROM {_table(mask)} WHERE _dbid = ? AND _status != ? "
                    "ORDER BY _id",
                    (old_dbid, SyncStatus.SYNCHRONIZED.value)).fetchall()
                for row in rows:
                    counter += 1
                    old = GlobalKey(row["_id"], old_dbid)
                    key_map[old] = GlobalKey(counter, new_dbid)
                    c.execute(f"UPDATE {_table(mask)} SET _id = ?, _dbid = ? "
                              "WHERE _id = ? AND _dbid = ?",
                              (counter, new_dbid, old.id, old_dbid))
                    c.execute("UPDATE _conflicts SET id = ?, dbid = ? "
                              "WHERE mask = ? AND id = ? AND dbid = ?",
                              (counter, new_dbid, mask, old.id, old_dbid))
            self._set_meta(c, "id_counter", str(counter))
            if key_map:
                self._rewrite_links(c, key_map)
        return len(key_map)

    def _rewrite_links(self, c, key_map: dict[GlobalKey, GlobalKey]) -> None:
        for mask in self.mask_names():
            link_fields = [name for name, kind in self.catalog_fields(mask)
                           if kind.startswith("crosslink:")]
            for field in link_fields:
                rows = c.execute(
                    f"SELECT _id, _dbid, _status, {_col(field)} AS v FROM {_table(mask)} "
                    f"WHERE {_col(field)} IS NOT NULL").fetchall()
                for row in rows:
                    value = bookmod.field_value_from_json(json.loads(row["v"]))
                    target = key_map.get(value.key)
                    if target is None:
                        continue
                    new_value = model.CrossLink(value.target_mask, target)
                    status = SyncStatus(row["_status"])
                    if status is SyncStatus.SYNCHRONIZED:
                        # the link genuinely changed; it must be pushed again
                        status = SyncStatus.CHANGED_LOCALLY
                    c.execute(
                        f"UPDATE {_table(mask)} SET {_col(field)} = ?, _status = ?, "
                        "_modified_ms = ? WHERE _id = ? AND _dbid = ?",
                        (json.dumps(bookmod.field_value_to_json(new_value)), status.value,
                         self._now_ms(), row["_id"], row["_dbid"]))
