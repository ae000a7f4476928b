"""Server-side persistence.

A single SQLite database holds accounts, sessions, the Database-ID
counter, schema/migration and code-table masters, projects and rights,
the replicated entries, and the per-project commit log. Everything the
server knows about a Book lives in data (sync_meta, code_tables,
migrations); the server code itself is Book-agnostic.

Connections are handed out by a small bounded pool; writers use immediate
transactions.
"""

from __future__ import annotations

import json
import queue
import sqlite3
import threading
from contextlib import contextmanager

from .. import book as bookmod
from .. import model

_SCHEMA = """
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS users (
    user_id INTEGER PRIMARY KEY AUTOINCREMENT,
    username TEXT NOT NULL UNIQUE,
    first_name TEXT NOT NULL,
    last_name TEXT NOT NULL,
    email TEXT NOT NULL UNIQUE,
    pw_hash BLOB NOT NULL,
    salt BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    token BLOB PRIMARY KEY,
    user_id INTEGER NOT NULL,
    expires_ms INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS reset_codes (
    user_id INTEGER NOT NULL,
    code_hash BLOB NOT NULL,
    expires_ms INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS sync_meta (
    mask TEXT PRIMARY KEY,
    synced_fields TEXT NOT NULL,
    enabled INTEGER NOT NULL DEFAULT 1
);
CREATE TABLE IF NOT EXISTS code_tables (
    name TEXT PRIMARY KEY,
    version INTEGER NOT NULL,
    rows TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS migrations (
    from_version INTEGER PRIMARY KEY,
    statements TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS projects (
    id INTEGER NOT NULL,
    dbid INTEGER NOT NULL,
    name TEXT NOT NULL,
    owner INTEGER NOT NULL,
    PRIMARY KEY (id, dbid)
);
CREATE TABLE IF NOT EXISTS rights (
    project_id INTEGER NOT NULL,
    project_dbid INTEGER NOT NULL,
    user_id INTEGER NOT NULL,
    right INTEGER NOT NULL,
    PRIMARY KEY (project_id, project_dbid, user_id)
);
CREATE TABLE IF NOT EXISTS entries (
    mask TEXT NOT NULL,
    id INTEGER NOT NULL,
    dbid INTEGER NOT NULL,
    project_id INTEGER NOT NULL,
    project_dbid INTEGER NOT NULL,
    version INTEGER NOT NULL,
    deleted INTEGER NOT NULL,
    modified_ms INTEGER NOT NULL,
    values_json TEXT NOT NULL,
    PRIMARY KEY (mask, id, dbid)
);
CREATE INDEX IF NOT EXISTS entries_by_project
    ON entries (project_id, project_dbid, version);
CREATE TABLE IF NOT EXISTS commit_log (
    project_id INTEGER NOT NULL,
    project_dbid INTEGER NOT NULL,
    stamp INTEGER NOT NULL,
    mask TEXT NOT NULL,
    entry_id INTEGER NOT NULL,
    entry_dbid INTEGER NOT NULL,
    PRIMARY KEY (project_id, project_dbid, stamp)
);
"""


class ServerStorage:
    def __init__(self, path: str, pool_size: int = 4):
        self.path = path
        # a private in-memory database cannot be shared across connections
        self.pool_size = 1 if path == ":memory:" else max(1, pool_size)
        self._pool: queue.Queue[sqlite3.Connection] = queue.Queue()
        self._all: list[sqlite3.Connection] = []
        self._lock = threading.Lock()
        for _ in range(self.pool_size):
            conn = self._connect()
            self._pool.put(conn)
            self._all.append(conn)
        with self.conn() as c:
            c.executescript(_SCHEMA)

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path, timeout=30, check_same_thread=False,
                               isolation_level=None)
        conn.row_factory = sqlite3.Row
        conn.execute("PRAGMA foreign_keys = ON")
        if self.path != ":memory:":
            conn.execute("PRAGMA journal_mode = WAL")
        return conn

    @contextmanager
    def conn(self):
        c = self._pool.get()
        try:
            yield c
        finally:
            self._pool.put(c)

    @contextmanager
    def write(self):
        """One immediate transaction on a pooled connection."""
        with self.conn() as c:
            c.execute("BEGIN IMMEDIATE")
            try:
                yield c
            except BaseException:
                c.execute("ROLLBACK")
                raise
            c.execute("COMMIT")

    def close(self) -> None:
        with self._lock:
            for c in self._all:
                c.close()
            self._all.clear()

    # -- meta helpers -------------------------------------------------------

    @staticmethod
    def get_meta(c: sqlite3.Connection, key: str, default: str | None = None) -> str | None:
        row = c.execute("SELECT value FROM meta WHERE key = ?", (key,)).fetchone()
        return default if row is None else row["value"]

    @staticmethod
    def set_meta(c: sqlite3.Connection, key: str, value: str) -> None:
        c.execute("INSERT INTO meta (key, value) VALUES (?, ?) "
                  "ON CONFLICT(key) DO UPDATE SET value = excluded.value", (key, value))

    # -- row mapping --------------------------------------------------------

    @staticmethod
    def entry_from_row(row: sqlite3.Row) -> model.Entry:
        return model.Entry(
            key=model.GlobalKey(row["id"], row["dbid"]),
            mask=row["mask"],
            project=model.GlobalKey(row["project_id"], row["project_dbid"]),
            values=bookmod.values_from_json(json.loads(row["values_json"])),
            version=row["version"],
            status=model.SyncStatus.SYNCHRONIZED,
            modified_ms=row["modified_ms"],
            deleted=bool(row["deleted"]))

    @staticmethod
    def codetable_from_row(row: sqlite3.Row) -> model.CodeTable:
        rows = {int(cid): texts for cid, texts in json.loads(row["rows"]).items()}
        return model.CodeTable(row["name"], row["version"], rows)

    @staticmethod
    def migration_from_row(row: sqlite3.Row) -> model.Migration:
        stmts = tuple(model.Statement(s["op"], s["params"])
                      for s in json.loads(row["statements"]))
        return model.Migration(row["from_version"], stmts)

    @staticmethod
    def migration_to_json(m: model.Migration) -> str:
        return json.dumps([{"op": s.op, "params": s.params} for s in m.statements])
