"""Server operations: accounts, identity issuance, schema distribution,
and the push/pull synchronization core.

Concurrency contract: requests run in parallel; the only exclusive
sections are the per-project commit-stamp counter during a push and the
Database-ID counter. Commits within one project get gap-free stamps
1,2,3,... recorded in a commit log, which makes incremental pull a single
integer comparison.

Push conflicts are reported to the caller and never merged here: a pushed
entry commits only when the server row is absent or still at the version
the client based its change on; otherwise the current server row is
returned untouched.
"""

from __future__ import annotations

import hashlib
import json
import logging
import secrets
import threading
import time
from dataclasses import dataclass

from .. import book as bookmod
from .. import model
from .storage import ServerStorage

log = logging.getLogger("xbook.server")

TOKEN_BYTES = 32
DEFAULT_TOKEN_TTL_S = 24 * 3600
MIN_PASSWORD_LEN = 8
RESET_CODE_TTL_S = 3600


class ServerError(Exception):
    """Operation failure reported to the client as an ERROR reply."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def bad_request(msg: str) -> ServerError:
    return ServerError(400, msg)


def unauthorized() -> ServerError:
    return ServerError(401, "unauthorized")


def forbidden(msg: str = "forbidden") -> ServerError:
    return ServerError(403, msg)


def not_found(msg: str) -> ServerError:
    return ServerError(404, msg)


def conflict_error(msg: str) -> ServerError:
    return ServerError(409, msg)


@dataclass(frozen=True)
class PushOutcome:
    key: model.GlobalKey
    committed: bool
    stamp: int | None = None
    server_entry: model.Entry | None = None


class SyncServer:
    """All server operations over one storage. Thread-safe."""

    def __init__(self, storage: ServerStorage, *,
                 token_ttl_s: int = DEFAULT_TOKEN_TTL_S,
                 clock=time.time,
                 scrypt_cost: int = 2**14,
                 reset_delivery=None):
        self.storage = storage
        self.token_ttl_s = token_ttl_s
        self.clock = clock
        self.scrypt_cost = scrypt_cost
        self.reset_delivery = reset_delivery or self._log_reset_code
        self._dbid_lock = threading.Lock()
        self._project_locks: dict[tuple[int, int], threading.Lock] = {}
        self._project_locks_guard = threading.Lock()

    # -- helpers -------------------------------------------------------------

    def _now_ms(self) -> int:
        return int(self.clock() * 1000)

    def _hash_password(self, password: str, salt: bytes) -> bytes:
        return hashlib.scrypt(password.encode("utf-8"), salt=salt,
                              n=self.scrypt_cost, r=8, p=1, dklen=32)

    def _project_lock(self, key: model.GlobalKey) -> threading.Lock:
        with self._project_locks_guard:
            return self._project_locks.setdefault((key.id, key.dbid), threading.Lock())

    @staticmethod
    def _log_reset_code(email: str, code: str) -> None:
        # default delivery for test mode; production plugs in a real sender
        log.info("password reset code for %s: %s", email, code)

    def _auth(self, token: bytes) -> int:
        if not token:
            raise unauthorized()
        with self.storage.conn() as c:
            row = c.execute("SELECT user_id, expires_ms FROM sessions WHERE token = ?",
                            (token,)).fetchone()
        if row is None or row["expires_ms"] <= self._now_ms():
            raise unauthorized()
        return row["user_id"]

    def _project(self, c, key: model.GlobalKey) -> model.Project:
        row = c.execute("SELECT * FROM projects WHERE id = ? AND dbid = ?",
                        (key.id, key.dbid)).fetchone()
        if row is None:
            raise not_found(f"no project {key}")
        rights = {r["user_id"]: model.Right(r["right"]) for r in c.execute(
            "SELECT user_id, right FROM rights WHERE project_id = ? AND project_dbid = ?",
            (key.id, key.dbid))}
        return model.Project(key, row["name"], row["owner"], rights)

    def _require_right(self, c, key: model.GlobalKey, user_id: int,
                       needed: model.Right) -> model.Project:
        project = self._project(c, key)
        if project.right_of(user_id) < needed:
            raise forbidden(f"{needed.name} right required")
        return project

    # -- accounts ------------------------------------------------------------

    def register(self, username: str, first_name: str, last_name: str,
                 email: str, password: str) -> int:
        if len(password) < MIN_PASSWORD_LEN:
            raise bad_request(f"password must have at least {MIN_PASSWORD_LEN} characters")
        if not username or not email:
            raise bad_request("username and email are required")
        salt = secrets.token_bytes(16)
        pw_hash = self._hash_password(password, salt)
        with self.storage.write() as c:
            taken = c.execute("SELECT 1 FROM users WHERE username = ? OR email = ?",
                              (username, email)).fetchone()
            if taken:
                raise conflict_error("username or email already registered")
            cur = c.execute(
                "INSERT INTO users (username, first_name, last_name, email, pw_hash, salt) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (username, first_name, last_name, email, pw_hash, salt))
            return cur.lastrowid

    def _user_by_name(self, username: str) -> model.User | None:
        with self.storage.conn() as c:
            row = c.execute("SELECT * FROM users WHERE username = ?",
                            (username,)).fetchone()
        return None if row is None else self._user_from_row(row)

    @staticmethod
    def _user_from_row(row) -> model.User:
        return model.User(row["user_id"], row["username"], row["first_name"],
                          row["last_name"], row["email"], row["pw_hash"], row["salt"])

    def login(self, username: str, password: str) -> tuple[bytes, int, int]:
        """Returns (token, user id, expiry ms). Credential failures are
        uniform: no hint whether the username or the password was wrong."""
        user = self._user_by_name(username)
        if user is None or not secrets.compare_digest(
                self._hash_password(password, user.salt), user.password_hash):
            raise unauthorized()
        token = secrets.token_bytes(TOKEN_BYTES)
        expires_ms = self._now_ms() + self.token_ttl_s * 1000
        with self.storage.write() as c:
            c.execute("DELETE FROM sessions WHERE expires_ms <= ?", (self._now_ms(),))
            c.execute("INSERT INTO sessions (token, user_id, expires_ms) VALUES (?, ?, ?)",
                      (token, user.user_id, expires_ms))
        return token, user.user_id, expires_ms

    def change_password(self, token: bytes, old: str, new: str) -> None:
        user_id = self._auth(token)
        if len(new) < MIN_PASSWORD_LEN:
            raise bad_request(f"password must have at least {MIN_PASSWORD_LEN} characters")
        with self.storage.write() as c:
            user = self._user_from_row(c.execute(
                "SELECT * FROM users WHERE user_id = ?", (user_id,)).fetchone())
            if not secrets.compare_digest(self._hash_password(old, user.salt),
                                          user.password_hash):
                raise unauthorized()
            salt = secrets.token_bytes(16)
            c.execute("UPDATE users SET pw_hash = ?, salt = ? WHERE user_id = ?",
                      (self._hash_password(new, salt), salt, user_id))
            # every other session of this account is out after a password change
            c.execute("DELETE FROM sessions WHERE user_id = ? AND token != ?",
                      (user_id, token))

    def reset_password(self, email: str) -> None:
        """Always succeeds, so callers cannot probe which addresses exist."""
        with self.storage.conn() as c:
            row = c.execute("SELECT user_id FROM users WHERE email = ?", (email,)).fetchone()
        if row is None:
            return
        code = secrets.token_urlsafe(9)
        with self.storage.write() as c:
            c.execute("DELETE FROM reset_codes WHERE user_id = ?", (row["user_id"],))
            c.execute("INSERT INTO reset_codes (user_id, code_hash, expires_ms) "
                      "VALUES (?, ?, ?)",
                      (row["user_id"], hashlib.sha256(code.encode()).digest(),
                       self._now_ms() + RESET_CODE_TTL_S * 1000))
        self.reset_delivery(email, code)

    # -- identity ------------------------------------------------------------

    def issue_database_id(self, token: bytes) -> int:
        """A fresh, strictly increasing Database ID. Never reused; the
        client-side guard decides when a new one is needed."""
        self._auth(token)
        return self._next_dbid()

    def _next_dbid(self) -> int:
        with self._dbid_lock:
            with self.storage.write() as c:
                current = int(ServerStorage.get_meta(c, "dbid_counter", "0"))
                ServerStorage.set_meta(c, "dbid_counter", str(current + 1))
                return current + 1

    def _server_dbid(self, c) -> int:
        """The server's own store identity, used to mint project keys.
        Issued lazily from the same counter as client Database IDs."""
        value = ServerStorage.get_meta(c, "server_dbid")
        if value is not None:
            return int(value)
        current = int(ServerStorage.get_meta(c, "dbid_counter", "0"))
        ServerStorage.set_meta(c, "dbid_counter", str(current + 1))
        ServerStorage.set_meta(c, "server_dbid", str(current + 1))
        return current + 1

    # -- schema distribution ---------------------------------------------------

    def required_version(self) -> int:
        with self.storage.conn() as c:
            return int(ServerStorage.get_meta(c, "required_version", "1"))

    def migrations_from(self, token: bytes, from_version: int) -> list[model.Migration]:
        self._auth(token)
        required = self.required_version()
        if from_version > required:
            raise conflict_error(
                f"client schema {from_version} is ahead of required {required}")
        with self.storage.conn() as c:
            rows = c.execute(
                "SELECT * FROM migrations WHERE from_version >= ? AND from_version < ? "
                "ORDER BY from_version", (from_version, required)).fetchall()
        return [ServerStorage.migration_from_row(r) for r in rows]

    def code_tables_newer(self, token: bytes, known: dict[str, int]) -> list[model.CodeTable]:
        """Full snapshots of exactly the tables newer than the caller's
        versions; table names the server does not know are ignored."""
        self._auth(token)
        with self.storage.conn() as c:
            rows = c.execute("SELECT * FROM code_tables ORDER BY name").fetchall()
        return [ServerStorage.codetable_from_row(r) for r in rows
                if r["version"] > known.get(r["name"], 0)]

    # -- projects and rights -----------------------------------------------------

    def create_project(self, token: bytes, name: str) -> model.Project:
        user_id = self._auth(token)
        if not name.strip():
            raise bad_request("project name must not be empty")
        with self.storage.write() as c:
            dbid = self._server_dbid(c)
            current = int(ServerStorage.get_meta(c, "project_counter", "0")) + 1
            ServerStorage.set_meta(c, "project_counter", str(current))
            c.execute("INSERT INTO projects (id, dbid, name, owner) VALUES (?, ?, ?, ?)",
                      (current, dbid, name, user_id))
            return model.Project(model.GlobalKey(current, dbid), name, user_id)

    def list_projects(self, token: bytes) -> list[tuple[model.Project, int, int]]:
        """(project, visible entry count, newest stamp) for every project
        the caller can read."""
        user_id = self._auth(token)
        out = []
        with self.storage.conn() as c:
            rows = c.execute(
                "SELECT p.id, p.dbid FROM projects p LEFT JOIN rights r "
                "ON r.project_id = p.id AND r.project_dbid = p.dbid AND r.user_id = ? "
                "WHERE p.owner = ? OR r.right >= ? ORDER BY p.id",
                (user_id, user_id, int(model.Right.READ))).fetchall()
            for row in rows:
                key = model.GlobalKey(row["id"], row["dbid"])
                project = self._project(c, key)
                count = c.execute(
                    "SELECT COUNT(*) AS n FROM entries WHERE project_id = ? AND "
                    "project_dbid = ? AND deleted = 0", (key.id, key.dbid)).fetchone()["n"]
                out.append((project, count, self._max_stamp(c, key)))
        return out

    def set_rights(self, token: bytes, project_key: model.GlobalKey,
                   user_id: int, right: model.Right) -> None:
        caller = self._auth(token)
        with self.storage.write() as c:
            project = self._project(c, project_key)
            if project.owner != caller:
                raise forbidden("only the owner may change rights")
            if user_id == project.owner:
                raise bad_request("the owner's rights are implicit")
            if c.execute("SELECT 1 FROM users WHERE user_id = ?", (user_id,)).fetchone() is None:
                raise not_found(f"no user {user_id}")
            c.execute("DELETE FROM rights WHERE project_id = ? AND project_dbid = ? "
                      "AND user_id = ?", (project_key.id, project_key.dbid, user_id))
            if right is not model.Right.NONE:
                c.execute("INSERT INTO rights (project_id, project_dbid, user_id, right) "
                          "VALUES (?, ?, ?, ?)",
                          (project_key.id, project_key.dbid, user_id, int(right)))

    # -- synchronization -----------------------------------------------------

    def _sync_meta(self, c) -> dict[str, tuple[set[str], bool]]:
        return {row["mask"]: (set(json.loads(row["synced_fields"])), bool(row["enabled"]))
                for row in c.execute("SELECT * FROM sync_meta")}

    def _max_stamp(self, c, project_key: model.GlobalKey) -> int:
        row = c.execute(
            "SELECT MAX(stamp) AS s FROM commit_log WHERE project_id = ? AND project_dbid = ?",
            (project_key.id, project_key.dbid)).fetchone()
        return row["s"] or 0

    def push(self, token: bytes, project_key: model.GlobalKey,
             entries: list[model.Entry]) -> list[PushOutcome]:
        """Commit or report a conflict for each pushed entry.

        An entry commits when the server row is absent or its version
        equals the entry's version; the commit assigns the project's next
        stamp as the new version. Tombstones commit like edits. A conflict
        returns the current server row and changes nothing.
        """
        user_id = self._auth(token)
        with self.storage.conn() as c:
            self._require_right(c, project_key, user_id, model.Right.WRITE)
            meta = self._sync_meta(c)
        for e in entries:
            if e.project != project_key:
                raise bad_request(f"entry {e.key} does not belong to project {project_key}")
            if e.mask not in meta:
                raise bad_request(f"unknown mask {e.mask!r}")
            fields, enabled = meta[e.mask]
            if not enabled:
                raise bad_request(f"mask {e.mask!r} is not enabled for synchronization")
            outside = set(e.values) - fields
            if outside:
                raise bad_request(
                    f"fields outside the synchronized set for {e.mask!r}: {sorted(outside)}")

        outcomes: list[PushOutcome] = []
        with self._project_lock(project_key):
            with self.storage.write() as c:
                stamp = self._max_stamp(c, project_key)
                for e in entries:
                    row = c.execute(
                        "SELECT * FROM entries WHERE mask = ? AND id = ? AND dbid = ?",
                        (e.mask, e.key.id, e.key.dbid)).fetchone()
                    if row is not None and row["version"] != e.version:
                        outcomes.append(PushOutcome(
                            e.key, committed=False,
                            server_entry=ServerStorage.entry_from_row(row)))
                        continue
                    stamp += 1
                    c.execute(
                        "INSERT INTO entries (mask, id, dbid, project_id, project_dbid, "
                        "version, deleted, modified_ms, values_json) "
                        "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?) "
                        "ON CONFLICT(mask, id, dbid) DO UPDATE SET version = excluded.version, "
                        "deleted = excluded.deleted, modified_ms = excluded.modified_ms, "
                        "values_json = excluded.values_json",
                        (e.mask, e.key.id, e.key.dbid, project_key.id, project_key.dbid,
                         stamp, int(e.deleted), e.modified_ms,
                         json.dumps(bookmod.values_to_json(e.values), sort_keys=True)))
                    c.execute(
                        "INSERT INTO commit_log (project_id, project_dbid, stamp, mask, "
                        "entry_id, entry_dbid) VALUES (?, ?, ?, ?, ?, ?)",
                        (project_key.id, project_key.dbid, stamp, e.mask,
                         e.key.id, e.key.dbid))
                    outcomes.append(PushOutcome(e.key, committed=True, stamp=stamp))
        return outcomes

    def pull(self, token: bytes, project_key: model.GlobalKey,
             since_stamp: int) -> tuple[list[model.Entry], int]:
        """Every row (tombstones included) newer than since_stamp, plus the
        project's newest stamp, as one consistent snapshot."""
        user_id = self._auth(token)
        with self.storage.conn() as c:
            self._require_right(c, project_key, user_id, model.Right.READ)
            meta = self._sync_meta(c)
            rows = c.execute(
                "SELECT * FROM entries WHERE project_id = ? AND project_dbid = ? "
                "AND version > ? ORDER BY version",
                (project_key.id, project_key.dbid, since_stamp)).fetchall()
            max_stamp = self._max_stamp(c, project_key)
        out = []
        for row in rows:
            if row["mask"] not in meta or not meta[row["mask"]][1]:
                continue
            entry = ServerStorage.entry_from_row(row)
            synced_fields = meta[row["mask"]][0]
            entry.values = {k: v for k, v in entry.values.items() if k in synced_fields}
            out.append(entry)
        return out, max_stamp

    # -- administration (CLI, not wire) ---------------------------------------

    def init_from_book(self, descriptor) -> None:
        """Load a Book: sync metadata for every mask, code-table masters,
        the migration chain, and the required schema version. Raising the
        version replays the value-level migration effects on stored rows,
        so old entries keep matching the new schema."""
        with self.storage.write() as c:
            for mask in descriptor.masks:
                c.execute(
                    "INSERT INTO sync_meta (mask, synced_fields, enabled) VALUES (?, ?, 1) "
                    "ON CONFLICT(mask) DO UPDATE SET synced_fields = excluded.synced_fields",
                    (mask.name, json.dumps(mask.field_names())))
            for table in descriptor.code_tables:
                c.execute(
                    "INSERT INTO code_tables (name, version, rows) VALUES (?, ?, ?) "
                    "ON CONFLICT(name) DO UPDATE SET version = excluded.version, "
                    "rows = excluded.rows",
                    (table.name, table.version,
                     json.dumps({str(k): v for k, v in table.rows.items()})))
            for migration in descriptor.migrations:
                c.execute(
                    "INSERT INTO migrations (from_version, statements) VALUES (?, ?) "
                    "ON CONFLICT(from_version) DO UPDATE SET statements = excluded.statements",
                    (migration.from_version, ServerStorage.migration_to_json(migration)))
            current = int(ServerStorage.get_meta(c, "required_version", "1"))
            self._replay_value_migrations(c, current, descriptor.schema_version)
            ServerStorage.set_meta(c, "required_version", str(descriptor.schema_version))

    def set_required_version(self, version: int) -> None:
        with self.storage.write() as c:
            current = int(ServerStorage.get_meta(c, "required_version", "1"))
            self._replay_value_migrations(c, current, version)
            ServerStorage.set_meta(c, "required_version", str(version))

    def _replay_value_migrations(self, c, from_version: int, to_version: int) -> None:
        """Rewrite stored entry values per the transform/drop/copy parts of
        the migration chain; schema-only statements have no server effect."""
        from .. import migrations as shared

        for v in range(from_version, to_version):
            row = c.execute("SELECT * FROM migrations WHERE from_version = ?",
                            (v,)).fetchone()
            if row is None:
                continue
            migration = ServerStorage.migration_from_row(row)
            for stmt in migration.statements:
                if stmt.op in ("add_table", "add_column"):
                    continue
                mask = stmt.params.get("table")
                rows = c.execute("SELECT mask, id, dbid, values_json FROM entries "
                                 "WHERE mask = ?", (mask,)).fetchall()
                for entry_row in rows:
                    values = bookmod.values_from_json(json.loads(entry_row["values_json"]))
                    try:
                        rewritten = shared.apply_value_statement(stmt, mask, values)
                    except shared.TransformError as e:
                        raise conflict_error(
                            f"cannot migrate stored row {entry_row['id']}:"
                            f"{entry_row['dbid']}: {e}") from e
                    c.execute("UPDATE entries SET values_json = ? "
                              "WHERE mask = ? AND id = ? AND dbid = ?",
                              (json.dumps(bookmod.values_to_json(rewritten), sort_keys=True),
                               mask, entry_row["id"], entry_row["dbid"]))

    def add_migration(self, migration: model.Migration) -> None:
        with self.storage.write() as c:
            c.execute("INSERT INTO migrations (from_version, statements) VALUES (?, ?) "
                      "ON CONFLICT(from_version) DO UPDATE SET statements = excluded.statements",
                      (migration.from_version, ServerStorage.migration_to_json(migration)))

    def set_mask_enabled(self, mask: str, enabled: bool) -> None:
        with self.storage.write() as c:
            c.execute("UPDATE sync_meta SET enabled = ? WHERE mask = ?",
                      (int(enabled), mask))

    def update_code_table(self, table: model.CodeTable) -> None:
        """Replace a code-table master; the version must strictly increase."""
        with self.storage.write() as c:
            row = c.execute("SELECT version FROM code_tables WHERE name = ?",
                            (table.name,)).fetchone()
            if row is not None and table.version <= row["version"]:
                raise conflict_error(
                    f"code table {table.name} version must exceed {row['version']}")
            c.execute("INSERT INTO code_tables (name, version, rows) VALUES (?, ?, ?) "
                      "ON CONFLICT(name) DO UPDATE SET version = excluded.version, "
                      "rows = excluded.rows",
                      (table.name, table.version,
                       json.dumps({str(k): v for k, v in table.rows.items()})))
