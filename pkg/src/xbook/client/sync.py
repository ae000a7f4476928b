"""Session facade and the project synchronization driver.

Synchronization is push-then-pull per project: local changes (edits and
tombstones) go up first; commits adopt the server stamp, conflicts store
the server row alongside the local one for later resolution. Then
everything newer than the last pulled stamp comes down; rows that still
carry local changes are never overwritten by a pull.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .. import model, wire
from ..model import Entry, GlobalKey, SyncEvent, SyncStatus
from ..transport import call
from ..server.wire_api import OUTCOME_COMMITTED, OUTCOME_CONFLICT
from .errors import ClientError, IdentityPending, MigrationsPending, UnknownEntry, VersionAhead
from .store import LocalStore

log = logging.getLogger("xbook.client")


class ServerSession:
    """Typed client-side view of the server: wire plumbing stays in here."""

    def __init__(self, transport, token: bytes = b""):
        self.transport = transport
        self.token = token
        self.user_id: int | None = None

    def _call(self, request_type: int, payload=()) -> tuple[wire.WireValue, ...]:
        token = b"" if request_type in wire.TOKENLESS else self.token
        return call(self.transport, wire.Message(request_type, token, tuple(payload)))

    # -- accounts ----------------------------------------------------------

    def register(self, username: str, first_name: str, last_name: str,
                 email: str, password: str) -> int:
        (user_id,) = self._call(wire.RequestType.REGISTER, [
            wire.text(username), wire.text(first_name), wire.text(last_name),
            wire.text(email), wire.text(password)])
        return user_id.value

    def login(self, username: str, password: str) -> bytes:
        token, user_id, _expires = self._call(wire.RequestType.LOGIN, [
            wire.text(username), wire.text(password)])
        self.token = token.value
        self.user_id = user_id.value
        return self.token

    def change_password(self, old: str, new: str) -> None:
        self._call(wire.RequestType.CHANGE_PASSWORD, [wire.text(old), wire.text(new)])

    def reset_password(self, email: str) -> None:
        self._call(wire.RequestType.RESET_PASSWORD, [wire.text(email)])

    # -- identity and schema -------------------------------------------------

    def issue_database_id(self) -> int:
        (dbid,) = self._call(wire.RequestType.ISSUE_DBID)
        return dbid.value

    def required_version(self) -> int:
        (version,) = self._call(wire.RequestType.GET_VERSION)
        return version.value

    def migrations_from(self, from_version: int) -> list[model.Migration]:
        (migrations,) = self._call(wire.RequestType.GET_MIGRATIONS,
                                   [wire.int64(from_version)])
        return [wire.migration_from_wire(v) for v in migrations.value]

    def code_tables_newer(self, known: dict[str, int]) -> list[model.CodeTable]:
        known_wire = wire.mapping((wire.text(name), wire.int64(version))
                                  for name, version in known.items())
        (tables,) = self._call(wire.RequestType.GET_CODETABLES, [known_wire])
        return [wire.codetable_from_wire(v) for v in tables.value]

    # -- projects --------------------------------------------------------------

    def list_projects(self) -> list[tuple[model.Project, int, int]]:
        (items,) = self._call(wire.RequestType.LIST_PROJECTS)
        out = []
        for item in items.value:
            project, count, max_stamp = item.value
            out.append((wire.project_from_wire(project), count.value, max_stamp.value))
        return out

    def create_project(self, name: str) -> model.Project:
        (project,) = self._call(wire.RequestType.CREATE_PROJECT, [wire.text(name)])
        return wire.project_from_wire(project)

    def set_rights(self, project_key: GlobalKey, user_id: int, right: model.Right) -> None:
        self._call(wire.RequestType.SET_RIGHTS, [
            wire.key_to_wire(project_key), wire.int64(user_id), wire.int64(int(right))])

    # -- synchronization -----------------------------------------------------------

    def push(self, project_key: GlobalKey,
             entries: list[Entry]) -> list[tuple[GlobalKey, int | None, Entry | None]]:
        """Returns (key, stamp, None) per commit and (key, None, server row)
        per conflict, in push order."""
        (outcomes,) = self._call(wire.RequestType.PUSH, [
            wire.key_to_wire(project_key),
            wire.array(wire.entry_to_wire(e) for e in entries)])
        out = []
        for item in outcomes.value:
            key_v, kind, detail = item.value
            key = wire.key_from_wire(key_v)
            if kind.value == OUTCOME_COMMITTED:
                out.append((key, detail.value, None))
            elif kind.value == OUTCOME_CONFLICT:
                out.append((key, None, wire.entry_from_wire(detail)))
            else:
                raise ClientError(f"unknown push outcome {kind.value}")
        return out

    def pull(self, project_key: GlobalKey, since: int) -> tuple[list[Entry], int]:
        entries, max_stamp = self._call(wire.RequestType.PULL, [
            wire.key_to_wire(project_key), wire.int64(since)])
        return ([wire.entry_from_wire(v) for v in entries.value], max_stamp.value)


@dataclass
class SyncReport:
    pushed: int = 0
    pulled: int = 0
    conflicts: int = 0


def sync_project(store: LocalStore, session: ServerSession,
                 project: GlobalKey) -> SyncReport:
    """Synchronize one project: push local changes, then pull.

    Requires a settled identity and a store at the server's required
    schema version. A transport failure is safe at any point: pushes are
    per-entry idempotent to retry, and the pulled stamp is only recorded
    after the pull applied.
    """
    if store.identity_pending:
        raise IdentityPending("store identity is pending; connect the identity "
                              "guard before synchronizing")
    with store.sync_lock:
        required = session.required_version()
        if required > store.schema_version:
            raise MigrationsPending(f"server requires schema {required}, "
                                    f"store is at {store.schema_version}")
        if required < store.schema_version:
            raise VersionAhead(f"store schema {store.schema_version} is ahead of "
                               f"the server's {required}")
        report = SyncReport()

        to_push = store.rows_to_push(project)
        if to_push:
            pushed_rows = {e.key: e for e in to_push}
            for key, stamp, theirs in session.push(project, to_push):
                if stamp is not None:
                    store.mark_committed(key, stamp, pushed=pushed_rows[key])
                    report.pushed += 1
                else:
                    store.apply_conflict(key, theirs)
                    report.conflicts += 1

        incoming, max_stamp = session.pull(project, store.last_pulled(project))
        for entry in incoming:
            if store.apply_remote(entry):
                report.pulled += 1
        store.set_last_pulled(project, max_stamp)
        store.touch_project_sync(project)
        log.info("synchronized %s: %s", project, report)
        return report


KEEP_MINE = "KEEP_MINE"
TAKE_THEIRS = "TAKE_THEIRS"


def resolve_conflict(store: LocalStore, key: GlobalKey, choice: str) -> Entry:
    """Settle a conflicted entry.

    KEEP_MINE keeps the local values and adopts the server's version
    stamp, so the next push wins unless the server moved again.
    TAKE_THEIRS replaces the local row with the server row.
    """
    pair = store.get_conflict(key)
    if pair is None:
        raise UnknownEntry(f"entry {key} is not conflicted")
    mine, theirs = pair
    if choice == KEEP_MINE:
        mine.version = theirs.version
        mine.status = SyncStatus.CHANGED_LOCALLY
        store.put_row(mine)
        store.drop_conflict(key)
        return mine
    if choice == TAKE_THEIRS:
        theirs = theirs.copy()
        theirs.status = model.transition_status(SyncStatus.CHANGED_LOCALLY,
                                                SyncEvent.SYNC_COMMIT)
        store.put_row(theirs)
        store.drop_conflict(key)
        return theirs
    raise ClientError(f"unknown choice {choice!r}")


def update_code_tables(store: LocalStore, session: ServerSession) -> int:
    """Refresh stale code tables from the server; whole tables are
    replaced in one transaction, partial refresh cannot happen."""
    fresh = session.code_tables_newer(store.code_table_versions())
    if fresh:
        store.replace_code_tables(fresh)
    return len(fresh)


def refresh_projects(store: LocalStore, session: ServerSession) -> int:
    """Cache the server's project list locally so the sync panel and the
    local API work offline."""
    listed = session.list_projects()
    store.upsert_projects(listed)
    return len(listed)
