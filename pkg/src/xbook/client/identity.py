"""Database-ID guard.

Every store carries the Database ID that makes its keys globally unique.
A copy lives OUTSIDE the store in a per-user install marker; at startup
the two are compared. A mismatch means the store file was moved or
restored from a backup onto an installation it does not belong to, so a
fresh ID is requested and every not-yet-synchronized row is re-keyed
under it. Rows the server already committed keep their keys.
"""

from __future__ import annotations

import logging
from pathlib import Path

from .. import paths
from .errors import ClientError, IdentityPending

log = logging.getLogger("xbook.client")


class InstallMarker:
    """The out-of-store Database-ID copy: one per (machine user, Book).

    On systems with a native per-user configuration registry that registry
    would be the natural place; this implementation uses a dot-file in the
    user's configuration directory, which behaves the same way.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)

    @classmethod
    def for_book(cls, book_id: str, env: dict[str, str] | None = None) -> "InstallMarker":
        return cls(paths.config_home(env) / "markers" / f"{book_id}.dbid")

    def read(self) -> int | None:
        try:
            return int(self.path.read_text("utf-8").strip())
        except FileNotFoundError:
            return None
        except ValueError as e:
            raise ClientError(f"corrupt install marker {self.path}: {e}") from e

    def write(self, dbid: int) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(f"{dbid}\n", "utf-8")


def ensure_database_id(store, marker: InstallMarker, session=None) -> int:
    """Return the store's confirmed Database ID.

    When store and marker agree, that ID is confirmed without any network
    traffic (the offline-safe path). Any disagreement requests a fresh ID
    from the server, re-keys unsynchronized rows minted under the old
    store ID, and records the new ID in BOTH the store and the marker.

    Without a server connection a disagreement raises IdentityPending:
    local editing may continue under the old ID, synchronization is
    refused until the identity is settled.
    """
    stored = store.database_id
    marked = marker.read()
    if stored is not None and stored == marked:
        if store.identity_pending:
            store.set_identity_pending(False)
        return stored

    if session is None:
        if stored is None:
            raise ClientError("store has no Database ID yet; the first start "
                              "needs a server connection")
        store.set_identity_pending(True)
        raise IdentityPending(
            f"store Database ID {stored} does not match install marker "
            f"{marked}; will re-key on next server contact")

    fresh = session.issue_database_id()
    rekeyed = store.rekey_unsynced(fresh)
    if rekeyed:
        log.info("re-keyed %d unsynchronized rows from Database ID %s to %s",
                 rekeyed, stored, fresh)
    store.set_database_id(fresh)
    marker.write(fresh)
    store.set_identity_pending(False)
    return fresh
