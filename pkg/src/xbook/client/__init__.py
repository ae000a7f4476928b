"""Offline-capable client: local store, identity guard, migration runner,
code-table updater, synchronization driver, and the local control API."""

from .errors import (  # noqa: F401
    ClientError,
    IdentityPending,
    MigrationError,
    MigrationsPending,
    UnknownEntry,
    ValidationFailed,
    VersionAhead,
)
from .store import LocalStore  # noqa: F401
