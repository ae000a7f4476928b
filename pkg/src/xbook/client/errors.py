"""Client-side error types."""

from __future__ import annotations


class ClientError(Exception):
    pass


class ValidationFailed(ClientError):
    """Entry rejected; carries the per-field states."""

    def __init__(self, states):
        self.states = states
        bad = {name: s.value for name, s in states.items() if s.value != "ok"}
        super().__init__(f"validation failed: {bad}")


class UnknownEntry(ClientError):
    pass


class MigrationsPending(ClientError):
    """Store schema is older than the Book requires."""


class VersionAhead(ClientError):
    """Store schema is newer than the counterpart supports."""


class MigrationError(ClientError):
    def __init__(self, message: str, at_version: int | None = None):
        super().__init__(message if at_version is None
                         else f"{message} (store remains at version {at_version})")
        self.at_version = at_version


class IdentityPending(ClientError):
    """Database-ID mismatch detected while offline: local editing may
    continue, synchronization must wait for the server."""
