"""Domain types shared by client and server.

Identity, entries, field values, code tables, projects, users, and the
sync-status bookkeeping that drives replication. Everything here is a pure
value type: no persistence, no I/O, safe to copy between threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Union


class ModelError(Exception):
    """Violation of a model invariant."""


class IdentityNotInitialized(ModelError):
    """Key allocation was attempted before a Database ID was assigned."""


class IllegalTransition(ModelError):
    """A sync-status transition outside the legal table."""


@dataclass(frozen=True, order=False)
class GlobalKey:
    """Composite identity: locally assigned id plus the originating store's
    server-issued Database ID. Two stores can never mint equal keys because
    their Database IDs differ.

    Ordering is (dbid, id) lexicographic.
    """

    id: int
    dbid: int

    def __post_init__(self) -> None:
        if self.id < 1 or self.dbid < 1:
            raise ModelError(f"key components must be >= 1, got ({self.id},{self.dbid})")

    def __lt__(self, other: "GlobalKey") -> bool:
        return (self.dbid, self.id) < (other.dbid, other.id)

    def __le__(self, other: "GlobalKey") -> bool:
        return (self.dbid, self.id) <= (other.dbid, other.id)

    def __gt__(self, other: "GlobalKey") -> bool:
        return (self.dbid, self.id) > (other.dbid, other.id)

    def __ge__(self, other: "GlobalKey") -> bool:
        return (self.dbid, self.id) >= (other.dbid, other.id)

    def __str__(self) -> str:
        return f"{self.id}:{self.dbid}"

    @classmethod
    def parse(cls, text: str) -> "GlobalKey":
        """Parse the canonical "id:dbid" form."""
        m = re.fullmatch(r"(\d+):(\d+)", text.strip())
        if m is None:
            raise ModelError(f"not a key: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))


def next_local_key(counter: int, dbid: int | None) -> GlobalKey:
    """Allocate the next key of a local store.

    `counter` is the store's strictly increasing id counter; `dbid` the
    store's assigned Database ID.
    """
    if dbid is None or dbid < 1:
        raise IdentityNotInitialized("store has no Database ID yet")
    if counter < 1:
        raise ModelError("id counter must be >= 1")
    return GlobalKey(counter, dbid)


class SyncStatus(Enum):
    SYNCHRONIZED = "synchronized"
    CHANGED_LOCALLY = "changed_locally"
    DELETED_LOCALLY = "deleted_locally"
    CONFLICTED = "conflicted"


class SyncEvent(Enum):
    LOCAL_EDIT = "local_edit"
    LOCAL_DELETE = "local_delete"
    SYNC_COMMIT = "sync_commit"
    REMOTE_CONFLICT = "remote_conflict"


def transition_status(current: SyncStatus, event: SyncEvent) -> SyncStatus:
    """Deterministic sync-status transition table.

    Edits and deletes may happen in any state; a commit always lands on
    SYNCHRONIZED. A remote conflict is only legal while the row is
    CHANGED_LOCALLY (it is reported during the push of a local change).
    """
    if event is SyncEvent.LOCAL_EDIT:
        return SyncStatus.CHANGED_LOCALLY
    if event is SyncEvent.LOCAL_DELETE:
        return SyncStatus.DELETED_LOCALLY
    if event is SyncEvent.SYNC_COMMIT:
        return SyncStatus.SYNCHRONIZED
    if event is SyncEvent.REMOTE_CONFLICT:
        if current is not SyncStatus.CHANGED_LOCALLY:
            raise IllegalTransition(f"remote_conflict from {current.name}")
        return SyncStatus.CONFLICTED
    raise IllegalTransition(f"unknown event {event!r}")


# ---------------------------------------------------------------------------
# Field values
# ---------------------------------------------------------------------------

_DECIMAL_RE = re.compile(r"-?\d+(\.\d+)?")


@dataclass(frozen=True)
class Text:
    value: str


@dataclass(frozen=True)
class Number:
    """64-bit signed integer."""

    value: int

    def __post_init__(self) -> None:
        if not -(2**63) <= self.value < 2**63:
            raise ModelError("number out of 64-bit range")


@dataclass(frozen=True)
class Decimal:
    """Decimal carried as canonical text so round-trips are bit-exact."""

    text: str

    def __post_init__(self) -> None:
        if _DECIMAL_RE.fullmatch(self.text) is None:
            raise ModelError(f"not a decimal: {self.text!r}")


@dataclass(frozen=True)
class Flag:
    value: bool


@dataclass(frozen=True)
class Code:
    """Reference into a code table."""

    table: str
    code_id: int


@dataclass(frozen=True)
class MultiCode:
    """Set of references into one code table."""

    table: str
    code_ids: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "code_ids", frozenset(self.code_ids))


@dataclass(frozen=True)
class Timestamp:
    """UTC timestamp, millisecond precision."""

    millis: int

    def __post_init__(self) -> None:
        if not -(2**63) <= self.millis < 2**63:
            raise ModelError("timestamp out of 64-bit range")


@dataclass(frozen=True)
class CrossLink:
    """Reference to an entry of another mask of the same Book."""

    target_mask: str
    key: GlobalKey


@dataclass(frozen=True)
class Empty:
    pass


EMPTY = Empty()

FieldValue = Union[Text, Number, Decimal, Flag, Code, MultiCode, Timestamp, CrossLink, Empty]


def strip_empty(values: dict[str, FieldValue]) -> dict[str, FieldValue]:
    """Canonical form of a values map: Empty fields are simply absent."""
    return {name: v for name, v in values.items() if not isinstance(v, Empty)}


# ---------------------------------------------------------------------------
# Entries
# ---------------------------------------------------------------------------


@dataclass
class Entry:
    """One row of one input mask.

    `version` is the server commit stamp (0 = never synced). `deleted`
    marks a tombstone: the field values are retained but the row is hidden
    from listings; tombstones replicate like edits. `status` is client-side
    bookkeeping only and never crosses the wire.
    """

    key: GlobalKey
    mask: str
    project: GlobalKey
    values: dict[str, FieldValue]
    version: int = 0
    status: SyncStatus = SyncStatus.CHANGED_LOCALLY
    modified_ms: int = 0
    deleted: bool = False

    def __post_init__(self) -> None:
        if self.version < 0:
            raise ModelError("version must be >= 0")
        self.values = strip_empty(self.values)

    def copy(self) -> "Entry":
        return replace(self, values=dict(self.values))


# ---------------------------------------------------------------------------
# Code tables, projects, users
# ---------------------------------------------------------------------------


@dataclass
class CodeTable:
    """Versioned mapping from numeric codes to per-language display texts.

    Kept identical on the server and every client; `version` strictly
    increases with every server-side change to the rows.
    """

    name: str
    version: int
    rows: dict[int, dict[str, str]]

    def lookup(self, code_id: int, language: str) -> str | None:
        texts = self.rows.get(code_id)
        if texts is None:
            return None
        if language in texts:
            return texts[language]
        if texts:
            return texts[sorted(texts)[0]]
        return None


class Right(IntEnum):
    NONE = 0
    READ = 1
    WRITE = 2


@dataclass
class Project:
    key: GlobalKey
    name: str
    owner: int
    rights: dict[int, Right] = field(default_factory=dict)

    def right_of(self, user_id: int) -> Right:
        """Effective right; the owner implicitly holds WRITE."""
        if user_id == self.owner:
            return Right.WRITE
        return self.rights.get(user_id, Right.NONE)


@dataclass
class User:
    user_id: int
    username: str
    first_name: str
    last_name: str
    email: str
    password_hash: bytes
    salt: bytes


# ---------------------------------------------------------------------------
# Migrations
# ---------------------------------------------------------------------------

STATEMENT_OPS = ("add_table", "add_column", "transform_column", "drop_column", "data_fix")


@dataclass(frozen=True)
class Statement:
    """One store operation of a migration.

    op: add_table | add_column | transform_column | drop_column | data_fix
    params: op-specific string/number/list parameters (see migrate runner).
    """

    op: str
    params: dict

    def __post_init__(self) -> None:
        if self.op not in STATEMENT_OPS:
            raise ModelError(f"unknown migration op {self.op!r}")


@dataclass(frozen=True)
class Migration:
    """Applying a migration to a store at schema version `from_version`
    yields schema version `from_version + 1`."""

    from_version: int
    statements: tuple[Statement, ...]

    def __post_init__(self) -> None:
        if self.from_version < 1:
            raise ModelError("from_version must be >= 1")
        object.__setattr__(self, "statements", tuple(self.statements))
