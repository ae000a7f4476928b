"""Randomized multi-client replication simulation.

Drives N simulated client installations against one in-process server
through the complete wire codec: random inserts (cross-linked finds
included), edits, deletes, and mid-schedule synchronizations with random
conflict resolutions. A fixed settle protocol follows (two rounds of
sync-then-adopt-server per client, no further edits), after which every
client store and the server must agree exactly on key, version stamp,
values, and tombstone flag for every row.

Checks performed on the outcome:
  convergence     every client snapshot equals the server snapshot
  stamp integrity each project's commit log is exactly 1..maxStamp
  no lost updates every committed (key, stamp) is in the final state or
                  superseded by a larger stamp on the same key
"""

from __future__ import annotations

import hashlib
import random
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import book as bookmod
from . import wire
from .client import LocalStore
from .client.identity import InstallMarker, ensure_database_id
from .client.errors import ValidationFailed
from .client.sync import TAKE_THEIRS, KEEP_MINE, ServerSession, resolve_conflict, \
    refresh_projects, sync_project
from .model import Code, CrossLink, GlobalKey, Number, Text
from .server import ServerStorage, SyncServer, WireApi
from .transport import InProcessTransport


@dataclass
class SimConfig:
    seed: int = 0
    clients: int = 3
    operations: int = 40
    projects: int = 1
    settle_rounds: int = 2


@dataclass
class Snapshot:
    rows: dict[tuple[str, int, int], tuple[int, str, bool]]  # (mask,id,dbid) -> (version, fingerprint, deleted)


@dataclass
class SimOutcome:
    config: SimConfig
    server_snapshot: dict[GlobalKey, Snapshot] = field(default_factory=dict)
    client_snapshots: dict[str, dict[GlobalKey, Snapshot]] = field(default_factory=dict)
    committed: list[tuple[GlobalKey, tuple[str, int, int], int, str, bool]] = \
        field(default_factory=list)  # (project, row key, stamp, fingerprint, deleted)
    commit_stamps: dict[GlobalKey, list[int]] = field(default_factory=dict)
    max_stamps: dict[GlobalKey, int] = field(default_factory=dict)

    def errors(self) -> list[str]:
        out = []
        for name, snapshot in self.client_snapshots.items():
            for project, server_rows in self.server_snapshot.items():
                mine = snapshot.get(project, Snapshot({})).rows
                theirs = server_rows.rows
                if mine != theirs:
                    missing = set(theirs) - set(mine)
                    extra = set(mine) - set(theirs)
                    differ = {k for k in set(mine) & set(theirs)
                              if mine[k] != theirs[k]}
                    out.append(f"{name} diverges on {project}: missing={missing} "
                               f"extra={extra} differ={differ}")
        for project, stamps in self.commit_stamps.items():
            expect = list(range(1, self.max_stamps.get(project, 0) + 1))
            if stamps != expect:
                out.append(f"stamps of {project} are {stamps}, expected {expect}")
        final: dict[tuple, tuple[int, str, bool]] = {}
        for project, rows in self.server_snapshot.items():
            final.update(rows.rows)
        for project, row_key, stamp, fingerprint, deleted in self.committed:
            got = final.get(row_key)
            if got is None:
                out.append(f"committed row {row_key}@{stamp} vanished")
            elif got[0] < stamp:
                out.append(f"committed row {row_key}@{stamp} regressed to {got[0]}")
            elif got[0] == stamp and (got[1], got[2]) != (fingerprint, deleted):
                out.append(f"committed row {row_key}@{stamp} mutated in place")
        return out


def values_fingerprint(values) -> str:
    return hashlib.sha256(wire.encode_value(wire.values_to_wire(values))).hexdigest()


class SimClient:
    def __init__(self, name: str, book, server: SyncServer, workdir: Path):
        self.name = name
        self.session = ServerSession(InProcessTransport(WireApi(server)))
        self.session.register(name, name, "Sim", f"{name}@sim.test", "simulated1")
        self.session.login(name, "simulated1")
        self.store = LocalStore.create(workdir / f"{name}.db", book)
        ensure_database_id(self.store, InstallMarker(workdir / f"{name}.marker"),
                           self.session)

    def visible(self, mask: str, project: GlobalKey):
        return self.store.entries(mask=mask, project=project)

    def snapshot(self, project: GlobalKey) -> Snapshot:
        rows = {}
        for entry in self.store.entries(project=project, include_deleted=True):
            rows[(entry.mask, entry.key.id, entry.key.dbid)] = (
                entry.version, values_fingerprint(entry.values), entry.deleted)
        return Snapshot(rows)


def _random_op(rng: random.Random, client: SimClient, project: GlobalKey,
               outcome: SimOutcome) -> None:
    roll = rng.random()
    try:
        if roll < 0.25:
            client.store.save_entry("Container", project,
                                    {"label": Text(f"Box {rng.randint(0, 999)}")})
        elif roll < 0.50:
            containers = client.visible("Container", project)
            if not containers:
                client.store.save_entry("Container", project,
                                        {"label": Text(f"Box {rng.randint(0, 999)}")})
                return
            client.store.save_entry("Find", project, {
                "container": CrossLink("Container", rng.choice(containers).key),
                "species": Code("species", rng.randint(1, 4)),
                "count": Number(rng.randint(1, 10000)),
            })
        elif roll < 0.75:
            entries = client.store.entries(project=project)
            if not entries:
                return
            entry = rng.choice(entries)
            values = dict(entry.values)
            if entry.mask == "Container":
                values["label"] = Text(f"Box {rng.randint(0, 999)}")
            else:
                values["count"] = Number(rng.randint(1, 10000))
                values["note"] = Text(f"note {rng.randint(0, 99)}")
            client.store.save_entry(entry.mask, project, values, key=entry.key)
        elif roll < 0.85:
            entries = client.store.entries(project=project)
            if entries:
                client.store.delete_entry(rng.choice(entries).key)
        else:
            _sync_and_record(client, project, outcome)
            for mine, _theirs in client.store.conflicts():
                resolve_conflict(client.store, mine.key,
                                 rng.choice([KEEP_MINE, TAKE_THEIRS]))
    except ValidationFailed:
        pass  # e.g. editing a find whose container was tombstoned meanwhile


def _sync_and_record(client: SimClient, project: GlobalKey,
                     outcome: SimOutcome) -> None:
    to_push = {e.key: e for e in client.store.rows_to_push(project)}
    sync_project(client.store, client.session, project)
    for key, entry in to_push.items():
        current = client.store.get_entry(key, entry.mask)
        if current is not None and current.status.value == "synchronized" \
                and current.version > entry.version:
            outcome.committed.append((
                project, (entry.mask, key.id, key.dbid), current.version,
                values_fingerprint(current.values), current.deleted))


def run_simulation(config: SimConfig, workdir: str | Path | None = None) -> SimOutcome:
    rng = random.Random(config.seed)
    outcome = SimOutcome(config)
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(workdir) if workdir is not None else Path(tmp)
        base.mkdir(parents=True, exist_ok=True)
        book = bookmod.reference_book()
        server = SyncServer(ServerStorage(str(base / "server.db")), scrypt_cost=2**4)
        server.init_from_book(book)

        clients = [SimClient(f"sim{config.seed}c{i}", book, server, base)
                   for i in range(config.clients)]
        owner = clients[0]
        projects = []
        for p in range(config.projects):
            project = owner.session.create_project(f"project{p}")
            projects.append(project.key)
            for other in clients[1:]:
                owner.session.set_rights(project.key, other.session.user_id, 2)
        for client in clients:
            refresh_projects(client.store, client.session)

        for _ in range(config.operations):
            client = rng.choice(clients)
            project = rng.choice(projects)
            _random_op(rng, client, project, outcome)

        for _round in range(config.settle_rounds):
            for client in clients:
                for project in projects:
                    _sync_and_record(client, project, outcome)
                    for mine, _theirs in client.store.conflicts():
                        resolve_conflict(client.store, mine.key, TAKE_THEIRS)

        for project in projects:
            entries, max_stamp = owner.session.pull(project, 0)
            rows = {}
            for entry in entries:
                rows[(entry.mask, entry.key.id, entry.key.dbid)] = (
                    entry.version, values_fingerprint(entry.values), entry.deleted)
            outcome.server_snapshot[project] = Snapshot(rows)
            outcome.max_stamps[project] = max_stamp
            with server.storage.conn() as c:
                outcome.commit_stamps[project] = [
                    r["stamp"] for r in c.execute(
                        "SELECT stamp FROM commit_log WHERE project_id = ? AND "
                        "project_dbid = ? ORDER BY stamp", (project.id, project.dbid))]

        for client in clients:
            outcome.client_snapshots[client.name] = {
                project: client.snapshot(project) for project in projects}
            client.store.close()
        server.storage.close()
    return outcome
