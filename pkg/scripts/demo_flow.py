#!/usr/bin/env python3
"""End-to-end walkthrough on one machine: server over real HTTP, two
clients, offline edits, a conflict, resolution, and CSV export.

    python scripts/demo_flow.py
"""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, "src")

from xbook import book as bookmod  # noqa: E402
from xbook.client import LocalStore  # noqa: E402
from xbook.client.identity import InstallMarker, ensure_database_id  # noqa: E402
from xbook.client.sync import (  # noqa: E402
    TAKE_THEIRS, ServerSession, refresh_projects, resolve_conflict, sync_project)
from xbook.export import export_project  # noqa: E402
from xbook.model import Code, CrossLink, Number, Text  # noqa: E402
from xbook.server import ServerStorage, SyncServer, WireApi  # noqa: E402
from xbook.server.http import serve  # noqa: E402
from xbook.transport import HttpTransport  # noqa: E402


def client(name, base, book, url):
    session = ServerSession(HttpTransport(url, allow_insecure=True))
    session.register(name, name.title(), "Demo", f"{name}@demo.test", "demo-pass-1")
    session.login(name, "demo-pass-1")
    store = LocalStore.create(base / f"{name}.db", book)
    ensure_database_id(store, InstallMarker(base / f"{name}.marker"), session)
    return store, session


def main() -> int:
    book = bookmod.reference_book()
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(tmp)
        server = SyncServer(ServerStorage(str(base / "server.db")))
        server.init_from_book(book)
        handle = serve(WireApi(server), "127.0.0.1", 0)
        print(f"server listening on {handle.address}")

        ada_store, ada = client("ada", base, book, handle.address)
        bob_store, bob = client("bob", base, book, handle.address)

        project = ada.create_project("excavation-2026").key
        ada.set_rights(project, bob.user_id, 2)
        refresh_projects(ada_store, ada)
        refresh_projects(bob_store, bob)
        print(f"project {project} created; bob granted WRITE")

        box = ada_store.save_entry("Container", project,
                                   {"label": Text("Box A"),
                                    "material": Code("materials", 1)})
        ada_store.save_entry("Find", project, {
            "container": CrossLink("Container", box.key),
            "species": Code("species", 1), "count": Number(3)})
        report = sync_project(ada_store, ada, project)
        print(f"ada synced: +{report.pushed} pushed")

        report = sync_project(bob_store, bob, project)
        print(f"bob synced: +{report.pulled} pulled")

        ada_store.save_entry("Container", project, {"label": Text("Box A (ada)")},
                             key=box.key)
        bob_store.save_entry("Container", project, {"label": Text("Box A (bob)")},
                             key=box.key)
        sync_project(ada_store, ada, project)
        report = sync_project(bob_store, bob, project)
        print(f"bob hit {report.conflicts} conflict; resolving with TAKE_THEIRS")
        for mine, theirs in bob_store.conflicts():
            resolve_conflict(bob_store, mine.key, TAKE_THEIRS)

        sync_project(bob_store, bob, project)
        out = base / "exports"
        out.mkdir()
        for path in export_project(bob_store, project, ["Container", "Find"], out):
            print(f"exported {path.name}:")
            print(path.read_text("utf-8"))
        handle.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
