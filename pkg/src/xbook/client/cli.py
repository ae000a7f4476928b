"""Book client command line.

Commands: register, login, projects, save, sync, conflicts, export,
serve-ui. State lives under the per-user data directory (XBOOK_HOME
overrides): one folder per Book with the store file and a small
key=value config holding server URL and session token.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .. import book as bookmod
from .. import bookfile, paths
from ..export import export_project
from ..launcher.settings import load_settings
from ..model import GlobalKey
from ..transport import HttpTransport, RemoteError, TransportError
from . import sync as syncmod
from .errors import ClientError, IdentityPending, ValidationFailed
from .identity import InstallMarker, ensure_database_id
from .localapi import serve_local_api
from .migrate import apply_migrations
from .store import LocalStore

log = logging.getLogger("xbook.client")


class App:
    def __init__(self, book: bookmod.BookDescriptor, env: dict[str, str]):
        self.book = book
        self.env = env
        self.data_home = paths.data_home(env)
        self.book_dir = self.data_home / "books" / book.book_id
        self.store_path = self.book_dir / "store.db"
        self.config_path = self.book_dir / "client.cfg"
        self.marker = InstallMarker.for_book(book.book_id, env)
        self.launcher_settings = load_settings(
            paths.config_home(env) / "launcher" / "settings.cfg")

    # -- config ---------------------------------------------------------------

    def load_config(self) -> dict[str, str]:
        config: dict[str, str] = {}
        try:
            for line in self.config_path.read_text("utf-8").splitlines():
                line = line.strip()
                if line and not line.startswith("#"):
                    key, _, value = line.partition("=")
                    config[key.strip()] = value.strip()
        except FileNotFoundError:
            pass
        return config

    def save_config(self, config: dict[str, str]) -> None:
        self.book_dir.mkdir(parents=True, exist_ok=True)
        self.config_path.write_text(
            "".join(f"{k}={v}\n" for k, v in sorted(config.items())), "utf-8")

    # -- session and store -------------------------------------------------------

    def transport(self, server_url: str, insecure: bool) -> HttpTransport:
        proxy = self.launcher_settings.proxy
        return HttpTransport(server_url, allow_insecure=insecure,
                             proxy_url=proxy.url() if proxy else None)

    def session(self) -> syncmod.ServerSession:
        config = self.load_config()
        if "server_url" not in config or "token" not in config:
            raise ClientError("not logged in; run: xbook login --server <url> "
                              "--username <name> --password <password>")
        transport = self.transport(config["server_url"],
                                   config.get("insecure") == "true")
        return syncmod.ServerSession(transport, bytes.fromhex(config["token"]))

    def store(self) -> LocalStore:
        if not self.store_path.exists():
            self.book_dir.mkdir(parents=True, exist_ok=True)
            return LocalStore.create(self.store_path, self.book)
        return LocalStore.open(self.store_path, self.book)

    def auto_sync(self, store: LocalStore, project: GlobalKey) -> None:
        if self.launcher_settings.sync_mode != "AUTO":
            return
        try:
            report = syncmod.sync_project(store, self.session(), project)
            print(f"auto-sync: pushed={report.pushed} pulled={report.pulled} "
                  f"conflicts={report.conflicts}")
        except (TransportError, RemoteError, ClientError) as e:
            log.info("auto-sync skipped: %s", e)


def _load_book(args) -> bookmod.BookDescriptor:
    if args.book:
        return bookfile.parse_book(Path(args.book).read_text("utf-8"))
    return bookmod.reference_book()


def _print_report(project: GlobalKey, report: syncmod.SyncReport) -> None:
    print(f"project {project}: pushed={report.pushed} pulled={report.pulled} "
          f"conflicts={report.conflicts}")


def cmd_register(app: App, args) -> int:
    transport = app.transport(args.server, args.insecure)
    session = syncmod.ServerSession(transport)
    user_id = session.register(args.username, args.first_name, args.last_name,
                               args.email, args.password)
    print(f"registered user {args.username} (id {user_id})")
    return 0


def cmd_login(app: App, args) -> int:
    transport = app.transport(args.server, args.insecure)
    session = syncmod.ServerSession(transport)
    session.login(args.username, args.password)
    app.save_config({"server_url": args.server,
                     "insecure": "true" if args.insecure else "false",
                     "token": session.token.hex(),
                     "username": args.username})
    store = app.store()
    required = session.required_version()
    if store.schema_version < required:
        apply_migrations(store, session)
        print(f"store migrated to schema version {store.schema_version}")
    ensure_database_id(store, app.marker, session)
    syncmod.update_code_tables(store, session)
    count = syncmod.refresh_projects(store, session)
    print(f"logged in as {args.username}; {count} project(s) available")
    return 0


def cmd_create_project(app: App, args) -> int:
    store = app.store()
    session = app.session()
    project = session.create_project(args.name)
    syncmod.refresh_projects(store, session)
    print(f"created project {project.key} ({project.name})")
    return 0


def cmd_projects(app: App, args) -> int:
    store = app.store()
    try:
        syncmod.refresh_projects(store, app.session())
    except (TransportError, RemoteError, ClientError) as e:
        log.info("offline, showing cached projects: %s", e)
    infos = store.project_infos()
    if not infos:
        print("no projects")
        return 0
    for info in infos:
        print(f"{info['id']}:{info['dbid']}  {info['name']}  "
              f"entries={info['entryCount']} unsynced={info['unsyncedCount']}")
    return 0


def cmd_save(app: App, args) -> int:
    store = app.store()
    data = json.loads(Path(args.json).read_text("utf-8"))
    project = GlobalKey.parse(args.project) if args.project \
        else GlobalKey(int(data["project"]["id"]), int(data["project"]["dbid"]))
    values = bookmod.values_from_json(data.get("values", data))
    key = GlobalKey.parse(args.key) if args.key else None
    try:
        entry = store.save_entry(args.mask, project, values, key=key)
    except ValidationFailed as e:
        print("rejected:", file=sys.stderr)
        for name, state in sorted(e.states.items()):
            if state.value != "ok":
                print(f"  {name}: {state.value}", file=sys.stderr)
        return 1
    print(f"saved {entry.key} in {args.mask} ({entry.status.value})")
    app.auto_sync(store, project)
    return 0


def cmd_sync(app: App, args) -> int:
    store = app.store()
    session = app.session()
    ensure_database_id(store, app.marker, session)
    syncmod.update_code_tables(store, session)
    syncmod.refresh_projects(store, session)
    if args.project:
        keys = [GlobalKey.parse(args.project)]
    else:
        keys = [GlobalKey(i["id"], i["dbid"]) for i in store.project_infos()]
    for key in keys:
        _print_report(key, syncmod.sync_project(store, session, key))
    return 0


def cmd_conflicts(app: App, args) -> int:
    store = app.store()
    if args.action == "list" or args.key is None:
        pairs = store.conflicts()
        if not pairs:
            print("no conflicts")
            return 0
        for mine, theirs in pairs:
            print(f"{mine.key}  mask={mine.mask}  mine@{mine.version} "
                  f"theirs@{theirs.version}")
        return 0
    choice = syncmod.TAKE_THEIRS if args.take_theirs else syncmod.KEEP_MINE
    entry = syncmod.resolve_conflict(store, GlobalKey.parse(args.key), choice)
    print(f"resolved {entry.key}: {choice.lower()} ({entry.status.value})")
    return 0


def cmd_export(app: App, args) -> int:
    store = app.store()
    project = GlobalKey.parse(args.project)
    masks = args.masks.split(",") if args.masks \
        else [m.name for m in store.book.masks]
    files = export_project(store, project, masks, args.out,
                           language=app.launcher_settings.language)
    for path in files:
        print(path)
    return 0


def cmd_serve_ui(app: App, args) -> int:
    store = app.store()
    session = None
    try:
        session = app.session()
    except ClientError:
        log.info("serving without a server session; sync stays disabled")
    handle = serve_local_api(
        store, port=args.port, session=session, webroot=args.webroot,
        language=app.launcher_settings.language,
        sync_mode=app.launcher_settings.sync_mode)
    print(f"local api on {handle.url}")
    try:
        import threading
        threading.Event().wait()
    except KeyboardInterrupt:
        handle.stop()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="xbook", description="xBook client")
    parser.add_argument("--book", help="path to a .book document (default: DemoFinds)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="create a server account")
    for flag in ("--server", "--username", "--password", "--email"):
        p.add_argument(flag, required=True)
    p.add_argument("--first-name", default="")
    p.add_argument("--last-name", default="")
    p.add_argument("--insecure", action="store_true")

    p = sub.add_parser("login", help="log in, update, and prepare the local store")
    for flag in ("--server", "--username", "--password"):
        p.add_argument(flag, required=True)
    p.add_argument("--insecure", action="store_true")

    sub.add_parser("projects", help="list projects")

    p = sub.add_parser("create-project", help="create a project on the server")
    p.add_argument("name")

    p = sub.add_parser("save", help="save one entry from a JSON file")
    p.add_argument("--mask", required=True)
    p.add_argument("--json", required=True)
    p.add_argument("--project", help="id:dbid (falls back to the file)")
    p.add_argument("--key", help="id:dbid of an existing entry to edit")

    p = sub.add_parser("sync", help="synchronize projects")
    p.add_argument("--project", help="id:dbid (default: all known projects)")

    p = sub.add_parser("conflicts", help="list or resolve conflicts")
    p.add_argument("action", nargs="?", choices=["list", "resolve"], default="list")
    p.add_argument("key", nargs="?", help="id:dbid")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--take-theirs", action="store_true")
    group.add_argument("--keep-mine", action="store_true")

    p = sub.add_parser("export", help="write one CSV per mask")
    p.add_argument("--project", required=True, help="id:dbid")
    p.add_argument("--masks", help="comma-separated (default: all)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve-ui", help="serve the local API and web UI")
    p.add_argument("--port", type=int, default=8421)
    p.add_argument("--webroot")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    import os
    app = App(_load_book(args), dict(os.environ))
    handlers = {
        "register": cmd_register, "login": cmd_login, "projects": cmd_projects,
        "create-project": cmd_create_project, "save": cmd_save, "sync": cmd_sync,
        "conflicts": cmd_conflicts, "export": cmd_export, "serve-ui": cmd_serve_ui,
    }
    try:
        return handlers[args.command](app, args)
    except (ClientError, IdentityPending) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (TransportError, RemoteError) as e:
        print(f"server error: {e}", file=sys.stderr)
        return 2
    except (bookmod.BookError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
