"""Launcher command line: add, list, update, launch, remove, settings."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .. import paths
from .bookxml import BookXmlError, parse_book_xml
from .manifest import ManifestError
from .settings import (
    InstanceLock,
    Proxy,
    Settings,
    SettingsError,
    book_from_record,
    load_registry,
    load_settings,
    registry_record,
    save_registry,
    save_settings,
)
from .update import UpdateError, http_fetcher, launch_book, update_book

log = logging.getLogger("xbook.launcher")


class Launcher:
    def __init__(self, data_home: Path, config_home: Path, allow_insecure: bool = False):
        self.data_home = data_home
        self.config_home = config_home
        self.registry_path = config_home / "registry.json"
        self.settings_path = config_home / "settings.cfg"
        self.allow_insecure = allow_insecure
        self.settings = load_settings(self.settings_path)
        proxy = self.settings.proxy.url() if self.settings.proxy else None
        self.fetch = http_fetcher(allow_insecure=allow_insecure, proxy_url=proxy)

    def install_dir(self, application_id: str) -> Path:
        return self.data_home / "apps" / application_id

    def add(self, url: str):
        book = parse_book_xml(self.fetch(url).decode("utf-8"))
        registry = load_registry(self.registry_path)
        registry[book.application_id] = registry_record(book, url)
        save_registry(self.registry_path, registry)
        return book

    def books(self):
        return [book_from_record(r) for r in load_registry(self.registry_path).values()]

    def book(self, application_id: str):
        registry = load_registry(self.registry_path)
        if application_id not in registry:
            raise UpdateError(f"no Book {application_id!r} in the registry; add it first")
        return book_from_record(registry[application_id])

    def remove(self, application_id: str) -> None:
        registry = load_registry(self.registry_path)
        if registry.pop(application_id, None) is None:
            raise UpdateError(f"no Book {application_id!r} in the registry")
        save_registry(self.registry_path, registry)

    def update(self, application_id: str):
        book = self.book(application_id)
        return update_book(book, self.install_dir(application_id), self.fetch)

    def launch(self, application_id: str):
        book = self.book(application_id)
        return launch_book(book, self.install_dir(application_id), self.settings,
                           self.data_home)


def _print_books(launcher: Launcher) -> None:
    books = launcher.books()
    if not books:
        print("no Books registered; use: xbook-launcher add <url-to-Book.xml>")
        return
    for book in books:
        installed = launcher.install_dir(book.application_id).exists()
        state = "installed" if installed else "not installed"
        print(f"{book.application_id:<16} {book.application_name:<24} {state}")
        text = book.description(launcher.settings.language)
        if text:
            print(f"{'':<16} {text}")


def _apply_setting(settings: Settings, assignment: str) -> None:
    key, eq, value = assignment.partition("=")
    if not eq:
        raise SettingsError(f"expected key=value, got {assignment!r}")
    if key == "language":
        settings.language = value
    elif key == "sync_mode":
        if value not in ("MANUAL", "AUTO"):
            raise SettingsError("sync_mode must be MANUAL or AUTO")
        settings.sync_mode = value
    elif key == "proxy":
        if not value:
            settings.proxy = None
        else:
            host, colon, port = value.rpartition(":")
            if not colon:
                raise SettingsError("proxy must be host:port or empty to clear")
            settings.proxy = Proxy(host, int(port))
    elif key == "runtime_options":
        import shlex
        settings.runtime_options = shlex.split(value)
    else:
        raise SettingsError(f"unknown setting {key!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="xbook-launcher",
                                     description="install, update, and run Books")
    parser.add_argument("--home", help="override the per-user data directory (XBOOK_HOME)")
    parser.add_argument("--insecure", action="store_true",
                        help="allow plain http and non-standard ports (testing)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="show registered Books")
    p_add = sub.add_parser("add", help="register a Book from its Book.xml URL")
    p_add.add_argument("url")
    p_update = sub.add_parser("update", help="install or update Books")
    p_update.add_argument("application_id", nargs="?")
    p_launch = sub.add_parser("launch", help="update check, then run a Book")
    p_launch.add_argument("application_id")
    p_launch.add_argument("--no-update", action="store_true")
    p_remove = sub.add_parser("remove", help="drop a Book from the registry")
    p_remove.add_argument("application_id")
    p_settings = sub.add_parser("settings", help="show or change settings")
    p_settings.add_argument("--set", action="append", default=[],
                            metavar="KEY=VALUE")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)

    import os
    env = dict(os.environ)
    if args.home:
        env["XBOOK_HOME"] = args.home
    data_home = paths.data_home(env)
    config_home = paths.config_home(env) / "launcher"

    try:
        with InstanceLock(config_home / "launcher.lock"):
            launcher = Launcher(data_home, config_home, allow_insecure=args.insecure)
            if args.command == "list":
                _print_books(launcher)
            elif args.command == "add":
                book = launcher.add(args.url)
                print(f"added {book.application_id} ({book.application_name})")
            elif args.command == "update":
                ids = [args.application_id] if args.application_id \
                    else [b.application_id for b in launcher.books()]
                for app_id in ids:
                    plan = launcher.update(app_id)
                    changed = sum(1 for p in plan if p.action.value != "keep")
                    print(f"{app_id}: {changed} file(s) changed")
            elif args.command == "launch":
                if not args.no_update:
                    launcher.update(args.application_id)
                process = launcher.launch(args.application_id)
                print(f"started {args.application_id} (pid {process.pid})")
                return process.wait()
            elif args.command == "remove":
                launcher.remove(args.application_id)
                print(f"removed {args.application_id}")
            elif args.command == "settings":
                for assignment in args.set:
                    _apply_setting(launcher.settings, assignment)
                if args.set:
                    save_settings(launcher.settings_path, launcher.settings)
                s = launcher.settings
                print(f"language={s.language}")
                print(f"sync_mode={s.sync_mode}")
                print(f"proxy={s.proxy.url() if s.proxy else ''}")
                print(f"runtime_options={' '.join(s.runtime_options)}")
        return 0
    except (UpdateError, BookXmlError, ManifestError, SettingsError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
