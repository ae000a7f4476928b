"""Server command line: serve, init, set-required-version, add-migration."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .. import bookfile
from .config import ConfigError, ServerConfig, load_config
from .core import SyncServer
from .http import serve
from .storage import ServerStorage
from .wire_api import WireApi


def _load(args) -> ServerConfig:
    if args.config:
        return load_config(args.config)
    return ServerConfig()


def _server(cfg: ServerConfig) -> SyncServer:
    storage = ServerStorage(cfg.storage)
    return SyncServer(storage, token_ttl_s=cfg.token_ttl_s, scrypt_cost=cfg.scrypt_cost)


def cmd_serve(args) -> int:
    cfg = _load(args)
    loopback = cfg.bind_host in ("127.0.0.1", "::1", "localhost")
    if not loopback and not cfg.allow_insecure:
        print("refusing to bind a public address: the server speaks plain HTTP and "
              "belongs behind a TLS-terminating proxy; set allow_insecure=true to "
              "override for testing", file=sys.stderr)
        return 2
    handle = serve(WireApi(_server(cfg)), cfg.bind_host, cfg.bind_port)
    print(f"listening on {handle.address}")
    try:
        import threading
        threading.Event().wait()
    except KeyboardInterrupt:
        handle.stop()
    return 0


def cmd_init(args) -> int:
    cfg = _load(args)
    descriptor = bookfile.parse_book(Path(args.book).read_text("utf-8"))
    _server(cfg).init_from_book(descriptor)
    print(f"initialized {cfg.storage} from Book {descriptor.book_id!r} "
          f"(schema version {descriptor.schema_version}, "
          f"{len(descriptor.masks)} masks, {len(descriptor.code_tables)} code tables, "
          f"{len(descriptor.migrations)} migrations)")
    return 0


def cmd_set_required_version(args) -> int:
    cfg = _load(args)
    _server(cfg).set_required_version(args.version)
    print(f"required schema version set to {args.version}")
    return 0


def cmd_add_migration(args) -> int:
    cfg = _load(args)
    migration = bookfile.parse_migration_fragment(Path(args.file).read_text("utf-8"))
    _server(cfg).add_migration(migration)
    print(f"stored migration {migration.from_version} -> {migration.from_version + 1}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="xbook-server",
                                     description="xBook synchronization server")
    parser.add_argument("--config", help="path to key=value config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("serve", help="run the server")

    p_init = sub.add_parser("init", help="create storage and load a Book")
    p_init.add_argument("--book", required=True, help="path to a .book document")

    p_ver = sub.add_parser("set-required-version", help="pin the required schema version")
    p_ver.add_argument("version", type=int)

    p_mig = sub.add_parser("add-migration", help="store one migration from a file")
    p_mig.add_argument("file")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return {"serve": cmd_serve, "init": cmd_init,
                "set-required-version": cmd_set_required_version,
                "add-migration": cmd_add_migration}[args.command](args)
    except (ConfigError, bookfile.BookError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
