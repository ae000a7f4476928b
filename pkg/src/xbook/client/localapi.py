"""Loopback control API: JSON over HTTP for the CLI and the web UI.

This is the only write path into the local store besides the CLI; the
binary wire protocol stays exclusively between client and server. The
API binds loopback addresses only. When a webroot is configured, anything
that is not an API route is served as a static file, which is how the
companion single-page UI reaches the browser.

Routes:
    GET    /projects
    GET    /masks
    GET    /entries?mask=<m>&project=<id:dbid>
    POST   /entries            {mask, project, key?, values, validateOnly?}
    DELETE /entries?id=<n>&dbid=<n>
    POST   /sync/<id:dbid>
    GET    /conflicts
    POST   /conflicts/<id:dbid>/resolve   {choice: KEEP_MINE | TAKE_THEIRS}
    GET    /codetables
"""

from __future__ import annotations

import json
import logging
import mimetypes
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from .. import book as bookmod
from .. import model
from ..export import list_entries
from ..model import GlobalKey
from ..transport import RemoteError, TransportError
from . import sync as syncmod
from .errors import ClientError, UnknownEntry, ValidationFailed
from .store import LocalStore

log = logging.getLogger("xbook.client")

_LOOPBACK = ("127.0.0.1", "::1", "localhost")


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _key_json(key: GlobalKey) -> dict:
    return {"id": key.id, "dbid": key.dbid}


def _parse_key(text: str) -> GlobalKey:
    try:
        return GlobalKey.parse(text)
    except model.ModelError as e:
        raise ApiError(400, str(e)) from e


def entry_json(entry: model.Entry) -> dict:
    return {
        "key": _key_json(entry.key),
        "mask": entry.mask,
        "project": _key_json(entry.project),
        "values": bookmod.values_to_json(entry.values),
        "version": entry.version,
        "status": entry.status.value,
        "deleted": entry.deleted,
        "modifiedAt": entry.modified_ms,
    }


def _mask_json(mask: bookmod.MaskDef) -> dict:
    fields = []
    for f in mask.fields:
        item = {"name": f.name, "kind": f.kind, "mandatory": f.mandatory}
        if f.table:
            item["table"] = f.table
        if f.target:
            item["target"] = f.target
        if f.min_value is not None:
            item["min"] = f.min_value
        if f.max_value is not None:
            item["max"] = f.max_value
        if f.max_len is not None:
            item["maxLen"] = f.max_len
        fields.append(item)
    return {"name": mask.name, "displayField": mask.display_field(), "fields": fields,
            "sections": [{"title": t, "fields": list(names)} for t, names in mask.sections]}


class LocalApi:
    """Request handling, separated from the HTTP plumbing for testability."""

    def __init__(self, store: LocalStore, session: syncmod.ServerSession | None = None,
                 language: str = "en", sync_mode: str = "MANUAL"):
        self.store = store
        self.session = session
        self.language = language
        self.sync_mode = sync_mode

    # every handler returns (status, json-serializable body)

    def get_projects(self) -> tuple[int, object]:
        return 200, self.store.project_infos()

    def get_masks(self) -> tuple[int, object]:
        book = self.store.book
        return 200, {
            "bookId": book.book_id,
            "bookName": book.book_name,
            "schemaVersion": book.schema_version,
            "language": self.language,
            "masks": [_mask_json(m) for m in book.masks],
        }

    def get_codetables(self) -> tuple[int, object]:
        tables = self.store.code_tables()
        return 200, [{"name": t.name, "version": t.version,
                      "rows": {str(cid): texts for cid, texts in sorted(t.rows.items())}}
                     for t in tables.values()]

    def get_entries(self, query: dict) -> tuple[int, object]:
        mask = _single(query, "mask")
        project = _parse_key(_single(query, "project"))
        try:
            listing = list_entries(self.store, mask, project, self.language)
        except bookmod.BookError as e:
            raise ApiError(404, str(e)) from e
        entries = {e.key: e for e in self.store.entries(mask=mask, project=project)}
        rows = []
        for row in listing.rows:
            rows.append({
                "key": _key_json(row.key),
                "cells": row.cells,
                "entry": entry_json(entries[row.key]),
            })
        return 200, {"mask": mask, "columns": listing.columns, "rows": rows}

    def post_entries(self, body: dict) -> tuple[int, object]:
        try:
            mask = body["mask"]
            project = GlobalKey(int(body["project"]["id"]), int(body["project"]["dbid"]))
            values = bookmod.values_from_json(body.get("values", {}))
        except (KeyError, TypeError, ValueError, model.ModelError,
                bookmod.BookError) as e:
            raise ApiError(400, f"bad entry body: {e}") from e
        key = None
        if body.get("key"):
            key = GlobalKey(int(body["key"]["id"]), int(body["key"]["dbid"]))

        try:
            mask_def = self.store.book.mask(mask)
        except bookmod.BookError as e:
            raise ApiError(404, str(e)) from e

        if body.get("validateOnly"):
            try:
                states = bookmod.validate(mask_def, values, self.store.code_tables(),
                                          link_exists=self.store.link_exists)
            except bookmod.BookError as e:
                raise ApiError(400, str(e)) from e
            return 200, {"states": {k: s.value for k, s in states.items()},
                         "saveable": bookmod.saveable(states)}

        try:
            entry = self.store.save_entry(mask, project, values, key=key)
        except ValidationFailed as e:
            return 422, {"error": "validation failed",
                         "states": {k: s.value for k, s in e.states.items()}}
        except UnknownEntry as e:
            raise ApiError(404, str(e)) from e
        except (ClientError, bookmod.BookError) as e:
            raise ApiError(400, str(e)) from e
        self._auto_sync(entry.project)
        return 200, entry_json(self.store.get_entry(entry.key))

    def _auto_sync(self, project: GlobalKey) -> None:
        if self.sync_mode != "AUTO" or self.session is None:
            return
        try:
            syncmod.sync_project(self.store, self.session, project)
        except (TransportError, RemoteError, ClientError) as e:
            log.info("automatic synchronization skipped: %s", e)

    def delete_entries(self, query: dict) -> tuple[int, object]:
        key = GlobalKey(int(_single(query, "id")), int(_single(query, "dbid")))
        try:
            return 200, entry_json(self.store.delete_entry(key))
        except UnknownEntry as e:
            raise ApiError(404, str(e)) from e

    def post_sync(self, project_text: str) -> tuple[int, object]:
        project = _parse_key(project_text)
        if self.session is None:
            raise ApiError(503, "no server session; log in first")
        try:
            report = syncmod.sync_project(self.store, self.session, project)
        except (TransportError, RemoteError, ClientError) as e:
            raise ApiError(503, f"synchronization failed: {e}") from e
        return 200, {"pushed": report.pushed, "pulled": report.pulled,
                     "conflicts": report.conflicts,
                     "unsyncedCount": self.store.unsynced_count(project)}

    def get_conflicts(self) -> tuple[int, object]:
        out = []
        for mine, theirs in self.store.conflicts():
            out.append({"key": _key_json(mine.key), "mask": mine.mask,
                        "mine": entry_json(mine), "theirs": entry_json(theirs)})
        return 200, out

    def post_resolve(self, key_text: str, body: dict) -> tuple[int, object]:
        key = _parse_key(key_text)
        choice = body.get("choice")
        if choice not in (syncmod.KEEP_MINE, syncmod.TAKE_THEIRS):
            raise ApiError(400, f"choice must be KEEP_MINE or TAKE_THEIRS, got {choice!r}")
        try:
            entry = syncmod.resolve_conflict(self.store, key, choice)
        except UnknownEntry as e:
            raise ApiError(404, str(e)) from e
        return 200, entry_json(entry)


def _single(query: dict, name: str) -> str:
    values = query.get(name)
    if not values:
        raise ApiError(400, f"missing query parameter {name!r}")
    return values[0]


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    api: LocalApi
    webroot: Path | None

    # -- plumbing -----------------------------------------------------------

    def _send_json(self, status: int, body) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        if length == 0:
            return {}
        try:
            parsed = json.loads(self.rfile.read(length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ApiError(400, f"bad JSON body: {e}") from e
        if not isinstance(parsed, dict):
            raise ApiError(400, "body must be a JSON object")
        return parsed

    def _dispatch(self) -> None:
        url = urlsplit(self.path)
        route = url.path.rstrip("/") or "/"
        query = parse_qs(url.query)
        try:
            status, body = self._route(route, query)
        except ApiError as e:
            status, body = e.status, {"error": e.message}
        except Exception:
            log.exception("local api failure for %s", self.path)
            status, body = 500, {"error": "internal error"}
        self._send_json(status, body)

    def _route(self, route: str, query: dict) -> tuple[int, object]:
        method = self.command
        if method == "GET" and route == "/projects":
            return self.api.get_projects()
        if method == "GET" and route == "/masks":
            return self.api.get_masks()
        if method == "GET" and route == "/codetables":
            return self.api.get_codetables()
        if method == "GET" and route == "/entries":
            return self.api.get_entries(query)
        if method == "POST" and route == "/entries":
            return self.api.post_entries(self._body())
        if method == "DELETE" and route == "/entries":
            return self.api.delete_entries(query)
        if method == "GET" and route == "/conflicts":
            return self.api.get_conflicts()
        m = re.fullmatch(r"/sync/([0-9]+:[0-9]+)", route)
        if method == "POST" and m:
            return self.api.post_sync(m.group(1))
        m = re.fullmatch(r"/conflicts/([0-9]+:[0-9]+)/resolve", route)
        if method == "POST" and m:
            return self.api.post_resolve(m.group(1), self._body())
        raise ApiError(404, f"no route {method} {route}")

    def _serve_static(self) -> bool:
        if self.webroot is None or self.command != "GET":
            return False
        rel = urlsplit(self.path).path.lstrip("/") or "index.html"
        target = (self.webroot / rel).resolve()
        if not str(target).startswith(str(self.webroot.resolve())) or not target.is_file():
            return False
        data = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)
        return True

    def do_GET(self):  # noqa: N802
        url = urlsplit(self.path)
        if url.path.rstrip("/") not in ("/projects", "/masks", "/codetables",
                                        "/entries", "/conflicts"):
            if self._serve_static():
                return
        self._dispatch()

    def do_POST(self):  # noqa: N802
        self._dispatch()

    def do_DELETE(self):  # noqa: N802
        self._dispatch()

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)


class LocalApiHandle:
    def __init__(self, httpd: ThreadingHTTPServer, thread: threading.Thread):
        self._httpd = httpd
        self._thread = thread

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}/"

    def stop(self) -> None:
        self._httpd.shutdown()
        self._thread.join()
        self._httpd.server_close()


def serve_local_api(store: LocalStore, bind_address: str = "127.0.0.1", port: int = 0,
                    session: syncmod.ServerSession | None = None,
                    webroot: str | Path | None = None,
                    language: str = "en", sync_mode: str = "MANUAL") -> LocalApiHandle:
    """Start the control API on a loopback address; port 0 picks a free one."""
    if bind_address not in _LOOPBACK:
        raise ClientError(f"the local API is loopback-only; refusing {bind_address!r}")
    api = LocalApi(store, session, language=language, sync_mode=sync_mode)
    handler = type("BoundLocalHandler", (_Handler,), {
        "api": api, "webroot": Path(webroot) if webroot else None})
    httpd = ThreadingHTTPServer((bind_address, port), handler)
    thread = threading.Thread(target=httpd.serve_forever, name="xbook-localapi", daemon=True)
    thread.start()
    log.info("local api on 127.0.0.1:%s", httpd.server_address[1])
    return LocalApiHandle(httpd, thread)
