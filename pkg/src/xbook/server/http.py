"""HTTP binding of the wire protocol.

Requests arrive as a POST with a urlencoded form whose single field `m`
carries the base64 message frame; the reply frame is the response body as
text/plain. Every request is handled on its own thread so slow clients
never block each other. In production the server sits behind a
TLS-terminating reverse proxy on port 443.
"""

from __future__ import annotations

import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs

from .. import wire
from .wire_api import WireApi

log = logging.getLogger("xbook.server")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    api: WireApi  # injected by serve()

    def do_POST(self):  # noqa: N802 (http.server naming)
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = self.rfile.read(length).decode("ascii", errors="replace")
            form = parse_qs(body, keep_blank_values=True)
            armored = form.get("m", [None])[0]
            if armored is None:
                reply = wire.encode_message(wire.error_message(400, "missing form field m"))
            else:
                reply = self.api.handle_armored(armored)
        except Exception:
            log.exception("request handling failed")
            self.send_error(500)
            return
        data = reply.encode("ascii")
        self.send_response(200)
        self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)


class ServerHandle:
    """A running HTTP server; stop() shuts it down."""

    def __init__(self, httpd: ThreadingHTTPServer, thread: threading.Thread):
        self._httpd = httpd
        self._thread = thread

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def address(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/"

    def stop(self) -> None:
        self._httpd.shutdown()
        self._thread.join()
        self._httpd.server_close()


def serve(api: WireApi, host: str = "127.0.0.1", port: int = 8080) -> ServerHandle:
    """Start serving in a background thread; returns a stoppable handle."""
    handler = type("BoundHandler", (_Handler,), {"api": api})
    httpd = ThreadingHTTPServer((host, port), handler)
    thread = threading.Thread(target=httpd.serve_forever, name="xbook-server", daemon=True)
    thread.start()
    log.info("serving on %s:%s", host, httpd.server_address[1])
    return ServerHandle(httpd, thread)
