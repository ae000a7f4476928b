"""Client-side transport of the wire protocol.

A transport turns a request Message into a reply Message. The HTTP
transport POSTs the base64 frame as the single form field `m` and reads
the reply frame from the response body; HTTPS is required unless the
caller explicitly allows plain HTTP for local testing. Proxy settings
flow through to the HTTP library.

The in-process transport drives a server API object directly but still
runs the full encode/decode path, so simulations exercise the real wire
format without sockets.
"""

from __future__ import annotations

from urllib.parse import urlsplit

import requests

from . import wire


class TransportError(Exception):
    """Base: the request never produced a decodable reply."""


class TransportConnectError(TransportError):
    """Network unreachable, refused, or timed out."""


class TransportHttpError(TransportError):
    """The endpoint answered with a non-2xx status."""

    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"HTTP {status} {detail}".strip())
        self.status = status


class TransportDecodeError(TransportError):
    """The response body was not a valid message frame."""


class RemoteError(Exception):
    """The server answered with an ERROR reply."""

    def __init__(self, code: int, message: str):
        super().__init__(f"server error {code}: {message}")
        self.code = code
        self.message = message


class InsecureUrlError(TransportError):
    """Plain http:// endpoint without the allow-insecure flag."""


class HttpTransport:
    """Blocking per call; safe for concurrent use from several threads."""

    def __init__(self, endpoint_url: str, *, allow_insecure: bool = False,
                 proxy_url: str | None = None, timeout_s: float = 30.0):
        parts = urlsplit(endpoint_url)
        if parts.scheme == "http" and not allow_insecure:
            raise InsecureUrlError(
                f"refusing plain http endpoint {endpoint_url}; pass allow_insecure "
                "for local testing or use https")
        if parts.scheme not in ("http", "https"):
            raise TransportError(f"unsupported scheme {parts.scheme!r}")
        if parts.port not in (None, 80, 443) and not allow_insecure:
            # default destinations are the ports firewalls leave open
            raise InsecureUrlError(
                f"refusing non-standard port {parts.port}; pass allow_insecure "
                "for local testing")
        self.endpoint_url = endpoint_url
        self.timeout_s = timeout_s
        self._session = requests.Session()
        if proxy_url:
            self._session.proxies = {"http": proxy_url, "https": proxy_url}
        self._session.trust_env = False  # only explicit proxy settings apply

    def request(self, message: wire.Message) -> wire.Message:
        armored = wire.encode_message(message)
        try:
            response = self._session.post(
                self.endpoint_url, data={"m": armored}, timeout=self.timeout_s)
        except requests.RequestException as e:
            raise TransportConnectError(str(e)) from e
        if not 200 <= response.status_code < 300:
            raise TransportHttpError(response.status_code, response.reason or "")
        try:
            return wire.decode_message(response.text.strip())
        except wire.WireError as e:
            raise TransportDecodeError(str(e)) from e

    def close(self) -> None:
        self._session.close()


class InProcessTransport:
    """Runs requests against a WireApi in this process, frames included."""

    def __init__(self, api):
        self.api = api

    def request(self, message: wire.Message) -> wire.Message:
        armored = wire.encode_message(message)
        try:
            return wire.decode_message(self.api.handle_armored(armored))
        except wire.WireError as e:
            raise TransportDecodeError(str(e)) from e


class UnreachableTransport:
    """Always fails, the way a dead network does. For offline tests."""

    def request(self, message: wire.Message) -> wire.Message:
        raise TransportConnectError("network unreachable")


def call(transport, message: wire.Message) -> tuple[wire.WireValue, ...]:
    """Send one request; returns the reply payload or raises RemoteError
    for ERROR replies."""
    reply = transport.request(message)
    if reply.request_type == wire.RequestType.ERROR:
        raise RemoteError(reply.payload[0].value, reply.payload[1].value)
    if reply.request_type != message.request_type:
        raise TransportDecodeError(
            f"reply type {reply.request_type} for request {message.request_type}")
    return reply.payload
