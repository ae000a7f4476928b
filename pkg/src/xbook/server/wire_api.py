"""Maps wire messages onto server operations.

One handler per message type. Replies reuse the request's message type;
failures of any kind become an ERROR reply carrying a numeric code and a
text, never an exception leaking to the transport.
"""

from __future__ import annotations

import logging

from .. import model, wire
from .core import ServerError, SyncServer

log = logging.getLogger("xbook.server")

OUTCOME_COMMITTED = 0
OUTCOME_CONFLICT = 1


class WireApi:
    def __init__(self, server: SyncServer):
        self.server = server
        self._handlers = {
            wire.RequestType.REGISTER: self._register,
            wire.RequestType.LOGIN: self._login,
            wire.RequestType.ISSUE_DBID: self._issue_dbid,
            wire.RequestType.GET_VERSION: self._get_version,
            wire.RequestType.GET_MIGRATIONS: self._get_migrations,
            wire.RequestType.GET_CODETABLES: self._get_codetables,
            wire.RequestType.PUSH: self._push,
            wire.RequestType.PULL: self._pull,
            wire.RequestType.LIST_PROJECTS: self._list_projects,
            wire.RequestType.CREATE_PROJECT: self._create_project,
            wire.RequestType.SET_RIGHTS: self._set_rights,
            wire.RequestType.CHANGE_PASSWORD: self._change_password,
            wire.RequestType.RESET_PASSWORD: self._reset_password,
        }

    def handle(self, request: wire.Message) -> wire.Message:
        try:
            wire.check_payload(request.request_type, request.payload, reply=False)
            handler = self._handlers[request.request_type]
            payload = handler(request.auth_token, request.payload)
            reply = wire.Message(request.request_type, b"", payload)
            wire.check_payload(reply.request_type, reply.payload, reply=True)
            return reply
        except ServerError as e:
            return wire.error_message(e.code, e.message)
        except (wire.WireError, model.ModelError) as e:
            return wire.error_message(400, str(e))
        except Exception:
            log.exception("internal error handling request type %s", request.request_type)
            return wire.error_message(500, "internal error")

    def handle_armored(self, armored: str) -> str:
        """Full decode -> dispatch -> encode path used by the HTTP layer."""
        try:
            request = wire.decode_message(armored)
        except wire.WireError as e:
            return wire.encode_message(wire.error_message(400, str(e)))
        return wire.encode_message(self.handle(request))

    # -- handlers -------------------------------------------------------------

    def _register(self, token, payload):
        username, first, last, email, password = (v.value for v in payload)
        user_id = self.server.register(username, first, last, email, password)
        return (wire.int64(user_id),)

    def _login(self, token, payload):
        username, password = (v.value for v in payload)
        session, user_id, expires_ms = self.server.login(username, password)
        return (wire.raw(session), wire.int64(user_id), wire.timestamp(expires_ms))

    def _issue_dbid(self, token, payload):
        return (wire.int64(self.server.issue_database_id(token)),)

    def _get_version(self, token, payload):
        return (wire.int64(self.server.required_version()),)

    def _get_migrations(self, token, payload):
        migrations = self.server.migrations_from(token, payload[0].value)
        return (wire.array(wire.migration_to_wire(m) for m in migrations),)

    def _get_codetables(self, token, payload):
        known: dict[str, int] = {}
        for k, v in payload[0].value:
            if k.tag != wire.TAG_TEXT or v.tag != wire.TAG_INT64:
                raise wire.ProtocolError("known versions must map text to int64")
            known[k.value] = v.value
        tables = self.server.code_tables_newer(token, known)
        return (wire.array(wire.codetable_to_wire(t) for t in tables),)

    def _push(self, token, payload):
        project_key = wire.key_from_wire(payload[0])
        entries = []
        for v in payload[1].value:
            if v.tag != wire.TAG_ENTRY:
                raise wire.ProtocolError("push payload must list entry records")
            entries.append(wire.entry_from_wire(v))
        outcomes = self.server.push(token, project_key, entries)
        items = []
        for o in outcomes:
            if o.committed:
                items.append(wire.array((wire.key_to_wire(o.key),
                                         wire.int64(OUTCOME_COMMITTED),
                                         wire.int64(o.stamp))))
            else:
                items.append(wire.array((wire.key_to_wire(o.key),
                                         wire.int64(OUTCOME_CONFLICT),
                                         wire.entry_to_wire(o.server_entry))))
        return (wire.array(items),)

    def _pull(self, token, payload):
        project_key = wire.key_from_wire(payload[0])
        entries, max_stamp = self.server.pull(token, project_key, payload[1].value)
        return (wire.array(wire.entry_to_wire(e) for e in entries),
                wire.int64(max_stamp))

    def _list_projects(self, token, payload):
        items = []
        for project, count, max_stamp in self.server.list_projects(token):
            items.append(wire.array((wire.project_to_wire(project),
                                     wire.int64(count), wire.int64(max_stamp))))
        return (wire.array(items),)

    def _create_project(self, token, payload):
        project = self.server.create_project(token, payload[0].value)
        return (wire.project_to_wire(project),)

    def _set_rights(self, token, payload):
        project_key = wire.key_from_wire(payload[0])
        try:
            right = model.Right(payload[2].value)
        except ValueError:
            raise wire.ProtocolError(f"unknown right {payload[2].value}")
        self.server.set_rights(token, project_key, payload[1].value, right)
        return ()

    def _change_password(self, token, payload):
        self.server.change_password(token, payload[0].value, payload[1].value)
        return ()

    def _reset_password(self, token, payload):
        self.server.reset_password(payload[0].value)
        return ()
