"""Bit-exact binary serialization and the request/response message frame.

Every transmissible value is a tagged WireValue with exactly 16 defined
tags. Encoding is canonical: the same value always yields the same bytes
(map pairs are ordered by their encoded key bytes), so independent
implementations interoperate byte-for-byte.

Layout per tag, after the one tag byte:

  Int64 / Timestamp   8 bytes, big-endian two's complement
  Bool                1 byte, 0 or 1
  Text / Bytes /
  Decimal             4-byte big-endian length + raw bytes (Text is UTF-8)
  List                4-byte big-endian count + encoded elements
  Map                 4-byte big-endian pair count + alternating key/value
  Key                 two Int64 payloads, no inner tags
  Null                no payload
  Code, MultiCode,
  EntryRecord, CodeTableRecord, MigrationRecord, ProjectRecord
                      concatenation of their fixed field encodings

Messages travel as a frame: magic "XBW1", one requestType byte, the
auth token as an encoded Bytes value, and the payload as an encoded List,
the whole frame armored as standard base64 for the HTTP form field.
"""

from __future__ import annotations

import base64
import struct
from dataclasses import dataclass

from . import model

MAGIC = b"XBW1"

TAG_TEXT = 0x01
TAG_INT64 = 0x02
TAG_BOOL = 0x03
TAG_BYTES = 0x04
TAG_LIST = 0x05
TAG_MAP = 0x06
TAG_KEY = 0x07
TAG_TIMESTAMP = 0x08
TAG_NULL = 0x09
TAG_DECIMAL = 0x0A
TAG_CODE = 0x0B
TAG_MULTICODE = 0x0C
TAG_ENTRY = 0x0D
TAG_CODETABLE = 0x0E
TAG_MIGRATION = 0x0F
TAG_PROJECT = 0x10

ALL_TAGS = frozenset(range(0x01, 0x11))

MAX_LEN = 2**31 - 1
_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1

# Fixed field-tag sequences of the composite tags.
COMPOSITE_FIELDS: dict[int, tuple[int, ...]] = {
    TAG_CODE: (TAG_TEXT, TAG_INT64),
    TAG_MULTICODE: (TAG_TEXT, TAG_LIST),
    TAG_ENTRY: (TAG_KEY, TAG_TEXT, TAG_KEY, TAG_MAP, TAG_INT64, TAG_BOOL, TAG_TIMESTAMP),
    TAG_CODETABLE: (TAG_TEXT, TAG_INT64, TAG_MAP),
    TAG_MIGRATION: (TAG_INT64, TAG_LIST),
    TAG_PROJECT: (TAG_KEY, TAG_TEXT, TAG_INT64, TAG_MAP),
}


class WireError(Exception):
    """Base for all serialization errors."""


class EncodeError(WireError):
    pass


class SizeError(EncodeError):
    """A length field would exceed 2^31 - 1."""


class DecodeError(WireError):
    pass


class UnknownTag(DecodeError):
    pass


class Truncated(DecodeError):
    pass


class BadUtf8(DecodeError):
    pass


class TrailingGarbage(DecodeError):
    pass


class ProtocolError(WireError):
    """Frame or payload violates the message contract (arity, token rule)."""


@dataclass(frozen=True)
class WireValue:
    """A tagged serializable value. Use the constructor helpers below;
    they normalize payloads into the canonical in-memory form."""

    tag: int
    value: object

    def __repr__(self) -> str:  # compact, for test failure readability
        return f"W({_TAG_NAMES.get(self.tag, self.tag)}:{self.value!r})"


_TAG_NAMES = {
    TAG_TEXT: "text", TAG_INT64: "int64", TAG_BOOL: "bool", TAG_BYTES: "bytes",
    TAG_LIST: "list", TAG_MAP: "map", TAG_KEY: "key", TAG_TIMESTAMP: "timestamp",
    TAG_NULL: "null", TAG_DECIMAL: "decimal", TAG_CODE: "code",
    TAG_MULTICODE: "multicode", TAG_ENTRY: "entry", TAG_CODETABLE: "codetable",
    TAG_MIGRATION: "migration", TAG_PROJECT: "project",
}


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def _check_int64(n: int) -> int:
    if not isinstance(n, int) or isinstance(n, bool) or not _INT64_MIN <= n <= _INT64_MAX:
        raise EncodeError(f"not a 64-bit integer: {n!r}")
    return n


def text(s: str) -> WireValue:
    return WireValue(TAG_TEXT, s)


def int64(n: int) -> WireValue:
    return WireValue(TAG_INT64, _check_int64(n))


def boolean(b: bool) -> WireValue:
    return WireValue(TAG_BOOL, bool(b))


def raw(b: bytes) -> WireValue:
    return WireValue(TAG_BYTES, bytes(b))


def array(items) -> WireValue:
    items = tuple(items)
    for it in items:
        if not isinstance(it, WireValue):
            raise EncodeError(f"list element is not a WireValue: {it!r}")
    return WireValue(TAG_LIST, items)


def mapping(pairs) -> WireValue:
    """Map value. Pairs are stored sorted by encoded key bytes (canonical
    order); duplicate keys are rejected."""
    norm = []
    for k, v in pairs:
        if not isinstance(k, WireValue) or not isinstance(v, WireValue):
            raise EncodeError("map pairs must be WireValues")
        norm.append((encode_value(k), k, v))
    norm.sort(key=lambda t: t[0])
    for a, b in zip(norm, norm[1:]):
        if a[0] == b[0]:
            raise EncodeError(f"duplicate map key {a[1]!r}")
    return WireValue(TAG_MAP, tuple((k, v) for _, k, v in norm))


def key(id_: int, dbid: int) -> WireValue:
    if _check_int64(id_) < 1 or _check_int64(dbid) < 1:
        raise EncodeError(f"key components must be >= 1, got ({id_},{dbid})")
    return WireValue(TAG_KEY, (id_, dbid))


def timestamp(millis: int) -> WireValue:
    return WireValue(TAG_TIMESTAMP, _check_int64(millis))


def null() -> WireValue:
    return WireValue(TAG_NULL, None)


def decimal(s: str) -> WireValue:
    if model._DECIMAL_RE.fullmatch(s) is None:
        raise EncodeError(f"not a decimal: {s!r}")
    return WireValue(TAG_DECIMAL, s)


def _composite(tag: int, fields: tuple[WireValue, ...]) -> WireValue:
    expect = COMPOSITE_FIELDS[tag]
    got = tuple(f.tag for f in fields)
    if got != expect:
        raise EncodeError(f"{_TAG_NAMES[tag]} fields must be {expect}, got {got}")
    return WireValue(tag, fields)


def code(table: str, code_id: int) -> WireValue:
    return _composite(TAG_CODE, (text(table), int64(code_id)))


def multicode(table: str, code_ids) -> WireValue:
    ids = sorted(set(code_ids))
    return _composite(TAG_MULTICODE, (text(table), array(int64(i) for i in ids)))


def entry_record(k: WireValue, mask: WireValue, project: WireValue, values: WireValue,
                 version: WireValue, deleted: WireValue, modified: WireValue) -> WireValue:
    return _composite(TAG_ENTRY, (k, mask, project, values, version, deleted, modified))


def codetable_record(name: WireValue, version: WireValue, rows: WireValue) -> WireValue:
    return _composite(TAG_CODETABLE, (name, version, rows))


def migration_record(from_version: WireValue, statements: WireValue) -> WireValue:
    return _composite(TAG_MIGRATION, (from_version, statements))


def project_record(k: WireValue, name: WireValue, owner: WireValue, rights: WireValue) -> WireValue:
    return _composite(TAG_PROJECT, (k, name, owner, rights))


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


def _len_prefix(n: int) -> bytes:
    if n > MAX_LEN:
        raise SizeError(f"length {n} exceeds 2^31-1")
    return struct.pack(">I", n)


def encode_value(v: WireValue) -> bytes:
    """Encode one value: tag byte followed by its payload."""
    tag = v.tag
    out = [bytes([tag])]
    if tag == TAG_TEXT:
        data = v.value.encode("utf-8")
        out.append(_len_prefix(len(data)))
        out.append(data)
    elif tag in (TAG_INT64, TAG_TIMESTAMP):
        out.append(struct.pack(">q", v.value))
    elif tag == TAG_BOOL:
        out.append(b"\x01" if v.value else b"\x00")
    elif tag == TAG_BYTES:
        out.append(_len_prefix(len(v.value)))
        out.append(v.value)
    elif tag == TAG_LIST:
        out.append(_len_prefix(len(v.value)))
        for item in v.value:
            out.append(encode_value(item))
    elif tag == TAG_MAP:
        out.append(_len_prefix(len(v.value)))
        for k, val in v.value:
            out.append(encode_value(k))
            out.append(encode_value(val))
    elif tag == TAG_KEY:
        out.append(struct.pack(">qq", v.value[0], v.value[1]))
    elif tag == TAG_NULL:
        pass
    elif tag == TAG_DECIMAL:
        data = v.value.encode("utf-8")
        out.append(_len_prefix(len(data)))
        out.append(data)
    elif tag in COMPOSITE_FIELDS:
        for f in v.value:
            out.append(encode_value(f))
    else:
        raise EncodeError(f"unknown tag {tag:#04x}")
    return b"".join(out)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes, pos: int = 0):
        self.buf = buf
        self.pos = pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise Truncated(f"need {n} bytes at offset {self.pos}, have {len(self.buf) - self.pos}")
        b = self.buf[self.pos:self.pos + n]
        self.pos += n
        return b

    def length(self) -> int:
        n = struct.unpack(">I", self.take(4))[0]
        if n > MAX_LEN:
            raise DecodeError(f"length {n} exceeds 2^31-1")
        return n


def _decode(r: _Reader) -> WireValue:
    tag = r.take(1)[0]
    if tag not in ALL_TAGS:
        raise UnknownTag(f"unknown tag {tag:#04x} at offset {r.pos - 1}")
    if tag == TAG_TEXT:
        data = r.take(r.length())
        try:
            return WireValue(TAG_TEXT, data.decode("utf-8"))
        except UnicodeDecodeError as e:
            raise BadUtf8(str(e)) from e
    if tag in (TAG_INT64, TAG_TIMESTAMP):
        return WireValue(tag, struct.unpack(">q", r.take(8))[0])
    if tag == TAG_BOOL:
        b = r.take(1)[0]
        if b not in (0, 1):
            raise DecodeError(f"bool byte must be 0 or 1, got {b}")
        return WireValue(TAG_BOOL, b == 1)
    if tag == TAG_BYTES:
        return WireValue(TAG_BYTES, bytes(r.take(r.length())))
    if tag == TAG_LIST:
        n = r.length()
        return WireValue(TAG_LIST, tuple(_decode(r) for _ in range(n)))
    if tag == TAG_MAP:
        n = r.length()
        pairs = tuple((_decode(r), _decode(r)) for _ in range(n))
        try:
            return mapping(pairs)
        except EncodeError as e:          # duplicate keys
            raise DecodeError(str(e)) from e
    if tag == TAG_KEY:
        id_, dbid = struct.unpack(">qq", r.take(16))
        if id_ < 1 or dbid < 1:
            raise DecodeError(f"key components must be >= 1, got ({id_},{dbid})")
        return WireValue(TAG_KEY, (id_, dbid))
    if tag == TAG_NULL:
        return WireValue(TAG_NULL, None)
    if tag == TAG_DECIMAL:
        data = r.take(r.length())
        try:
            s = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise BadUtf8(str(e)) from e
        if model._DECIMAL_RE.fullmatch(s) is None:
            raise DecodeError(f"not a decimal: {s!r}")
        return WireValue(TAG_DECIMAL, s)
    # composite
    fields = []
    for expect in COMPOSITE_FIELDS[tag]:
        f = _decode(r)
        if f.tag != expect:
            raise DecodeError(
                f"{_TAG_NAMES[tag]} field has tag {f.tag:#04x}, expected {expect:#04x}")
        fields.append(f)
    if tag == TAG_MULTICODE:
        ids = [e.value for e in fields[1].value]
        for e in fields[1].value:
            if e.tag != TAG_INT64:
                raise DecodeError("multicode ids must be int64")
        return multicode(fields[0].value, ids)
    return WireValue(tag, tuple(fields))


def decode_value(data: bytes, offset: int = 0) -> tuple[WireValue, int]:
    """Decode one value starting at `offset`; returns (value, bytes consumed)."""
    if offset >= len(data):
        raise Truncated("empty input")
    r = _Reader(data, offset)
    v = _decode(r)
    return v, r.pos - offset


def decode_frame_value(data: bytes) -> WireValue:
    """Decode a value that must span the whole input."""
    v, used = decode_value(data)
    if used != len(data):
        raise TrailingGarbage(f"{len(data) - used} trailing bytes")
    return v


# ---------------------------------------------------------------------------
# Messages
# ---------------------------------------------------------------------------


class RequestType:
    REGISTER = 1
    LOGIN = 2
    ISSUE_DBID = 3
    GET_VERSION = 4
    GET_MIGRATIONS = 5
    GET_CODETABLES = 6
    PUSH = 7
    PULL = 8
    LIST_PROJECTS = 9
    CREATE_PROJECT = 10
    SET_RIGHTS = 11
    CHANGE_PASSWORD = 12
    RESET_PASSWORD = 13
    ERROR = 0xFF

    ALL = frozenset(range(1, 14)) | {0xFF}


# Message types whose requests carry no auth token by definition.
TOKENLESS = frozenset({RequestType.REGISTER, RequestType.LOGIN, RequestType.RESET_PASSWORD})

# Tag sequences of request and reply payloads per message type. None means
# the direction does not exist (ERROR is reply-only).
ARITY: dict[int, tuple[tuple[int, ...] | None, tuple[int, ...] | None]] = {
    RequestType.REGISTER: ((TAG_TEXT,) * 5, (TAG_INT64,)),
    RequestType.LOGIN: ((TAG_TEXT, TAG_TEXT), (TAG_BYTES, TAG_INT64, TAG_TIMESTAMP)),
    RequestType.ISSUE_DBID: ((), (TAG_INT64,)),
    RequestType.GET_VERSION: ((), (TAG_INT64,)),
    RequestType.GET_MIGRATIONS: ((TAG_INT64,), (TAG_LIST,)),
    RequestType.GET_CODETABLES: ((TAG_MAP,), (TAG_LIST,)),
    RequestType.PUSH: ((TAG_KEY, TAG_LIST), (TAG_LIST,)),
    RequestType.PULL: ((TAG_KEY, TAG_INT64), (TAG_LIST, TAG_INT64)),
    RequestType.LIST_PROJECTS: ((), (TAG_LIST,)),
    RequestType.CREATE_PROJECT: ((TAG_TEXT,), (TAG_PROJECT,)),
    RequestType.SET_RIGHTS: ((TAG_KEY, TAG_INT64, TAG_INT64), ()),
    RequestType.CHANGE_PASSWORD: ((TAG_TEXT, TAG_TEXT), ()),
    RequestType.RESET_PASSWORD: ((TAG_TEXT,), ()),
    RequestType.ERROR: (None, (TAG_INT64, TAG_TEXT)),
}


@dataclass(frozen=True)
class Message:
    """Request/response envelope: message type, auth token, tagged payload."""

    request_type: int
    auth_token: bytes
    payload: tuple[WireValue, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "auth_token", bytes(self.auth_token))
        object.__setattr__(self, "payload", tuple(self.payload))


def _payload_tags(payload: tuple[WireValue, ...]) -> tuple[int, ...]:
    return tuple(v.tag for v in payload)


def check_payload(request_type: int, payload: tuple[WireValue, ...], *, reply: bool) -> None:
    """Enforce the static arity table for one direction."""
    if request_type not in ARITY:
        raise ProtocolError(f"unknown message type {request_type}")
    expect = ARITY[request_type][1 if reply else 0]
    if expect is None:
        raise ProtocolError(f"message type {request_type} has no "
                            f"{'reply' if reply else 'request'} form")
    if _payload_tags(payload) != expect:
        raise ProtocolError(
            f"payload tags {_payload_tags(payload)} do not match {expect} "
            f"for message type {request_type}")


def _check_message(m: Message) -> None:
    if m.request_type not in ARITY:
        raise ProtocolError(f"unknown message type {m.request_type}")
    if m.request_type in TOKENLESS and m.auth_token != b"":
        raise ProtocolError(f"message type {m.request_type} must carry an empty token")
    tags = _payload_tags(m.payload)
    req, rep = ARITY[m.request_type]
    if tags != req and tags != rep:
        raise ProtocolError(f"payload tags {tags} match neither direction "
                            f"of message type {m.request_type}")


def encode_message(m: Message) -> str:
    """Encode a message to the base64 text frame used on the wire."""
    _check_message(m)
    frame = b"".join([
        MAGIC,
        bytes([m.request_type]),
        encode_value(raw(m.auth_token)),
        encode_value(array(m.payload)),
    ])
    return base64.b64encode(frame).decode("ascii")


def decode_message(armored: str) -> Message:
    """Decode a base64 text frame back into a Message."""
    try:
        frame = base64.b64decode(armored, validate=True)
    except Exception as e:
        raise DecodeError(f"bad base64: {e}") from e
    if len(frame) < len(MAGIC) + 1:
        raise Truncated("frame shorter than header")
    if frame[:4] != MAGIC:
        raise DecodeError(f"bad magic {frame[:4]!r}")
    rt = frame[4]
    r = _Reader(frame, 5)
    token_v = _decode(r)
    if token_v.tag != TAG_BYTES:
        raise ProtocolError("frame token must be a Bytes value")
    payload_v = _decode(r)
    if payload_v.tag != TAG_LIST:
        raise ProtocolError("frame payload must be a List value")
    if r.pos != len(frame):
        raise TrailingGarbage(f"{len(frame) - r.pos} trailing bytes in frame")
    m = Message(rt, token_v.value, payload_v.value)
    _check_message(m)
    return m


def error_message(code_: int, text_: str) -> Message:
    return Message(RequestType.ERROR, b"", (int64(code_), text(text_)))


# ---------------------------------------------------------------------------
# Model <-> wire converters
# ---------------------------------------------------------------------------


def key_to_wire(k: model.GlobalKey) -> WireValue:
    return key(k.id, k.dbid)


def key_from_wire(v: WireValue) -> model.GlobalKey:
    if v.tag != TAG_KEY:
        raise DecodeError("expected a key value")
    return model.GlobalKey(v.value[0], v.value[1])


def field_to_wire(fv: model.FieldValue) -> WireValue:
    if isinstance(fv, model.Text):
        return text(fv.value)
    if isinstance(fv, model.Number):
        return int64(fv.value)
    if isinstance(fv, model.Decimal):
        return decimal(fv.text)
    if isinstance(fv, model.Flag):
        return boolean(fv.value)
    if isinstance(fv, model.Code):
        return code(fv.table, fv.code_id)
    if isinstance(fv, model.MultiCode):
        return multicode(fv.table, fv.code_ids)
    if isinstance(fv, model.Timestamp):
        return timestamp(fv.millis)
    if isinstance(fv, model.CrossLink):
        # Cross-links ride as a [Text target-mask, Key] pair; all 16 tags
        # are allocated, and nothing else maps to a List in a values map.
        return array((text(fv.target_mask), key_to_wire(fv.key)))
    if isinstance(fv, model.Empty):
        return null()
    raise EncodeError(f"not a field value: {fv!r}")


def field_from_wire(v: WireValue) -> model.FieldValue:
    if v.tag == TAG_TEXT:
        return model.Text(v.value)
    if v.tag == TAG_INT64:
        return model.Number(v.value)
    if v.tag == TAG_DECIMAL:
        return model.Decimal(v.value)
    if v.tag == TAG_BOOL:
        return model.Flag(v.value)
    if v.tag == TAG_CODE:
        return model.Code(v.value[0].value, v.value[1].value)
    if v.tag == TAG_MULTICODE:
        return model.MultiCode(v.value[0].value, frozenset(e.value for e in v.value[1].value))
    if v.tag == TAG_TIMESTAMP:
        return model.Timestamp(v.value)
    if v.tag == TAG_LIST:
        if len(v.value) == 2 and v.value[0].tag == TAG_TEXT and v.value[1].tag == TAG_KEY:
            return model.CrossLink(v.value[0].value, key_from_wire(v.value[1]))
        raise DecodeError("list in a values map must be a cross-link pair")
    if v.tag == TAG_NULL:
        return model.EMPTY
    raise DecodeError(f"tag {v.tag:#04x} is not a field value")


def values_to_wire(values: dict[str, model.FieldValue]) -> WireValue:
    return mapping((text(name), field_to_wire(fv))
                   for name, fv in model.strip_empty(values).items())


def values_from_wire(v: WireValue) -> dict[str, model.FieldValue]:
    if v.tag != TAG_MAP:
        raise DecodeError("values must be a map")
    out: dict[str, model.FieldValue] = {}
    for k, val in v.value:
        if k.tag != TAG_TEXT:
            raise DecodeError("values map keys must be text")
        fv = field_from_wire(val)
        if not isinstance(fv, model.Empty):
            out[k.value] = fv
    return out


def entry_to_wire(e: model.Entry) -> WireValue:
    return entry_record(
        key_to_wire(e.key), text(e.mask), key_to_wire(e.project),
        values_to_wire(e.values), int64(e.version), boolean(e.deleted),
        timestamp(e.modified_ms))


def entry_from_wire(v: WireValue, status: model.SyncStatus = model.SyncStatus.SYNCHRONIZED) -> model.Entry:
    if v.tag != TAG_ENTRY:
        raise DecodeError("expected an entry record")
    k, mask, project, values, version, deleted, modified = v.value
    if version.value < 0:
        raise DecodeError("entry version must be >= 0")
    return model.Entry(
        key=key_from_wire(k), mask=mask.value, project=key_from_wire(project),
        values=values_from_wire(values), version=version.value, status=status,
        modified_ms=modified.value, deleted=deleted.value)


def codetable_to_wire(t: model.CodeTable) -> WireValue:
    rows = mapping(
        (int64(cid), mapping((text(lang), text(txt)) for lang, txt in texts.items()))
        for cid, texts in t.rows.items())
    return codetable_record(text(t.name), int64(t.version), rows)


def codetable_from_wire(v: WireValue) -> model.CodeTable:
    if v.tag != TAG_CODETABLE:
        raise DecodeError("expected a code table record")
    name, version, rows = v.value
    out: dict[int, dict[str, str]] = {}
    for k, texts in rows.value:
        if k.tag != TAG_INT64 or texts.tag != TAG_MAP:
            raise DecodeError("code table rows must map int64 to a text map")
        langs: dict[str, str] = {}
        for lang, txt in texts.value:
            if lang.tag != TAG_TEXT or txt.tag != TAG_TEXT:
                raise DecodeError("code table texts must map text to text")
            langs[lang.value] = txt.value
        out[k.value] = langs
    return model.CodeTable(name.value, version.value, out)


_WIRE_PARAM_KINDS = (str, int, bool)


def _param_to_wire(p) -> WireValue:
    if isinstance(p, bool):
        return boolean(p)
    if isinstance(p, str):
        return text(p)
    if isinstance(p, int):
        return int64(p)
    if isinstance(p, (list, tuple)):
        return array(_param_to_wire(x) for x in p)
    if isinstance(p, dict):
        return mapping((text(k), _param_to_wire(v)) for k, v in p.items())
    raise EncodeError(f"unsupported migration parameter {p!r}")


def _param_from_wire(v: WireValue):
    if v.tag == TAG_BOOL or v.tag == TAG_TEXT or v.tag == TAG_INT64:
        return v.value
    if v.tag == TAG_LIST:
        return [_param_from_wire(x) for x in v.value]
    if v.tag == TAG_MAP:
        out = {}
        for k, val in v.value:
            if k.tag != TAG_TEXT:
                raise DecodeError("migration parameter keys must be text")
            out[k.value] = _param_from_wire(val)
        return out
    raise DecodeError(f"unsupported migration parameter tag {v.tag:#04x}")


def migration_to_wire(m: model.Migration) -> WireValue:
    stmts = array(
        mapping([(text("op"), text(s.op)),
                 (text("params"), _param_to_wire(s.params))])
        for s in m.statements)
    return migration_record(int64(m.from_version), stmts)


def migration_from_wire(v: WireValue) -> model.Migration:
    if v.tag != TAG_MIGRATION:
        raise DecodeError("expected a migration record")
    from_version, stmts = v.value
    out = []
    for s in stmts.value:
        if s.tag != TAG_MAP:
            raise DecodeError("migration statements must be maps")
        d = _param_from_wire(s)
        try:
            out.append(model.Statement(d["op"], d["params"]))
        except (KeyError, model.ModelError) as e:
            raise DecodeError(f"bad migration statement: {e}") from e
    if from_version.value < 1:
        raise DecodeError("migration from_version must be >= 1")
    return model.Migration(from_version.value, tuple(out))


def project_to_wire(p: model.Project) -> WireValue:
    rights = mapping((int64(uid), int64(int(r))) for uid, r in p.rights.items())
    return project_record(key_to_wire(p.key), text(p.name), int64(p.owner), rights)


def project_from_wire(v: WireValue) -> model.Project:
    if v.tag != TAG_PROJECT:
        raise DecodeError("expected a project record")
    k, name, owner, rights = v.value
    out: dict[int, model.Right] = {}
    for uid, r in rights.value:
        if uid.tag != TAG_INT64 or r.tag != TAG_INT64:
            raise DecodeError("project rights must map int64 to int64")
        try:
            out[uid.value] = model.Right(r.value)
        except ValueError as e:
            raise DecodeError(f"unknown right {r.value}") from e
    return model.Project(key_from_wire(k), name.value, owner.value, out)
