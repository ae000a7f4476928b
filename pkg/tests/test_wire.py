import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xbook import model, wire
from wiregen import random_message, random_value, wire_values


class TestEncodeExamples:
    """Byte layouts forced by the format definition."""

    def test_text(self):
        assert wire.encode_value(wire.text("ab")) == bytes.fromhex("0100000002" + "6162")

    def test_int64_one(self):
        assert wire.encode_value(wire.int64(1)) == bytes.fromhex("020000000000000001")

    def test_list_of_null(self):
        assert wire.encode_value(wire.array([wire.null()])) == bytes.fromhex("050000000109")

    def test_bool(self):
        assert wire.encode_value(wire.boolean(True)) == b"\x03\x01"
        assert wire.encode_value(wire.boolean(False)) == b"\x03\x00"

    def test_key_is_two_untagged_int64(self):
        enc = wire.encode_value(wire.key(1, 7))
        assert enc == b"\x07" + (1).to_bytes(8, "big") + (7).to_bytes(8, "big")

    def test_negative_int64_twos_complement(self):
        assert wire.encode_value(wire.int64(-1)) == b"\x02" + b"\xff" * 8

    def test_map_sorted_by_encoded_key(self):
        m = wire.mapping([(wire.text("b"), wire.int64(2)), (wire.text("a"), wire.int64(1))])
        enc = wire.encode_value(m)
        a = wire.encode_value(wire.text("a"))
        b = wire.encode_value(wire.text("b"))
        assert enc.index(a) < enc.index(b)

    def test_composite_is_field_concatenation(self):
        c = wire.code("species", 12)
        assert wire.encode_value(c) == (
            b"\x0b" + wire.encode_value(wire.text("species")) + wire.encode_value(wire.int64(12)))


class TestDecodeErrors:
    def test_unknown_tag(self):
        with pytest.raises(wire.UnknownTag):
            wire.decode_value(b"\xff\x00")
        with pytest.raises(wire.UnknownTag):
            wire.decode_value(b"\x11")

    def test_truncated(self):
        enc = wire.encode_value(wire.text("hello"))
        for cut in range(len(enc)):
            with pytest.raises(wire.DecodeError):
                wire.decode_frame_value(enc[:cut])

    def test_invalid_utf8(self):
        bad = b"\x01\x00\x00\x00\x02\xff\xfe"
        with pytest.raises(wire.BadUtf8):
            wire.decode_value(bad)

    def test_trailing_garbage_on_frame_decode(self):
        enc = wire.encode_value(wire.int64(5)) + b"\x00"
        with pytest.raises(wire.TrailingGarbage):
            wire.decode_frame_value(enc)

    def test_bad_bool_byte(self):
        with pytest.raises(wire.DecodeError):
            wire.decode_value(b"\x03\x02")

    def test_duplicate_map_keys(self):
        k = wire.encode_value(wire.text("x"))
        v = wire.encode_value(wire.int64(1))
        with pytest.raises(wire.DecodeError):
            wire.decode_value(b"\x06\x00\x00\x00\x02" + k + v + k + v)

    def test_key_components_must_be_positive(self):
        bad = b"\x07" + (0).to_bytes(8, "big") + (7).to_bytes(8, "big")
        with pytest.raises(wire.DecodeError):
            wire.decode_value(bad)

    def test_size_error_on_encode(self):
        class FakeStr(str):
            def encode(self, *a, **kw):
                return _OversizedBytes()

        class _OversizedBytes(bytes):
            def __len__(self):
                return 2**31

        with pytest.raises(wire.SizeError):
            wire.encode_value(wire.WireValue(wire.TAG_TEXT, FakeStr("x")))


class TestRoundTrip:
    def test_seeded_generator_round_trip(self):
        rng = random.Random(20240917)
        for _ in range(1000):
            v = random_value(rng)
            enc = wire.encode_value(v)
            dec, used = wire.decode_value(enc)
            assert used == len(enc)
            assert dec == v

    @given(wire_values)
    @settings(max_examples=300, deadline=None)
    def test_hypothesis_round_trip(self, v):
        assert wire.decode_frame_value(wire.encode_value(v)) == v

    @given(wire_values)
    @settings(max_examples=100, deadline=None)
    def test_encoding_deterministic(self, v):
        assert wire.encode_value(v) == wire.encode_value(v)

    @given(st.lists(wire_values, min_size=1, max_size=4))
    @settings(max_examples=100, deadline=None)
    def test_prefix_freedom(self, vs):
        blob = b"".join(wire.encode_value(v) for v in vs)
        out, pos = [], 0
        while pos < len(blob):
            v, used = wire.decode_value(blob, pos)
            out.append(v)
            pos += used
        assert out == vs


class TestFuzz:
    def test_random_bytes_only_defined_errors(self):
        rng = random.Random(99)
        for _ in range(2000):
            blob = rng.randbytes(rng.randint(0, 40))
            try:
                wire.decode_frame_value(blob)
            except wire.DecodeError:
                pass

    def test_mutated_valid_encodings(self):
        rng = random.Random(7)
        for _ in range(500):
            blob = bytearray(wire.encode_value(random_value(rng)))
            if not blob:
                continue
            blob[rng.randrange(len(blob))] ^= 1 << rng.randrange(8)
            try:
                wire.decode_frame_value(bytes(blob))
            except wire.DecodeError:
                pass


class TestMessages:
    def test_get_version_frame_bytes(self):
        import base64
        m = wire.Message(wire.RequestType.GET_VERSION, b"", ())
        expect = bytes.fromhex("58425731" "04" "0400000000" "0500000000")
        assert wire.encode_message(m) == base64.b64encode(expect).decode()

    def test_wrong_arity_rejected(self):
        with pytest.raises(wire.ProtocolError):
            wire.encode_message(wire.Message(wire.RequestType.LOGIN, b"", (wire.text("u"),)))

    def test_tokenless_types_must_have_empty_token(self):
        with pytest.raises(wire.ProtocolError):
            wire.encode_message(wire.Message(
                wire.RequestType.LOGIN, b"tok", (wire.text("u"), wire.text("p"))))

    def test_error_reply_form(self):
        m = wire.error_message(401, "unauthorized")
        again = wire.decode_message(wire.encode_message(m))
        assert again == m

    def test_unknown_request_type(self):
        import base64
        frame = b"XBW1" + bytes([42]) + wire.encode_value(wire.raw(b"")) \
            + wire.encode_value(wire.array(()))
        with pytest.raises(wire.ProtocolError):
            wire.decode_message(base64.b64encode(frame).decode())

    def test_frame_trailing_garbage(self):
        import base64
        frame = b"XBW1" + bytes([4]) + wire.encode_value(wire.raw(b"")) \
            + wire.encode_value(wire.array(())) + b"\x00"
        with pytest.raises(wire.TrailingGarbage):
            wire.decode_message(base64.b64encode(frame).decode())

    def test_bad_base64(self):
        with pytest.raises(wire.DecodeError):
            wire.decode_message("!!! not base64 !!!")

    def test_message_round_trip_random(self):
        rng = random.Random(4711)
        for _ in range(500):
            m = random_message(rng)
            assert wire.decode_message(wire.encode_message(m)) == m


class TestModelConverters:
    def test_entry_round_trip(self):
        e = model.Entry(
            key=model.GlobalKey(3, 7), mask="Find", project=model.GlobalKey(1, 2),
            values={
                "species": model.Code("species", 12),
                "count": model.Number(5),
                "note": model.Text('Box "A", lid'),
                "weight": model.Decimal("12.50"),
                "tags": model.MultiCode("tags", frozenset({2, 1})),
                "container": model.CrossLink("Container", model.GlobalKey(4, 7)),
                "recordedAt": model.Timestamp(1700000000000),
                "checked": model.Flag(True),
            },
            version=9, status=model.SyncStatus.SYNCHRONIZED,
            modified_ms=1700000000123, deleted=False)
        w = wire.entry_to_wire(e)
        back = wire.entry_from_wire(wire.decode_frame_value(wire.encode_value(w)))
        assert back.key == e.key and back.mask == e.mask and back.project == e.project
        assert back.values == e.values
        assert back.version == e.version and back.deleted == e.deleted
        assert back.modified_ms == e.modified_ms

    def test_empty_values_dropped_on_wire(self):
        e = model.Entry(model.GlobalKey(1, 1), "m", model.GlobalKey(1, 1),
                        {"a": model.EMPTY, "b": model.Text("x")})
        w = wire.entry_to_wire(e)
        assert wire.entry_from_wire(w).values == {"b": model.Text("x")}

    def test_codetable_round_trip(self):
        t = model.CodeTable("species", 4, {1: {"en": "Cattle", "de": "Rind"},
                                           2: {"en": "Sheep"}})
        back = wire.codetable_from_wire(wire.decode_frame_value(
            wire.encode_value(wire.codetable_to_wire(t))))
        assert back == t

    def test_migration_round_trip(self):
        m = model.Migration(2, (
            model.Statement("add_column", {"table": "Find", "column": "note", "kind": "text"}),
            model.Statement("data_fix", {"fix": "copy_column", "table": "Find",
                                         "from": "legacy_note", "to": "note",
                                         "only_if_empty": True}),
        ))
        back = wire.migration_from_wire(wire.decode_frame_value(
            wire.encode_value(wire.migration_to_wire(m))))
        assert back == m

    def test_project_round_trip(self):
        p = model.Project(model.GlobalKey(1, 5), "dig2024", owner=2,
                          rights={3: model.Right.READ, 4: model.Right.WRITE})
        back = wire.project_from_wire(wire.decode_frame_value(
            wire.encode_value(wire.project_to_wire(p))))
        assert back == p
