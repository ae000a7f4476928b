"""Random WireValue / Message generators.

Used as the round-trip oracle: a generator builds an arbitrary valid value,
and decode(encode(v)) must reproduce it exactly. Provides both a seeded
random.Random generator (cheap, used for the big acceptance runs) and
hypothesis strategies for the property tests.
"""

from __future__ import annotations

import random
import string

from hypothesis import strategies as st

from xbook import wire

_LANGS = ["en", "de", "fr"]
_TEXT_ALPHABET = string.ascii_letters + string.digits + " ,;\"'\näß€中"


def _rand_text(rng: random.Random, max_len: int = 12) -> str:
    return "".join(rng.choice(_TEXT_ALPHABET) for _ in range(rng.randint(0, max_len)))


def _rand_int64(rng: random.Random) -> int:
    if rng.random() < 0.3:
        return rng.choice([0, 1, -1, 2**63 - 1, -(2**63)])
    return rng.randint(-(2**40), 2**40)


def _rand_decimal(rng: random.Random) -> str:
    s = str(rng.randint(0, 10**6))
    if rng.random() < 0.5:
        s += "." + str(rng.randint(0, 999)).rjust(rng.randint(1, 3), "0")
    if rng.random() < 0.3:
        s = "-" + s
    return s


def random_value(rng: random.Random, depth: int = 0) -> wire.WireValue:
    """One random valid WireValue of any tag."""
    scalar_tags = [wire.TAG_TEXT, wire.TAG_INT64, wire.TAG_BOOL, wire.TAG_BYTES,
                   wire.TAG_KEY, wire.TAG_TIMESTAMP, wire.TAG_NULL, wire.TAG_DECIMAL,
                   wire.TAG_CODE, wire.TAG_MULTICODE]
    deep_tags = [wire.TAG_LIST, wire.TAG_MAP, wire.TAG_ENTRY, wire.TAG_CODETABLE,
                 wire.TAG_MIGRATION, wire.TAG_PROJECT]
    tag = rng.choice(scalar_tags if depth >= 3 else scalar_tags + deep_tags)

    if tag == wire.TAG_TEXT:
        return wire.text(_rand_text(rng))
    if tag == wire.TAG_INT64:
        return wire.int64(_rand_int64(rng))
    if tag == wire.TAG_BOOL:
        return wire.boolean(rng.random() < 0.5)
    if tag == wire.TAG_BYTES:
        return wire.raw(rng.randbytes(rng.randint(0, 16)))
    if tag == wire.TAG_KEY:
        return wire.key(rng.randint(1, 2**40), rng.randint(1, 2**20))
    if tag == wire.TAG_TIMESTAMP:
        return wire.timestamp(_rand_int64(rng))
    if tag == wire.TAG_NULL:
        return wire.null()
    if tag == wire.TAG_DECIMAL:
        return wire.decimal(_rand_decimal(rng))
    if tag == wire.TAG_CODE:
        return wire.code(_rand_text(rng, 8), rng.randint(0, 999))
    if tag == wire.TAG_MULTICODE:
        return wire.multicode(_rand_text(rng, 8),
                              [rng.randint(0, 99) for _ in range(rng.randint(0, 5))])
    if tag == wire.TAG_LIST:
        return wire.array(random_value(rng, depth + 1) for _ in range(rng.randint(0, 4)))
    if tag == wire.TAG_MAP:
        pairs = {}
        for _ in range(rng.randint(0, 4)):
            k = random_value(rng, depth + 2)
            pairs[wire.encode_value(k)] = (k, random_value(rng, depth + 1))
        return wire.mapping(pairs.values())
    if tag == wire.TAG_ENTRY:
        return wire.entry_record(
            wire.key(rng.randint(1, 10**6), rng.randint(1, 10**4)),
            wire.text(_rand_text(rng, 8)),
            wire.key(rng.randint(1, 10**6), rng.randint(1, 10**4)),
            wire.mapping(_entry_value_pairs(rng)),
            wire.int64(rng.randint(0, 10**6)),
            wire.boolean(rng.random() < 0.2),
            wire.timestamp(rng.randint(0, 2**41)))
    if tag == wire.TAG_CODETABLE:
        rows = {}
        for _ in range(rng.randint(0, 4)):
            cid = rng.randint(1, 999)
            rows[cid] = wire.mapping((wire.text(lang), wire.text(_rand_text(rng, 8)))
                                     for lang in rng.sample(_LANGS, rng.randint(1, 3)))
        return wire.codetable_record(
            wire.text(_rand_text(rng, 8)), wire.int64(rng.randint(0, 99)),
            wire.mapping((wire.int64(cid), texts) for cid, texts in rows.items()))
    if tag == wire.TAG_MIGRATION:
        stmts = wire.array(
            wire.mapping([(wire.text("op"), wire.text("add_column")),
                          (wire.text("params"),
                           wire.mapping([(wire.text("table"), wire.text(_rand_text(rng, 6))),
                                         (wire.text("column"), wire.text(_rand_text(rng, 6))),
                                         (wire.text("kind"), wire.text("text"))]))])
            for _ in range(rng.randint(0, 3)))
        return wire.migration_record(wire.int64(rng.randint(1, 99)), stmts)
    if tag == wire.TAG_PROJECT:
        rights = {}
        for _ in range(rng.randint(0, 3)):
            rights[rng.randint(1, 99)] = rng.randint(1, 2)
        return wire.project_record(
            wire.key(rng.randint(1, 10**6), rng.randint(1, 10**4)),
            wire.text(_rand_text(rng, 10)),
            wire.int64(rng.randint(1, 999)),
            wire.mapping((wire.int64(u), wire.int64(r)) for u, r in rights.items()))
    raise AssertionError(tag)


def _entry_value_pairs(rng: random.Random):
    pairs = {}
    for _ in range(rng.randint(0, 4)):
        name = _rand_text(rng, 6)
        fv = rng.choice([
            lambda: wire.text(_rand_text(rng)),
            lambda: wire.int64(_rand_int64(rng)),
            lambda: wire.decimal(_rand_decimal(rng)),
            lambda: wire.boolean(True),
            lambda: wire.code("t", rng.randint(0, 9)),
            lambda: wire.multicode("t", [1, 2]),
            lambda: wire.timestamp(rng.randint(0, 2**40)),
            lambda: wire.array((wire.text("M"), wire.key(1, 1))),
        ])()
        pairs[name] = fv
    return ((wire.text(k), v) for k, v in pairs.items())


def random_message(rng: random.Random) -> wire.Message:
    """One random valid Message (request or reply form)."""
    rt = rng.choice(sorted(wire.ARITY))
    req, rep = wire.ARITY[rt]
    candidates = [t for t in (req, rep) if t is not None]
    tags = rng.choice(candidates)
    payload = tuple(_value_of_tag(rng, t) for t in tags)
    token = b"" if rt in wire.TOKENLESS else rng.randbytes(rng.choice([0, 32]))
    return wire.Message(rt, token, payload)


def _value_of_tag(rng: random.Random, tag: int) -> wire.WireValue:
    for _ in range(200):
        v = random_value(rng)
        if v.tag == tag:
            return v
    # directed fallbacks for the rarer tags
    if tag == wire.TAG_MAP:
        return wire.mapping([(wire.text("k"), wire.int64(1))])
    if tag == wire.TAG_LIST:
        return wire.array([wire.null()])
    raise AssertionError(f"could not generate tag {tag:#04x}")


# -- hypothesis strategies ---------------------------------------------------

_texts = st.text(max_size=12)
_int64s = st.integers(-(2**63), 2**63 - 1)
_keys = st.builds(wire.key, st.integers(1, 2**62), st.integers(1, 2**62))
_decimals = st.from_regex(r"-?[0-9]{1,6}(\.[0-9]{1,4})?", fullmatch=True).map(wire.decimal)

_scalars = st.one_of(
    _texts.map(wire.text),
    _int64s.map(wire.int64),
    st.booleans().map(wire.boolean),
    st.binary(max_size=12).map(wire.raw),
    _keys,
    _int64s.map(wire.timestamp),
    st.just(wire.null()),
    _decimals,
    st.builds(wire.code, _texts, st.integers(0, 10**6)),
    st.builds(wire.multicode, _texts, st.lists(st.integers(0, 10**4), max_size=5)),
)


def _extend(children):
    def make_map(pairs):
        seen = {}
        for k, v in pairs:
            seen[wire.encode_value(k)] = (k, v)
        return wire.mapping(seen.values())

    return st.one_of(
        st.lists(children, max_size=4).map(wire.array),
        st.lists(st.tuples(_scalars, children), max_size=4).map(make_map),
    )


wire_values = st.recursive(_scalars, _extend, max_leaves=12)
