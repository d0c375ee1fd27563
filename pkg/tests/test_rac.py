from __future__ import annotations

import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from basketio import basket, codec, rac, synthgen
from basketio.basket import BasketRecord, FLAG_LENGTHS, FLAG_RAC
from basketio.codec import DEFAULT, Algorithm, CodecSpec
from basketio.errors import CorruptFrame, EmptyPayload, IndexOutOfRange
from basketio.synthgen import GenSpec, Kind

from conftest import random_events

SPECS = [codec.IDENTITY, CodecSpec(Algorithm.DEFLATE, 1), DEFAULT, CodecSpec(Algorithm.LZMA, 1),
         CodecSpec(Algorithm.LZ4), CodecSpec(Algorithm.LZ4HC, 4)]


def scan_frames(payload: bytes) -> list[int]:
    """Independent oracle: walk zlib frames one after another, recording start offsets."""
    pos, starts = 0, [0]
    while pos < len(payload):
        d = zlib.decompressobj()
        d.decompress(payload[pos:])
        assert d.eof
        pos = len(payload) - len(d.unused_data)
        starts.append(pos)
    return starts


def test_single_event():
    b = rac.pack_rac_basket([b"x"], DEFAULT)
    assert rac.unpack_event(b, 0) == b"x"
    assert b.header.flags & FLAG_RAC


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_every_event_round_trips(spec, rng):
    events = random_events(rng, 40, max_len=3000)
    b = rac.pack_rac_basket(events, spec)
    for i, e in enumerate(events):
        assert rac.unpack_event(b, i) == e
    assert rac.unpack_all(b) == b"".join(events)
    parsed = BasketRecord.from_bytes(b.to_bytes())
    assert [rac.unpack_event(parsed, i) for i in range(len(events))] == events


@given(st.lists(st.binary(min_size=1, max_size=300), min_size=1, max_size=30),
       st.sampled_from(SPECS))
@settings(max_examples=80, deadline=None)
def test_oracle_equivalence_with_whole_basket(events, spec):
    r = rac.pack_rac_basket(events, spec)
    plain = basket.pack_basket(events, spec)
    joined = b"".join(rac.unpack_event(r, i) for i in range(len(events)))
    assert joined == basket.unpack_basket(plain) == b"".join(events)


def test_unpack_event_counts_only_that_event(session):
    events = list(synthgen.iter_payloads(GenSpec(Kind.TSMALL, 1, 16)))
    b = rac.pack_rac_basket(events, DEFAULT)
    session.reset()
    rac.unpack_event(b, 5, session)
    assert session.decompress.bytes_out == int(b.rac_tables.uncomp_lens[5]) == 4000
    assert session.decompress.bytes_out != b.header.uncompressed_len
    assert session.decompress.bytes_in == rac.access_point(b, 5)[1]


def test_random_read_work_bound(session, rng):
    events = random_events(rng, 64, max_len=2000)
    b = rac.pack_rac_basket(events, DEFAULT)
    picks = rng.choice(len(events), size=20, replace=False).tolist()
    session.reset()
    for i in picks:
        rac.unpack_event(b, i, session)
    assert session.decompress.bytes_out == sum(len(events[i]) for i in picks)


def test_index_out_of_range():
    b = rac.pack_rac_basket([b"a", b"b"], DEFAULT)
    with pytest.raises(IndexOutOfRange):
        rac.unpack_event(b, 2)
    with pytest.raises(IndexOutOfRange):
        rac.access_point(b, -1)


def test_access_points(rng):
    events = random_events(rng, 30, max_len=1000)
    b = rac.pack_rac_basket(events, DEFAULT)
    first = rac.access_point(b, 0)
    assert first[0] == 0
    assert sum(rac.access_point(b, i)[1] for i in range(len(events))) == b.header.compressed_len
    assert scan_frames(b.payload) == b.rac_tables.comp_offsets.tolist()


def test_rejects_empty():
    with pytest.raises(EmptyPayload):
        rac.pack_rac_basket([], DEFAULT)
    with pytest.raises(EmptyPayload):
        rac.pack_rac_basket([b"a", b""], DEFAULT)


def test_plain_basket_on_rac_api():
    b = basket.pack_basket([b"abc", b"def"], DEFAULT)
    with pytest.raises(CorruptFrame):
        rac.unpack_event(b, 0)


def test_single_event_neutrality():
    (big,) = synthgen.iter_payloads(GenSpec(Kind.TLARGE, 2, 1))
    r = rac.pack_rac_basket([big], DEFAULT)
    p = basket.pack_basket([big], DEFAULT)
    assert r.payload == p.payload
    assert r.size - p.size == rac.table_overhead(1) == 12
    raw = len(big)
    assert abs(raw / r.size - raw / p.size) / (raw / p.size) < 0.01


def test_tsmall_ratio_penalty():
    events = list(synthgen.iter_payloads(GenSpec(Kind.TSMALL, 3, 16)))
    raw = 16 * 4000
    r = rac.pack_rac_basket(events, DEFAULT)
    p = basket.pack_basket(events, DEFAULT)
    assert raw / r.size < raw / p.size


def test_tfloat_ratio_penalty():
    events = list(synthgen.iter_payloads(GenSpec(Kind.TFLOAT, 3, 65536 // 24)))
    raw = 24 * len(events)
    assert raw / rac.pack_rac_basket(events, DEFAULT).size <= 0.8 * raw / basket.pack_basket(events, DEFAULT).size


def _corrupt_table(blob: bytes, which: int, value: int) -> bytes:
    buf = bytearray(blob)
    pos = basket.HEADER_SIZE + 4 * which
    buf[pos:pos + 4] = int(value).to_bytes(4, "little")
    return bytes(buf)


@pytest.mark.parametrize("which,value", [(0, 1), (1, 0), (3, 10 ** 6), (4, 0), (5, 999)])
def test_table_damage_detected_before_decompression(which, value, monkeypatch):
    events = [b"aaaa" * 10, b"bbbb" * 20, b"cccc" * 5]
    blob = rac.pack_rac_basket(events, DEFAULT).to_bytes()
    calls = []
    monkeypatch.setattr(codec, "_decompress", lambda *a: calls.append(a))
    with pytest.raises(CorruptFrame):
        BasketRecord.from_bytes(_corrupt_table(blob, which, value))
    assert not calls


def test_variable_length_plain_basket_carries_lengths():
    p = basket.pack_basket([b"a", b"bcd"], DEFAULT)
    assert p.header.flags == FLAG_LENGTHS
    assert p.size == basket.HEADER_SIZE + 8 + p.header.compressed_len
    parsed = BasketRecord.from_bytes(p.to_bytes())
    assert parsed.event_lengths().tolist() == [1, 3]
    u = basket.pack_basket([b"ab", b"cd"], DEFAULT)
    assert u.header.flags == 0
    assert BasketRecord.from_bytes(u.to_bytes()).event_lengths().tolist() == [2, 2]


def test_header_layout_is_bit_exact():
    b = rac.pack_rac_basket([b"xy", b"z"], CodecSpec(Algorithm.DEFLATE, 6), first_event_index=7)
    blob = b.to_bytes()
    h = blob[:32]
    assert h[0] == 1 and h[1] == 6 and h[2] == FLAG_RAC and h[3] == 0
    assert int.from_bytes(h[4:8], "little") == 2
    assert int.from_bytes(h[8:16], "little") == 3
    assert int.from_bytes(h[16:24], "little") == len(b.payload)
    assert int.from_bytes(h[24:32], "little") == 7
    offs = np.frombuffer(blob, "<u4", 3, 32)
    lens = np.frombuffer(blob, "<u4", 2, 44)
    assert offs.tolist() == [0, rac.access_point(b, 1)[0], len(b.payload)]
    assert lens.tolist() == [2, 1]
    assert blob[52:] == b.payload


def test_concurrent_unpack(rng):
    from concurrent.futures import ThreadPoolExecutor
    events = random_events(rng, 200, max_len=800)
    b = rac.pack_rac_basket(events, DEFAULT)
    with ThreadPoolExecutor(4) as pool:
        got = list(pool.map(lambda i: rac.unpack_event(b, i), range(len(events))))
    assert got == events
