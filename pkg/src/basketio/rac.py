"""Random Access Compression: one codec frame per event inside a basket.

The basket carries an uncompressed table of frame offsets ("access points")
and event lengths, so a single event can be decompressed without touching
its neighbours.
"""

from __future__ import annotations

import time

import numpy as np

from . import codec as _codec
from . import kernels
from .basket import (FLAG_RAC, U32_MAX, BasketHeader, BasketRecord, RacTables,
                     _lengths_of, table_size)
from .codec import SESSION, Algorithm, CodecSession, CodecSpec
from .errors import CorruptFrame, IndexOutOfRange

__all__ = ["pack_rac_basket", "unpack_event", "access_point", "unpack_all", "table_overhead"]


def table_overhead(event_count: int) -> int:
    """Extra on-disk bytes a RAC basket pays for its tables (12 for one event)."""
    return table_size(FLAG_RAC, event_count)


def pack_rac_basket(events, spec: CodecSpec, first_event_index: int = 0,
                    session: CodecSession | None = None) -> BasketRecord:
    lens = _lengths_of(events)
    data = b"".join(events)
    session = session or SESSION
    if spec.algorithm is Algorithm.DEFLATE:
        t0 = time.thread_time_ns()
        payload, offsets = kernels.deflate_each(data, lens, spec.level)
        session.compress.add(len(data), len(payload), time.thread_time_ns() - t0, calls=len(events))
    else:
        frames = [_codec.compress(spec, e, session) for e in events]
        offsets = np.zeros(len(frames) + 1, dtype=np.int64)
        np.cumsum([len(f) for f in frames], out=offsets[1:])
        payload = b"".join(frames)
    if len(payload) > U32_MAX:
        raise ValueError("RAC basket payload exceeds 4 GiB")
    tables = RacTables(np.asarray(offsets, dtype=np.uint32), lens)
    header = BasketHeader(spec, FLAG_RAC, len(events), len(data), len(payload), first_event_index)
    return BasketRecord(header, payload, tables)


def _tables(basket: BasketRecord) -> RacTables:
    if basket.rac_tables is None or not basket.header.rac:
        raise CorruptFrame("basket was not written in RAC mode")
    return basket.rac_tables


def access_point(basket: BasketRecord, i: int) -> tuple[int, int]:
    """Offset and length of event ``i``'s frame within the basket payload."""
    t = _tables(basket)
    if not 0 <= i < basket.header.event_count:
        raise IndexOutOfRange(f"event {i} not in basket of {basket.header.event_count}")
    start = int(t.comp_offsets[i])
    return start, int(t.comp_offsets[i + 1]) - start


def unpack_event(basket: BasketRecord, i: int, session: CodecSession | None = None) -> bytes:
    start, length = access_point(basket, i)
    frame = memoryview(basket.payload)[start:start + length]
    return _codec.decompress(basket.header.codec, frame, int(basket.rac_tables.uncomp_lens[i]), session)


def unpack_all(basket: BasketRecord, session: CodecSession | None = None) -> bytes:
    """Decompress every event of a RAC basket, concatenated."""
    t = _tables(basket)
    h = basket.header
    session = session or SESSION
    if h.codec.algorithm is Algorithm.DEFLATE:
        t0 = time.thread_time_ns()
        out = kernels.inflate_each(basket.payload, t.comp_offsets, t.uncomp_lens)
        session.decompress.add(h.compressed_len, len(out), time.thread_time_ns() - t0,
                               calls=h.event_count)
        return out
    return b"".join(unpack_event(basket, i, session) for i in range(h.event_count))
