"""Basket records: the unit of compression and I/O.

On disk a basket is a fixed 32-byte header, an optional uncompressed table
block, then the compressed payload::

    codec u8, level u8, flags u8, reserved u8, event_count u32,
    uncompressed_len u64, compressed_len u64, first_event_index u64

flags bit0 (RAC): per-event frames; tables are ``event_count + 1`` u32 frame
offsets followed by ``event_count`` u32 event lengths.
flags bit1 (LENGTHS): whole-basket frame of variable-size events; table is
``event_count`` u32 event lengths. When neither bit is set every event has
length ``uncompressed_len / event_count``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import codec as _codec
from . import kernels
from .codec import CodecSession, CodecSpec
from .errors import CorruptFrame, EmptyPayload

HEADER = struct.Struct("<BBBBIQQQ")
HEADER_SIZE = HEADER.size

FLAG_RAC = 0x01
FLAG_LENGTHS = 0x02
_KNOWN_FLAGS = FLAG_RAC | FLAG_LENGTHS
_U32 = np.dtype("<u4")
U32_MAX = 0xFFFFFFFF


def table_size(flags: int, event_count: int) -> int:
    """Byte size of the uncompressed table block for a basket."""
    if flags & FLAG_RAC:
        return 4 * (2 * event_count + 1)
    if flags & FLAG_LENGTHS:
        return 4 * event_count
    return 0


@dataclass(frozen=True)
class BasketHeader:
    codec: CodecSpec
    flags: int
    event_count: int
    uncompressed_len: int
    compressed_len: int
    first_event_index: int

    @property
    def rac(self) -> bool:
        return bool(self.flags & FLAG_RAC)

    def pack(self) -> bytes:
        c, lvl = self.codec.wire
        return HEADER.pack(c, lvl, self.flags, 0, self.event_count,
                           self.uncompressed_len, self.compressed_len, self.first_event_index)

    @classmethod
    def unpack(cls, buf, offset: int = 0) -> "BasketHeader":
        if len(buf) - offset < HEADER_SIZE:
            raise CorruptFrame("truncated basket header")
        c, lvl, flags, _, n, ulen, clen, first = HEADER.unpack_from(buf, offset)
        if flags & ~_KNOWN_FLAGS or (flags & FLAG_RAC and flags & FLAG_LENGTHS):
            raise CorruptFrame(f"bad basket flags {flags:#x}")
        if n < 1:
            raise CorruptFrame("basket with zero events")
        return cls(CodecSpec.from_wire(c, lvl), flags, n, ulen, clen, first)


@dataclass(frozen=True)
class RacTables:
    comp_offsets: np.ndarray
    uncomp_lens: np.ndarray

    def pack(self) -> bytes:
        return self.comp_offsets.astype(_U32).tobytes() + self.uncomp_lens.astype(_U32).tobytes()


@dataclass(frozen=True)
class BasketRecord:
    header: BasketHeader
    payload: bytes
    rac_tables: RacTables | None = None
    # only for FLAG_LENGTHS baskets
    lengths: np.ndarray | None = None

    def __post_init__(self):
        if len(self.payload) != self.header.compressed_len:
            raise CorruptFrame("payload length differs from header compressed_len")

    @property
    def size(self) -> int:
        """Total on-disk bytes: header, tables and payload."""
        h = self.header
        return HEADER_SIZE + table_size(h.flags, h.event_count) + h.compressed_len

    def event_lengths(self) -> np.ndarray:
        h = self.header
        if self.rac_tables is not None:
            return self.rac_tables.uncomp_lens
        if self.lengths is not None:
            return self.lengths
        if h.uncompressed_len % h.event_count:
            raise CorruptFrame("uniform basket length not divisible by event count")
        return np.full(h.event_count, h.uncompressed_len // h.event_count, dtype=np.uint32)

    def to_bytes(self) -> bytes:
        parts = [self.header.pack()]
        if self.rac_tables is not None:
            parts.append(self.rac_tables.pack())
        elif self.lengths is not None:
            parts.append(self.lengths.astype(_U32).tobytes())
        parts.append(self.payload)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf, offset: int = 0) -> "BasketRecord":
        """Parse one basket; table invariants are checked before any decompression."""
        h = BasketHeader.unpack(buf, offset)
        pos = offset + HEADER_SIZE
        end = pos + table_size(h.flags, h.event_count) + h.compressed_len
        if end > len(buf):
            raise CorruptFrame("truncated basket")
        tables = lengths = None
        n = h.event_count
        if h.flags & FLAG_RAC:
            offs = np.frombuffer(buf, _U32, n + 1, pos)
            lens = np.frombuffer(buf, _U32, n, pos + 4 * (n + 1))
            problem = kernels.check_rac_tables(offs, lens, h.compressed_len, h.uncompressed_len)
            if problem:
                raise CorruptFrame(f"RAC tables: {problem}")
            tables = RacTables(offs, lens)
            pos += 4 * (2 * n + 1)
        elif h.flags & FLAG_LENGTHS:
            lengths = np.frombuffer(buf, _U32, n, pos)
            if int(lengths.sum(dtype=np.uint64)) != h.uncompressed_len or not lengths.all():
                raise CorruptFrame("event length table inconsistent with header")
            pos += 4 * n
        payload = bytes(buf[pos:end])
        return cls(h, payload, tables, lengths)


def _lengths_of(events) -> np.ndarray:
    lens = np.fromiter((len(e) for e in events), dtype=np.int64, count=len(events))
    if not len(events):
        raise EmptyPayload("a basket needs at least one event")
    if not lens.all():
        raise EmptyPayload("events must be at least one byte long")
    if lens.max() > U32_MAX:
        raise ValueError("event larger than 4 GiB")
    return lens.astype(np.uint32)


def pack_basket(events, spec: CodecSpec, first_event_index: int = 0,
                session: CodecSession | None = None) -> BasketRecord:
    """Compress the concatenation of ``events`` as one frame."""
    lens = _lengths_of(events)
    data = b"".join(events)
    payload = _codec.compress(spec, data, session)
    uniform = bool((lens == lens[0]).all())
    flags = 0 if uniform else FLAG_LENGTHS
    header = BasketHeader(spec, flags, len(events), len(data), len(payload), first_event_index)
    return BasketRecord(header, payload, None, None if uniform else lens)


def unpack_basket(basket: BasketRecord, session: CodecSession | None = None) -> bytes:
    """Decompress a whole basket back to the concatenated events."""
    h = basket.header
    if basket.rac_tables is None:
        return _codec.decompress(h.codec, basket.payload, h.uncompressed_len, session)
    from .rac import unpack_all
    return unpack_all(basket, session)
