"""Columnar event container: a tree of branches, each a sequence of baskets.

File layout (little-endian)::

    "RCF1" u16 version u16 reserved
    basket records ...                      (see basketio.basket)
    footer: u32 branch count, per branch u16 name length + UTF-8 name,
            u32 locator count, locators (u64 file_offset, u64 compressed_len,
            u32 event_count, u64 first_event_index, u8 codec, u8 level,
            u8 flags, u8 pad)
    trailer: u64 footer_offset, "RCF1"
"""

from __future__ import annotations

import bisect
import os
import struct
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import basket as _basket
from .basket import HEADER_SIZE, BasketRecord, table_size
from .codec import DEFAULT, CodecSession, CodecSpec
from .errors import (BadMagic, CorruptFooter, CorruptFrame, EmptyPayload, IndexOutOfRange,
                     InvalidCapacity, IoFailure, UsageError, WriterClosed)
from .rac import pack_rac_basket, unpack_event

MAGIC = b"RCF1"
FORMAT_VERSION = 1
DEFAULT_BASKET_CAPACITY = 65536
MIN_BASKET_CAPACITY = 4096

_FILE_HEADER = struct.Struct("<4sHH")
_TRAILER = struct.Struct("<Q4s")
_LOCATOR = struct.Struct("<QQIQBBBB")


@dataclass(frozen=True)
class Locator:
    file_offset: int
    compressed_len: int
    event_count: int
    first_event_index: int
    codec: tuple[int, int]
    flags: int

    @property
    def record_size(self) -> int:
        return HEADER_SIZE + table_size(self.flags, self.event_count) + self.compressed_len


@dataclass
class BranchDirectory:
    branch_name: str
    basket_locators: list[Locator] = field(default_factory=list)

    @property
    def total_events(self) -> int:
        return sum(loc.event_count for loc in self.basket_locators)


@dataclass
class TreeIndex:
    branches: list[BranchDirectory] = field(default_factory=list)

    def branch(self, name: str) -> BranchDirectory:
        for b in self.branches:
            if b.branch_name == name:
                return b
        raise KeyError(name)

    @property
    def total_events(self) -> dict[str, int]:
        return {b.branch_name: b.total_events for b in self.branches}

    def to_bytes(self) -> bytes:
        out = [struct.pack("<I", len(self.branches))]
        for b in self.branches:
            name = b.branch_name.encode("utf-8")
            out.append(struct.pack("<H", len(name)) + name)
            out.append(struct.pack("<I", len(b.basket_locators)))
            for loc in b.basket_locators:
                out.append(_LOCATOR.pack(loc.file_offset, loc.compressed_len, loc.event_count,
                                         loc.first_event_index, loc.codec[0], loc.codec[1],
                                         loc.flags, 0))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, buf: bytes, data_end: int) -> "TreeIndex":
        """Parse a footer; ``data_end`` bounds the basket region for sanity checks."""
        try:
            (nbranches,) = struct.unpack_from("<I", buf, 0)
            pos = 4
            branches = []
            for _ in range(nbranches):
                (nlen,) = struct.unpack_from("<H", buf, pos)
                pos += 2
                name = buf[pos:pos + nlen].decode("utf-8")
                if len(name.encode("utf-8")) != nlen:
                    raise CorruptFooter("truncated branch name")
                pos += nlen
                (nloc,) = struct.unpack_from("<I", buf, pos)
                pos += 4
                locs = []
                for _ in range(nloc):
                    off, clen, n, first, c, lvl, flags, _pad = _LOCATOR.unpack_from(buf, pos)
                    pos += _LOCATOR.size
                    locs.append(Locator(off, clen, n, first, (c, lvl), flags))
                branches.append(BranchDirectory(name, locs))
        except (struct.error, UnicodeDecodeError) as exc:
            raise CorruptFooter(f"unreadable footer: {exc}") from None
        if pos != len(buf):
            raise CorruptFooter("footer length does not match its contents")
        index = cls(branches)
        index.validate(data_end)
        return index

    def validate(self, data_end: int) -> None:
        names = [b.branch_name for b in self.branches]
        if len(set(names)) != len(names):
            raise CorruptFooter("duplicate branch names")
        for b in self.branches:
            expect = 0
            for loc in b.basket_locators:
                if loc.first_event_index != expect or loc.event_count < 1:
                    raise CorruptFooter(f"branch {b.branch_name!r}: baskets do not tile events")
                if loc.file_offset < _FILE_HEADER.size or loc.file_offset + loc.record_size > data_end:
                    raise CorruptFooter(f"branch {b.branch_name!r}: locator outside data region")
                expect += loc.event_count


@dataclass
class _Pending:
    events: list = field(default_factory=list)
    nbytes: int = 0
    next_index: int = 0
    directory: BranchDirectory | None = None


class TreeWriter:
    """Single-pass writer; baskets are sealed as branch buffers fill up."""

    def __init__(self, path, basket_capacity: int = DEFAULT_BASKET_CAPACITY,
                 default_codec: CodecSpec = DEFAULT, rac: bool = False,
                 session: CodecSession | None = None):
        if basket_capacity < MIN_BASKET_CAPACITY:
            raise InvalidCapacity(f"basket capacity {basket_capacity} below {MIN_BASKET_CAPACITY}")
        self.path = os.fspath(path)
        self.basket_capacity = basket_capacity
        self.codec = default_codec
        self.rac = rac
        self.session = session or CodecSession()
        self._branches: dict[str, _Pending] = {}
        self._index = TreeIndex()
        try:
            self._fh = open(self.path, "wb")
            self._fh.write(_FILE_HEADER.pack(MAGIC, FORMAT_VERSION, 0))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self._offset = _FILE_HEADER.size
        self.closed = False

    def __enter__(self):
        return self

    def __exit__(self, exc_type, *exc):
        if not self.closed:
            if exc_type is None:
                self.finalize()
            else:
                self._fh.close()
                self.closed = True

    def declare_branch(self, name: str) -> None:
        if self.closed:
            raise WriterClosed("writer already finalized")
        if name not in self._branches:
            if len(name.encode("utf-8")) > 0xFFFF:
                raise UsageError("branch name too long")
            pending = _Pending(directory=BranchDirectory(name))
            self._branches[name] = pending
            self._index.branches.append(pending.directory)

    def append_event(self, branch: str, payload: bytes) -> None:
        if self.closed:
            raise WriterClosed("writer already finalized")
        if not payload:
            raise EmptyPayload("events must be at least one byte long")
        pending = self._branches.get(branch)
        if pending is None:
            self.declare_branch(branch)
            pending = self._branches[branch]
        pending.events.append(bytes(payload))
        pending.nbytes += len(payload)
        # an oversized event also pushes nbytes past capacity, so it seals here
        if pending.nbytes >= self.basket_capacity:
            self._seal(pending)

    def _seal(self, pending: _Pending) -> None:
        if not pending.events:
            return
        pack = pack_rac_basket if self.rac else _basket.pack_basket
        record = pack(pending.events, self.codec, pending.next_index, self.session)
        h = record.header
        try:
            self._fh.write(record.to_bytes())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        pending.directory.basket_locators.append(
            Locator(self._offset, h.compressed_len, h.event_count, h.first_event_index,
                    h.codec.wire, h.flags))
        self._offset += record.size
        pending.next_index += h.event_count
        pending.events = []
        pending.nbytes = 0

    def finalize(self) -> TreeIndex:
        if self.closed:
            raise WriterClosed("writer already finalized")
        try:
            for pending in self._branches.values():
                self._seal(pending)
            footer = self._index.to_bytes()
            self._fh.write(footer)
            self._fh.write(_TRAILER.pack(self._offset, MAGIC))
            self._fh.close()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self.closed = True
        return self._index


@dataclass
class ReaderStats:
    """Fetch and decompression accounting for one reader session."""

    baskets_fetched: int = 0
    bytes_fetched: int = 0
    baskets_decompressed: int = 0
    bytes_decompressed: int = 0
    touched: set = field(default_factory=set, repr=False)

    @property
    def baskets_touched(self) -> int:
        return len(self.touched)

    def reset(self) -> None:
        self.baskets_fetched = self.bytes_fetched = 0
        self.baskets_decompressed = self.bytes_decompressed = 0
        self.touched = set()


class TreeReader:
    """Random and strided access to a finalized container file.

    Two caches model the memory hierarchy: fetched basket records (the file
    bytes already in memory; ``fetch_cache=False`` re-reads every time) and
    an LRU of decompressed non-RAC baskets holding ``cache_entries`` entries
    (0 disables it).
    """

    def __init__(self, path, cache_entries: int = 1, fetch_cache: bool = True):
        self.path = os.fspath(path)
        self.cache_entries = cache_entries
        self.fetch_cache = fetch_cache
        self.stats = ReaderStats()
        self.session = CodecSession()
        self._lock = threading.Lock()
        self._fetched: dict[tuple[str, int], BasketRecord] = {}
        self._decoded: OrderedDict = OrderedDict()
        try:
            self._fd = os.open(self.path, os.O_RDONLY)
            self.file_size = os.fstat(self._fd).st_size
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        try:
            self._load_index()
        except BaseException:
            os.close(self._fd)
            raise

    def _pread(self, n: int, offset: int) -> bytes:
        try:
            data = os.pread(self._fd, n, offset)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        if len(data) != n:
            raise CorruptFrame(f"short read at offset {offset}")
        return data

    def _load_index(self) -> None:
        hsize, tsize = _FILE_HEADER.size, _TRAILER.size
        if self.file_size < hsize + tsize:
            raise BadMagic("file too small to be a container")
        magic, version, _ = _FILE_HEADER.unpack(self._pread(hsize, 0))
        if magic != MAGIC:
            raise BadMagic(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise CorruptFooter(f"unsupported format version {version}")
        footer_offset, tmagic = _TRAILER.unpack(self._pread(tsize, self.file_size - tsize))
        if tmagic != MAGIC:
            raise CorruptFooter("bad trailer magic")
        if not hsize <= footer_offset <= self.file_size - tsize:
            raise CorruptFooter("footer offset out of range")
        self.footer_bytes = self._pread(self.file_size - tsize - footer_offset, footer_offset)
        self.index = TreeIndex.from_bytes(self.footer_bytes, footer_offset)
        self._firsts = {
            b.branch_name: [loc.first_event_index for loc in b.basket_locators]
            for b in self.index.branches
        }

    def close(self) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def branch_names(self) -> list[str]:
        return [b.branch_name for b in self.index.branches]

    def total_events(self, branch: str) -> int:
        return self._directory(branch).total_events

    def _directory(self, branch: str) -> BranchDirectory:
        try:
            return self.index.branch(branch)
        except KeyError:
            raise UsageError(f"no branch named {branch!r}") from None

    def locate(self, branch: str, index: int) -> tuple[int, int]:
        """Map an event index to (basket number, position within basket)."""
        total = self.total_events(branch)
        if not 0 <= index < total:
            raise IndexOutOfRange(f"event {index} out of range for branch {branch!r} ({total} events)")
        firsts = self._firsts[branch]
        k = bisect.bisect_right(firsts, index) - 1
        return k, index - firsts[k]

    def _read_record(self, branch: str, k: int) -> BasketRecord:
        loc = self._directory(branch).basket_locators[k]
        record = BasketRecord.from_bytes(self._pread(loc.record_size, loc.file_offset))
        h = record.header
        if (h.event_count, h.first_event_index, h.codec.wire, h.flags, h.compressed_len) != (
                loc.event_count, loc.first_event_index, loc.codec, loc.flags, loc.compressed_len):
            raise CorruptFrame(f"basket {k} of {branch!r} disagrees with its locator")
        return record

    def _fetch(self, branch: str, k: int) -> BasketRecord:
        key = (branch, k)
        with self._lock:
            self.stats.touched.add(key)
            record = self._fetched.get(key)
        if record is not None:
            return record
        record = self._read_record(branch, k)
        with self._lock:
            self.stats.baskets_fetched += 1
            self.stats.bytes_fetched += record.size
            if self.fetch_cache:
                self._fetched[key] = record
        return record

    def _decoded_basket(self, branch: str, k: int, record: BasketRecord):
        key = (branch, k)
        with self._lock:
            hit = self._decoded.get(key)
            if hit is not None:
                self._decoded.move_to_end(key)
                return hit
        data = _basket.unpack_basket(record, self.session)
        ends = np.cumsum(record.event_lengths(), dtype=np.int64)
        starts = np.concatenate(([0], ends[:-1])).tolist()
        entry = (data, starts, ends.tolist())
        with self._lock:
            self.stats.baskets_decompressed += 1
            self.stats.bytes_decompressed += len(data)
            if self.cache_entries > 0:
                self._decoded[key] = entry
                while len(self._decoded) > self.cache_entries:
                    self._decoded.popitem(last=False)
        return entry

    def read_event(self, branch: str, index: int) -> bytes:
        k, j = self.locate(branch, index)
        record = self._fetch(branch, k)
        if record.header.rac:
            event = unpack_event(record, j, self.session)
            with self._lock:
                self.stats.bytes_decompressed += len(event)
            return event
        data, starts, ends = self._decoded_basket(branch, k, record)
        return data[starts[j]:ends[j]]

    def scan(self, branch: str, stride: int = 1) -> Iterator[bytes]:
        """Yield events 0, stride, 2*stride, ... in order.

        Accounting matches calling :meth:`read_event` on each index; a
        basket is decoded at most once per visit.
        """
        if stride < 1:
            raise UsageError("stride must be >= 1")
        directory = self._directory(branch)
        nxt = 0
        for k, loc in enumerate(directory.basket_locators):
            end = loc.first_event_index + loc.event_count
            if nxt >= end:
                continue
            record = self._fetch(branch, k)
            wanted = range(nxt - loc.first_event_index, loc.event_count, stride)
            if record.header.rac:
                if stride == 1:
                    data = _basket.unpack_basket(record, self.session)
                    with self._lock:
                        self.stats.bytes_decompressed += len(data)
                    ends = np.cumsum(record.event_lengths(), dtype=np.int64).tolist()
                    start = 0
                    for e in ends:
                        yield data[start:e]
                        start = e
                else:
                    for j in wanted:
                        event = unpack_event(record, j, self.session)
                        with self._lock:
                            self.stats.bytes_decompressed += len(event)
                        yield event
            else:
                data, starts, ends = self._decoded_basket(branch, k, record)
                for j in wanted:
                    yield data[starts[j]:ends[j]]
            nxt = loc.first_event_index + wanted[-1] + stride

    def warm(self) -> None:
        """Load every basket record into memory (hot file cache), then zero the stats."""
        for b in self.index.branches:
            for k in range(len(b.basket_locators)):
                self._fetch(b.branch_name, k)
        self.drop_decoded()
        self.stats.reset()

    def drop_decoded(self) -> None:
        with self._lock:
            self._decoded.clear()

    def drop_caches(self) -> None:
        with self._lock:
            self._decoded.clear()
            self._fetched.clear()

    def event_extent(self, branch: str, index: int) -> tuple[int, int]:
        """Absolute (file offset, length) of an event stored uncompressed.

        Only meaningful for Identity-codec, non-RAC baskets; used to map events
        onto byte ranges of the raw file for layout-blind compression.
        """
        k, j = self.locate(branch, index)
        loc = self._directory(branch).basket_locators[k]
        if loc.codec[0] != 0 or loc.flags & _basket.FLAG_RAC:
            raise UsageError("event extents need an uncompressed, non-RAC container")
        base = loc.file_offset + HEADER_SIZE + table_size(loc.flags, loc.event_count)
        if loc.flags & _basket.FLAG_LENGTHS:
            lens = self._read_record(branch, k).event_lengths()
            start = int(lens[:j].sum(dtype=np.int64))
            return base + start, int(lens[j])
        size = loc.compressed_len // loc.event_count
        return base + j * size, size

    def event_extents(self, branch: str) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised :meth:`event_extent` for every event of a branch."""
        offs, lens = [], []
        for k, loc in enumerate(self._directory(branch).basket_locators):
            if loc.codec[0] != 0 or loc.flags & _basket.FLAG_RAC:
                raise UsageError("event extents need an uncompressed, non-RAC container")
            base = loc.file_offset + HEADER_SIZE + table_size(loc.flags, loc.event_count)
            if loc.flags & _basket.FLAG_LENGTHS:
                sizes = self._read_record(branch, k).event_lengths().astype(np.int64)
            else:
                sizes = np.full(loc.event_count, loc.compressed_len // loc.event_count, dtype=np.int64)
            starts = np.zeros(loc.event_count, dtype=np.int64)
            np.cumsum(sizes[:-1], out=starts[1:])
            offs.append(base + starts)
            lens.append(sizes)
        if not offs:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(offs), np.concatenate(lens)


def open_writer(path, basket_capacity: int = DEFAULT_BASKET_CAPACITY,
                default_codec: CodecSpec = DEFAULT, rac: bool = False) -> TreeWriter:
    return TreeWriter(path, basket_capacity, default_codec, rac)


def append_event(writer: TreeWriter, branch: str, payload: bytes) -> None:
    writer.append_event(branch, payload)


def finalize(writer: TreeWriter) -> TreeIndex:
    return writer.finalize()


def open_reader(path, cache_entries: int = 1, fetch_cache: bool = True) -> TreeReader:
    return TreeReader(path, cache_entries, fetch_cache)


def read_event(reader: TreeReader, branch: str, index: int) -> bytes:
    return reader.read_event(branch, index)


def scan(reader: TreeReader, branch: str, stride: int = 1) -> Iterator[bytes]:
    return reader.scan(branch, stride)
