"""Layout-blind block compression of whole files with random range reads.

Packed layout (little-endian)::

    "BPK1" u16 version, u8 codec, u8 level, u32 block_size, u64 original_len
    compressed blocks ...
    index: u32 comp_len per block, u32 entry count, u64 index_offset, "BPK1"

Block offsets are the prefix sums of the compressed lengths, starting right
after the header.

Reads go through two explicit caches: a compressed-fetch layer (blocks
already brought in from storage) and an uncompressed-block cache (decoded
blocks ready to serve). ``FetchStats`` counts what each read had to do.
"""

from __future__ import annotations

import os
import struct
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import codec as _codec
from .codec import CodecSession, CodecSpec
from .errors import CorruptFrame, InvalidBlockSize, IoFailure, RangeOutOfBounds

MAGIC = b"BPK1"
FORMAT_VERSION = 1
MIN_BLOCK_SIZE = 4096
MAX_BLOCK_SIZE = 1 << 20

_HEADER = struct.Struct("<4sHBBIQ")
_TAIL = struct.Struct("<IQ4s")


@dataclass
class BlockIndex:
    block_size: int
    original_len: int
    codec: CodecSpec
    comp_lens: np.ndarray
    data_start: int = _HEADER.size

    @property
    def entries(self) -> list[tuple[int, int]]:
        """(file_offset, comp_len) per block."""
        offs = self.offsets
        return [(int(o), int(n)) for o, n in zip(offs[:-1], self.comp_lens)]

    @property
    def offsets(self) -> np.ndarray:
        out = np.empty(len(self.comp_lens) + 1, dtype=np.int64)
        out[0] = self.data_start
        np.cumsum(self.comp_lens, dtype=np.int64, out=out[1:])
        out[1:] += self.data_start
        return out

    @property
    def packed_len(self) -> int:
        return self.data_start + int(self.comp_lens.sum(dtype=np.int64)) + 4 * len(self.comp_lens) + _TAIL.size

    def block_len(self, b: int) -> int:
        return min(self.block_size, self.original_len - b * self.block_size)


@dataclass
class FetchStats:
    blocks_fetched: int = 0
    bytes_fetched_compressed: int = 0
    bytes_decompressed: int = 0
    blocks_decompressed: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def reset(self) -> None:
        with self._lock:
            self.blocks_fetched = self.bytes_fetched_compressed = 0
            self.bytes_decompressed = self.blocks_decompressed = 0


def check_block_size(block_size: int) -> None:
    if not MIN_BLOCK_SIZE <= block_size <= MAX_BLOCK_SIZE or block_size & (block_size - 1):
        raise InvalidBlockSize(f"block size {block_size} is not a power of two in 4 KiB..1 MiB")


def blocks_spanned(offset: int, length: int, block_size: int) -> int:
    """Number of blocks overlapping ``[offset, offset + length)``."""
    if length <= 0:
        return 0
    return (offset + length - 1) // block_size - offset // block_size + 1


def pack_file(input_path, output_path, block_size: int, spec: CodecSpec,
              session: CodecSession | None = None) -> BlockIndex:
    check_block_size(block_size)
    comp_lens = []
    try:
        original_len = os.path.getsize(input_path)
        with open(input_path, "rb") as src, open(output_path, "wb") as dst:
            c, lvl = spec.wire
            dst.write(_HEADER.pack(MAGIC, FORMAT_VERSION, c, lvl, block_size, original_len))
            while True:
                block = src.read(block_size)
                if not block:
                    break
                frame = _codec.compress(spec, block, session)
                dst.write(frame)
                comp_lens.append(len(frame))
            index = BlockIndex(block_size, original_len, spec, np.asarray(comp_lens, dtype=np.uint32))
            index_offset = dst.tell()
            dst.write(index.comp_lens.astype("<u4").tobytes())
            dst.write(_TAIL.pack(len(comp_lens), index_offset, MAGIC))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return index


class BlockStore:
    """An opened packed file.

    ``block_cache`` bounds the uncompressed-block cache (None = unlimited,
    0 = disabled); ``fetch_cache`` keeps fetched compressed blocks in memory.
    """

    def __init__(self, path, block_cache: int | None = None, fetch_cache: bool = True,
                 stats: FetchStats | None = None):
        self.path = os.fspath(path)
        self.block_cache = block_cache
        self.fetch_cache = fetch_cache
        self.stats = stats or FetchStats()
        self.session = CodecSession()
        self._lock = threading.Lock()
        self._fetched: dict[int, bytes] = {}
        self._decoded: OrderedDict[int, bytes] = OrderedDict()
        try:
            self._fd = os.open(self.path, os.O_RDONLY)
            size = os.fstat(self._fd).st_size
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        try:
            self.index = self._load_index(size)
        except BaseException:
            os.close(self._fd)
            raise
        self._offsets = self.index.offsets.tolist()

    def _pread(self, n: int, offset: int) -> bytes:
        try:
            data = os.pread(self._fd, n, offset)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        if len(data) != n:
            raise CorruptFrame(f"short read at offset {offset}")
        return data

    def _load_index(self, size: int) -> BlockIndex:
        if size < _HEADER.size + _TAIL.size:
            raise CorruptFrame("packed file truncated")
        magic, version, c, lvl, block_size, original_len = _HEADER.unpack(self._pread(_HEADER.size, 0))
        if magic != MAGIC or version != FORMAT_VERSION:
            raise CorruptFrame("not a packed block file")
        count, index_offset, tmagic = _TAIL.unpack(self._pread(_TAIL.size, size - _TAIL.size))
        if tmagic != MAGIC:
            raise CorruptFrame("bad or truncated trailer")
        try:
            check_block_size(block_size)
        except InvalidBlockSize as exc:
            raise CorruptFrame(str(exc)) from None
        if count != -(-original_len // block_size) or index_offset + 4 * count + _TAIL.size != size:
            raise CorruptFrame("index does not match header")
        comp_lens = np.frombuffer(self._pread(4 * count, index_offset), dtype="<u4").astype(np.uint32)
        index = BlockIndex(block_size, original_len, CodecSpec.from_wire(c, lvl), comp_lens)
        if int(comp_lens.sum(dtype=np.int64)) + _HEADER.size != index_offset:
            raise CorruptFrame("block lengths do not tile the data region")
        return index

    def close(self) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def drop_caches(self) -> None:
        with self._lock:
            self._fetched.clear()
            self._decoded.clear()

    def _block(self, b: int) -> bytes:
        with self._lock:
            hit = self._decoded.get(b)
            if hit is not None:
                self._decoded.move_to_end(b)
                return hit
            frame = self._fetched.get(b)
        if frame is None:
            start, end = self._offsets[b], self._offsets[b + 1]
            frame = self._pread(end - start, start)
            with self._lock:
                self.stats.blocks_fetched += 1
                self.stats.bytes_fetched_compressed += len(frame)
                if self.fetch_cache:
                    self._fetched[b] = frame
        data = _codec.decompress(self.index.codec, frame, self.index.block_len(b), self.session)
        with self._lock:
            self.stats.blocks_decompressed += 1
            self.stats.bytes_decompressed += len(data)
            if self.block_cache is None or self.block_cache > 0:
                self._decoded[b] = data
                if self.block_cache is not None:
                    while len(self._decoded) > self.block_cache:
                        self._decoded.popitem(last=False)
        return data

    def read_range(self, offset: int, length: int) -> bytes:
        if offset < 0 or length < 0 or offset + length > self.index.original_len:
            raise RangeOutOfBounds(
                f"range [{offset}, {offset + length}) outside file of {self.index.original_len} bytes")
        if length == 0:
            return b""
        bs = self.index.block_size
        first, last = offset // bs, (offset + length - 1) // bs
        parts = [self._block(b) for b in range(first, last + 1)]
        lo = offset - first * bs
        if len(parts) == 1:
            return parts[0][lo:lo + length]
        return b"".join(parts)[lo:lo + length]


def open_store(path, block_cache: int | None = None, fetch_cache: bool = True) -> BlockStore:
    return BlockStore(path, block_cache, fetch_cache)


def read_range(store: BlockStore, offset: int, length: int, stats: FetchStats | None = None) -> bytes:
    if stats is not None and stats is not store.stats:
        store.stats = stats
    return store.read_range(offset, length)


def unpack_file(store, output_path) -> None:
    """Write the original bytes back out. ``store`` is a BlockStore or a path."""
    own = not isinstance(store, BlockStore)
    if own:
        store = BlockStore(store, block_cache=0, fetch_cache=False)
    try:
        with open(output_path, "wb") as dst:
            for b in range(len(store.index.comp_lens)):
                start, end = store._offsets[b], store._offsets[b + 1]
                frame = store._pread(end - start, start)
                dst.write(_codec.decompress(store.index.codec, frame, store.index.block_len(b), store.session))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    finally:
        if own:
            store.close()
