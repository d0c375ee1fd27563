"""Uniform compress/decompress over Deflate (zlib), LZMA (xz) and LZ4 frames.

Every frame is self-delimiting in its own format; the uncompressed length is
always carried out-of-band and checked on decompression.
"""

from __future__ import annotations

import enum
import lzma
import threading
import time
import zlib
from dataclasses import dataclass, field
from typing import NamedTuple

try:
    import lz4.frame as lz4frame
except ImportError:  # pragma: no cover
    lz4frame = None

from .errors import CodecUnavailable, CorruptFrame, LengthMismatch, UnsupportedLevel


class Algorithm(enum.IntEnum):
    """Codec identifiers; the integer value is the on-disk byte."""

    IDENTITY = 0
    DEFLATE = 1
    LZMA = 2
    LZ4 = 3
    LZ4HC = 4


LEVELS = {
    Algorithm.IDENTITY: range(0, 1),
    Algorithm.DEFLATE: range(1, 10),
    Algorithm.LZMA: range(1, 10),
    Algorithm.LZ4: range(0, 1),
    Algorithm.LZ4HC: range(4, 10),
}

_NAMES = {
    Algorithm.IDENTITY: "identity",
    Algorithm.DEFLATE: "deflate",
    Algorithm.LZMA: "lzma",
    Algorithm.LZ4: "lz4",
    Algorithm.LZ4HC: "lz4hc",
}


@dataclass(frozen=True)
class CodecSpec:
    algorithm: Algorithm
    level: int = 0

    def __post_init__(self):
        algorithm = Algorithm(self.algorithm)
        object.__setattr__(self, "algorithm", algorithm)
        if algorithm is Algorithm.LZ4:
            # plain LZ4 has no level knob
            object.__setattr__(self, "level", 0)
        elif self.level not in LEVELS[algorithm]:
            r = LEVELS[algorithm]
            raise UnsupportedLevel(
                f"{_NAMES[algorithm]} level {self.level} outside {r.start}..{r.stop - 1}"
            )

    @classmethod
    def parse(cls, name: str, level: int | None = None) -> "CodecSpec":
        """Build a spec from a codec name such as ``"deflate"`` or ``"lz4hc"``.

        A level of 0 for Deflate or LZMA means "store" and maps to Identity.
        ``name`` may also carry the level, e.g. ``"lzma-5"``.
        """
        name = name.strip().lower()
        if "-" in name and level is None:
            name, _, lvl = name.partition("-")
            level = int(lvl)
        aliases = {"zlib": "deflate", "none": "identity", "xz": "lzma"}
        name = aliases.get(name, name)
        try:
            algorithm = next(a for a, n in _NAMES.items() if n == name)
        except StopIteration:
            raise CodecUnavailable(f"unknown codec {name!r}") from None
        if level is None:
            level = {Algorithm.DEFLATE: 6, Algorithm.LZMA: 5, Algorithm.LZ4HC: 9}.get(algorithm, 0)
        if level == 0 and algorithm in (Algorithm.DEFLATE, Algorithm.LZMA):
            return IDENTITY
        return cls(algorithm, level)

    @classmethod
    def from_wire(cls, codec: int, level: int) -> "CodecSpec":
        try:
            algorithm = Algorithm(codec)
        except ValueError:
            raise CorruptFrame(f"unknown codec id {codec}") from None
        try:
            return cls(algorithm, level)
        except UnsupportedLevel as exc:
            raise CorruptFrame(str(exc)) from None

    @property
    def wire(self) -> tuple[int, int]:
        return int(self.algorithm), self.level

    @property
    def name(self) -> str:
        if self.algorithm in (Algorithm.IDENTITY, Algorithm.LZ4):
            return _NAMES[self.algorithm]
        return f"{_NAMES[self.algorithm]}-{self.level}"

    def __str__(self):
        return self.name


IDENTITY = CodecSpec(Algorithm.IDENTITY, 0)
DEFAULT = CodecSpec(Algorithm.DEFLATE, 6)


@dataclass
class CodecCounters:
    """Running byte/call/CPU totals; safe to update from several threads."""

    bytes_in: int = 0
    bytes_out: int = 0
    calls: int = 0
    cpu_nanos: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, bytes_in: int, bytes_out: int, cpu_nanos: int = 0, calls: int = 1) -> None:
        with self._lock:
            self.bytes_in += bytes_in
            self.bytes_out += bytes_out
            self.calls += calls
            self.cpu_nanos += cpu_nanos

    @property
    def ratio(self) -> float | None:
        return self.bytes_in / self.bytes_out if self.bytes_out else None

    def reset(self) -> None:
        with self._lock:
            self.bytes_in = self.bytes_out = self.calls = self.cpu_nanos = 0


@dataclass
class CodecSession:
    """Separate counters for the compress and decompress directions."""

    compress: CodecCounters = field(default_factory=CodecCounters)
    decompress: CodecCounters = field(default_factory=CodecCounters)

    def reset(self) -> None:
        self.compress.reset()
        self.decompress.reset()


SESSION = CodecSession()


def _require_lz4():
    if lz4frame is None:
        raise CodecUnavailable("lz4 frame support needs the 'lz4' package")
    return lz4frame


def _compress(spec: CodecSpec, data) -> bytes:
    alg = spec.algorithm
    if alg is Algorithm.IDENTITY:
        return bytes(data)
    if alg is Algorithm.DEFLATE:
        return zlib.compress(data, spec.level)
    if alg is Algorithm.LZMA:
        return lzma.compress(data, format=lzma.FORMAT_XZ, check=lzma.CHECK_CRC32, preset=spec.level)
    level = 0 if alg is Algorithm.LZ4 else spec.level
    return _require_lz4().compress(data, compression_level=level, content_checksum=True)


def _decompress(spec: CodecSpec, frame) -> bytes:
    alg = spec.algorithm
    if alg is Algorithm.IDENTITY:
        return bytes(frame)
    if alg is Algorithm.DEFLATE:
        d = zlib.decompressobj()
        try:
            out = d.decompress(frame)
        except zlib.error as exc:
            raise CorruptFrame(f"deflate: {exc}") from None
        if not d.eof or d.unused_data:
            raise CorruptFrame("deflate: truncated frame or trailing bytes")
        return out
    if alg is Algorithm.LZMA:
        d = lzma.LZMADecompressor(format=lzma.FORMAT_XZ)
        try:
            out = d.decompress(frame)
        except lzma.LZMAError as exc:
            raise CorruptFrame(f"lzma: {exc}") from None
        if not d.eof or d.unused_data:
            raise CorruptFrame("lzma: truncated frame or trailing bytes")
        return out
    # one-shot call: a streaming decompressor object costs ~50% more per frame
    try:
        out, used = _require_lz4().decompress(frame, return_bytes_read=True)
    except RuntimeError as exc:
        raise CorruptFrame(f"lz4: {exc}") from None
    if used != len(frame):
        raise CorruptFrame("lz4: trailing bytes after frame")
    return out


def compress(spec: CodecSpec, data, session: CodecSession | None = None) -> bytes:
    """Compress ``data`` into one self-contained frame of ``spec``'s format."""
    t0 = time.thread_time_ns()
    out = _compress(spec, data)
    (session or SESSION).compress.add(len(data), len(out), time.thread_time_ns() - t0)
    return out


def decompress(spec: CodecSpec, frame, expected_len: int, session: CodecSession | None = None) -> bytes:
    t0 = time.thread_time_ns()
    out = _decompress(spec, frame)
    (session or SESSION).decompress.add(len(frame), len(out), time.thread_time_ns() - t0)
    if len(out) != expected_len:
        raise LengthMismatch(f"{spec}: got {len(out)} bytes, expected {expected_len}")
    return out


class CodecInfo(NamedTuple):
    template: CodecSpec
    name: str
    levels: range
    available: bool


def list_codecs() -> list[CodecInfo]:
    out = []
    for alg in Algorithm:
        levels = LEVELS[alg]
        default = {Algorithm.DEFLATE: 6, Algorithm.LZMA: 5, Algorithm.LZ4HC: 9}.get(alg, 0)
        available = lz4frame is not None or alg not in (Algorithm.LZ4, Algorithm.LZ4HC)
        out.append(CodecInfo(CodecSpec(alg, default), _NAMES[alg], levels, available))
    return out


def all_specs() -> list[CodecSpec]:
    """Every valid (algorithm, level) combination."""
    return [CodecSpec(alg, lvl) for alg in Algorithm for lvl in LEVELS[alg]]
