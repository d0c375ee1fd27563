"""Pure-Python versions of the per-event hot loops.

Semantics match ``_ckernels`` exactly, including output bytes, so either can
back :mod:`basketio.kernels`.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import CorruptFrame

IMPLEMENTATION = "python"


def deflate_each(data, lengths, level: int):
    """Compress consecutive slices of ``data`` as independent zlib frames.

    Returns the concatenated frames and the ``len(lengths) + 1`` frame offsets.
    """
    mv = memoryview(data)
    frames = []
    offsets = np.empty(len(lengths) + 1, dtype=np.uint32)
    offsets[0] = 0
    pos = out = 0
    for i, n in enumerate(lengths.tolist() if hasattr(lengths, "tolist") else lengths):
        frame = zlib.compress(mv[pos:pos + n], level)
        frames.append(frame)
        pos += n
        out += len(frame)
        offsets[i + 1] = out
    if pos != len(mv):
        raise ValueError(f"lengths sum to {pos}, data has {len(mv)} bytes")
    return b"".join(frames), offsets


def inflate_each(payload, comp_offsets, uncomp_lens) -> bytes:
    mv = memoryview(payload)
    offs = comp_offsets.tolist() if hasattr(comp_offsets, "tolist") else list(comp_offsets)
    lens = uncomp_lens.tolist() if hasattr(uncomp_lens, "tolist") else list(uncomp_lens)
    parts = []
    for i, n in enumerate(lens):
        d = zlib.decompressobj()
        try:
            out = d.decompress(mv[offs[i]:offs[i + 1]])
        except zlib.error as exc:
            raise CorruptFrame(f"event {i}: {exc}") from None
        if not d.eof or d.unused_data or len(out) != n:
            raise CorruptFrame(f"event {i}: frame does not decode to {n} bytes")
        parts.append(out)
    return b"".join(parts)


def check_rac_tables(comp_offsets, uncomp_lens, compressed_len: int, uncompressed_len: int):
    """Return a description of the first broken table invariant, or None."""
    offs = comp_offsets.tolist() if hasattr(comp_offsets, "tolist") else list(comp_offsets)
    lens = uncomp_lens.tolist() if hasattr(uncomp_lens, "tolist") else list(uncomp_lens)
    if len(offs) != len(lens) + 1:
        return "offset table length is not event_count + 1"
    if offs[0] != 0:
        return "first access point is not 0"
    for i in range(len(lens)):
        if offs[i + 1] <= offs[i]:
            return f"access points not strictly increasing at event {i}"
    if offs[-1] != compressed_len:
        return "last access point differs from compressed length"
    total = 0
    for i, n in enumerate(lens):
        if n < 1:
            return f"event {i} has zero length"
        total += n
    if total != uncompressed_len:
        return "event lengths do not sum to uncompressed length"
    return None
