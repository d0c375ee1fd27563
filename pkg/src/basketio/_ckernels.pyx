# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-event zlib loops and RAC table validation.

One z_stream is reused across events via deflateReset/inflateReset, which
removes the per-event allocation cost that dominates tiny-event packing.
"""

from libc.stdlib cimport malloc, realloc, free
from cpython.bytes cimport PyBytes_FromStringAndSize

import numpy as np

from .errors import CorruptFrame

IMPLEMENTATION = "cython"


cdef extern from "zlib.h" nogil:
    ctypedef struct z_stream:
        const unsigned char *next_in
        unsigned int avail_in
        unsigned long total_in
        unsigned char *next_out
        unsigned int avail_out
        unsigned long total_out
        void *zalloc
        void *zfree
        void *opaque
    int Z_OK
    int Z_STREAM_END
    int Z_FINISH
    int deflateInit(z_stream *strm, int level)
    int deflate(z_stream *strm, int flush)
    int deflateReset(z_stream *strm)
    int deflateEnd(z_stream *strm)
    unsigned long deflateBound(z_stream *strm, unsigned long sourceLen)
    int inflateInit(z_stream *strm)
    int inflate(z_stream *strm, int flush)
    int inflateReset(z_stream *strm)
    int inflateEnd(z_stream *strm)


def deflate_each(data, const unsigned int[::1] lengths, int level):
    cdef const unsigned char[::1] src = memoryview(data).cast("B")
    cdef Py_ssize_t n = lengths.shape[0]
    cdef Py_ssize_t i
    cdef size_t pos = 0, out = 0, cap, need, bound
    cdef unsigned char *buf
    cdef unsigned char *grown
    cdef z_stream strm
    cdef int rc = 0
    cdef size_t total = 0
    cdef const unsigned char *base = &src[0] if src.shape[0] else NULL
    offsets = np.empty(n + 1, dtype=np.uint32)
    cdef unsigned int[::1] offs = offsets
    offs[0] = 0

    for i in range(n):
        total += lengths[i]
    if total != <size_t>src.shape[0]:
        raise ValueError(f"lengths sum to {total}, data has {src.shape[0]} bytes")

    strm.zalloc = NULL
    strm.zfree = NULL
    strm.opaque = NULL
    if deflateInit(&strm, level) != Z_OK:
        raise MemoryError("deflateInit failed")
    cap = <size_t>deflateBound(&strm, 4096) + 64
    buf = <unsigned char *>malloc(cap)
    if buf == NULL:
        deflateEnd(&strm)
        raise MemoryError()
    with nogil:
        for i in range(n):
            bound = <size_t>deflateBound(&strm, lengths[i])
            need = out + bound
            if need > cap:
                while cap < need:
                    cap *= 2
                grown = <unsigned char *>realloc(buf, cap)
                if grown == NULL:
                    rc = -1
                    break
                buf = grown
            strm.next_in = base + pos
            strm.avail_in = lengths[i]
            strm.next_out = buf + out
            strm.avail_out = <unsigned int>bound
            rc = deflate(&strm, Z_FINISH)
            if rc != Z_STREAM_END:
                break
            out += bound - strm.avail_out
            pos += lengths[i]
            offs[i + 1] = <unsigned int>out
            deflateReset(&strm)
            rc = 0
    deflateEnd(&strm)
    if rc != 0:
        free(buf)
        raise RuntimeError(f"deflate failed with code {rc}")
    try:
        payload = PyBytes_FromStringAndSize(<char *>buf, out)
    finally:
        free(buf)
    return payload, offsets


def inflate_each(payload, const unsigned int[::1] comp_offsets, const unsigned int[::1] uncomp_lens):
    cdef const unsigned char[::1] src = memoryview(payload).cast("B")
    cdef Py_ssize_t n = uncomp_lens.shape[0]
    cdef Py_ssize_t i, bad = -1
    cdef size_t total = 0, upos = 0
    cdef z_stream strm
    cdef int rc
    cdef unsigned char *dst
    cdef const unsigned char *base = &src[0] if src.shape[0] else NULL

    if comp_offsets.shape[0] != n + 1 or comp_offsets[n] > <size_t>src.shape[0]:
        raise CorruptFrame("offset table does not match payload")
    for i in range(n):
        total += uncomp_lens[i]
    out = bytearray(total)
    cdef unsigned char[::1] outv = out
    dst = &outv[0] if total else NULL

    strm.zalloc = NULL
    strm.zfree = NULL
    strm.opaque = NULL
    strm.next_in = NULL
    strm.avail_in = 0
    if inflateInit(&strm) != Z_OK:
        raise MemoryError("inflateInit failed")
    with nogil:
        for i in range(n):
            if comp_offsets[i + 1] < comp_offsets[i]:
                bad = i
                break
            strm.next_in = base + comp_offsets[i]
            strm.avail_in = comp_offsets[i + 1] - comp_offsets[i]
            strm.next_out = dst + upos
            strm.avail_out = uncomp_lens[i]
            rc = inflate(&strm, Z_FINISH)
            if rc != Z_STREAM_END or strm.avail_in != 0 or strm.avail_out != 0:
                bad = i
                break
            upos += uncomp_lens[i]
            inflateReset(&strm)
    inflateEnd(&strm)
    if bad >= 0:
        raise CorruptFrame(f"event {bad}: frame does not decode to {uncomp_lens[bad]} bytes")
    return bytes(out)


def check_rac_tables(const unsigned int[::1] comp_offsets, const unsigned int[::1] uncomp_lens,
                     unsigned long long compressed_len, unsigned long long uncompressed_len):
    cdef Py_ssize_t n = uncomp_lens.shape[0]
    cdef Py_ssize_t i
    cdef unsigned long long total = 0
    if comp_offsets.shape[0] != n + 1:
        return "offset table length is not event_count + 1"
    if comp_offsets[0] != 0:
        return "first access point is not 0"
    for i in range(n):
        if comp_offsets[i + 1] <= comp_offsets[i]:
            return f"access points not strictly increasing at event {i}"
    if comp_offsets[n] != compressed_len:
        return "last access point differs from compressed length"
    for i in range(n):
        if uncomp_lens[i] < 1:
            return f"event {i} has zero length"
        total += uncomp_lens[i]
    if total != uncompressed_len:
        return "event lengths do not sum to uncompressed length"
    return None
