"""Basket-based columnar event storage with pluggable compression.

Submodules: ``codec`` (Deflate/LZMA/LZ4 frames), ``container`` (tree/branch/
basket files), ``rac`` (per-event random access compression), ``blockstore``
(layout-blind block compression), ``synthgen`` (TFloat/TSmall/TLarge
events), ``bench`` (experiments) and ``cli``.
"""

from .codec import Algorithm, CodecSpec, compress, decompress, list_codecs
from .container import open_reader, open_writer
from .errors import BasketIOError
from .kernels import IMPLEMENTATION as KERNELS

__all__ = [
    "Algorithm",
    "BasketIOError",
    "CodecSpec",
    "KERNELS",
    "compress",
    "decompress",
    "list_codecs",
    "open_reader",
    "open_writer",
]

__version__ = "0.1.0"
