"""Exception hierarchy.

Every error carries a short machine-greppable ``code`` and the process exit
status the CLI maps it to (1 usage/range, 2 I/O, 3 data corruption).
"""

from __future__ import annotations


class BasketIOError(Exception):
    code = "E_USAGE"
    exit_status = 1


class UsageError(BasketIOError):
    pass


class UnsupportedLevel(UsageError):
    code = "E_LEVEL"


class CodecUnavailable(BasketIOError):
    code = "E_CODEC"


class InvalidCapacity(UsageError):
    pass


class InvalidBlockSize(UsageError):
    pass


class InvalidMix(UsageError):
    pass


class EmptyPayload(UsageError):
    pass


class WriterClosed(UsageError):
    code = "E_STATE"


class IndexOutOfRange(UsageError, IndexError):
    code = "E_RANGE"


class RangeOutOfBounds(UsageError, IndexError):
    code = "E_RANGE"


class IoFailure(BasketIOError, OSError):
    code = "E_IO"
    exit_status = 2


class CorruptFrame(BasketIOError):
    code = "E_CORRUPT"
    exit_status = 3


class LengthMismatch(CorruptFrame):
    pass


class BadMagic(CorruptFrame):
    pass


class CorruptFooter(CorruptFrame):
    pass
