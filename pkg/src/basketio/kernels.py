"""Select the compiled kernels when built, else the pure-Python ones.

Set ``BASKETIO_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("BASKETIO_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

IMPLEMENTATION: str = _impl.IMPLEMENTATION
deflate_each = _impl.deflate_each
inflate_each = _impl.inflate_each
check_rac_tables = _impl.check_rac_tables
