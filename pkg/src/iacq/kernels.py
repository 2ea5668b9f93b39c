"""Kernel selection: compiled extension when available, pure Python otherwise.

Set ``IACQ_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
by tests that compare both implementations).
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("IACQ_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pykernels

IMPL: str = _impl.IMPL
scan_lines = _impl.scan_lines
walk_tree = _impl.walk_tree
