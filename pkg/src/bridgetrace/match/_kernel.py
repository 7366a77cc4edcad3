"""Kernel selection: compiled extension when built, pure Python otherwise.

Set BRIDGETRACE_PURE_PYTHON=1 to force the fallback (used by the benchmark
and the kernel-equivalence tests).
"""

from __future__ import annotations

import os

from bridgetrace.match import _scan_py

try:
    from bridgetrace.match import _scan as _compiled
except ImportError:
    _compiled = None


def compiled_available() -> bool:
    return _compiled is not None


def get_kernel():
    if _compiled is not None and os.environ.get("BRIDGETRACE_PURE_PYTHON") != "1":
        return _compiled.scan_window
    return _scan_py.scan_window


def kernel_name() -> str:
    return "compiled" if (_compiled is not None and os.environ.get("BRIDGETRACE_PURE_PYTHON") != "1") else "python"
