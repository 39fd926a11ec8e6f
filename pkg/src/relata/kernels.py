"""Kernel dispatch: the compiled extension when available, else pure Python.

Set ``RELATA_PURE_PYTHON=1`` to force the fallback.
"""

import importlib
import os

from relata import _pykernels

_FORCE_PURE = os.environ.get("RELATA_PURE_PYTHON") == "1"

try:
    if _FORCE_PURE:
        raise ImportError("pure-Python kernels requested")
    from relata import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

scan_windows = _impl.scan_windows
adagrad_dense = _impl.adagrad_dense
adagrad_rows = _impl.adagrad_rows
ppmi_dense = _impl.ppmi_dense


def available_backends() -> dict:
    """Map backend name to kernel module for every backend that imports."""
    found = {"python": _pykernels}
    try:
        found["cython"] = importlib.import_module("relata._ckernels")
    except ImportError:
        pass
    return found
