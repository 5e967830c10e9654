"""Kernel backend selection.

Tries the compiled extension first and falls back to the pure-Python
implementation.  Set SGDTAIL_BACKEND=python to force the fallback (used
by the equivalence tests and the benchmark).  Both backends produce
bit-identical results; only speed differs.
"""

import os

from . import pyloop

_backend = None
_backend_name = None


def _select():
    global _backend, _backend_name
    forced = os.environ.get("SGDTAIL_BACKEND", "").strip().lower()
    if forced in ("python", "pyloop", "pure"):
        _backend, _backend_name = pyloop, "python"
        return
    try:
        from . import _fastloop

        _backend, _backend_name = _fastloop, "compiled"
    except ImportError:
        _backend, _backend_name = pyloop, "python"


_select()


def get_backend():
    return _backend


def backend_name() -> str:
    return _backend_name


def available_backends() -> dict:
    """All importable backends, keyed by name."""
    out = {"python": pyloop}
    try:
        from . import _fastloop

        out["compiled"] = _fastloop
    except ImportError:
        pass
    return out
