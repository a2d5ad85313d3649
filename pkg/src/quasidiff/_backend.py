"""Kernel backend selection: numba-jitted hot loops with a numpy fallback.

The accelerated path is used whenever numba imports cleanly.  Set the
environment variable ``QUASIDIFF_BACKEND=numpy`` to force the pure-numpy
fallback (useful for debugging and for the kernel benchmark), or
``QUASIDIFF_BACKEND=numba`` to fail hard if numba is unavailable.
"""

from __future__ import annotations

import os

ENV_VAR = "QUASIDIFF_BACKEND"

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - CI image always has numba
    HAVE_NUMBA = False


def _resolve(name: str) -> str:
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("QUASIDIFF_BACKEND=numba but numba is not importable")
        return "numba"
    if name == "numpy":
        return "numpy"
    if name in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    raise ValueError(f"unknown backend {name!r} (expected auto|numba|numpy)")


_ACTIVE = _resolve(os.environ.get(ENV_VAR, "auto").strip().lower())


def active_backend() -> str:
    """Name of the backend currently used by the kernel dispatchers."""
    return _ACTIVE


def set_backend(name: str) -> str:
    """Override the kernel backend at runtime; returns the previous name."""
    global _ACTIVE
    prev = _ACTIVE
    _ACTIVE = _resolve(name.strip().lower())
    return prev


def use_numba() -> bool:
    return _ACTIVE == "numba"
