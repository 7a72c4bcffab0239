"""Kernel backend selection.

On import, the compiled Cython extension is preferred when present; the
numpy implementation is the fallback. ``CTAGENT_KERNELS=numpy`` (or
``cython``) pins the choice, and ``use()`` swaps it at runtime, which the
benchmark and the cross-backend tests rely on.
"""
from __future__ import annotations

import os
from contextlib import contextmanager

from . import _kernels_py

_BACKENDS = {"numpy": _kernels_py}
try:
    from . import _kernels_cy  # compiled extension, may be absent

    _BACKENDS["cython"] = _kernels_cy
except ImportError:
    _kernels_cy = None


def _initial_backend():
    requested = os.environ.get("CTAGENT_KERNELS", "auto").lower()
    if requested in _BACKENDS:
        return _BACKENDS[requested]
    if requested not in ("auto", ""):
        raise ValueError(
            f"CTAGENT_KERNELS={requested!r} not available; have {sorted(_BACKENDS)}"
        )
    return _BACKENDS.get("cython", _kernels_py)


active = _initial_backend()


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str):
    return _BACKENDS[name]


def backend_name() -> str:
    return active.name


@contextmanager
def use(name: str):
    """Temporarily switch the active backend (not thread-safe)."""
    global active
    previous = active
    active = _BACKENDS[name]
    try:
        yield active
    finally:
        active = previous
