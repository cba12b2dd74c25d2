"""Selection between the numba kernels and the pure-numpy fallback.

The default backend is numba when it can be imported. Setting the
environment variable ``FUBIF_DISABLE_NUMBA=1`` forces the numpy path
for the whole process; individual calls may still pass ``backend=``.
"""
from __future__ import annotations

import importlib.util
import os

NUMBA = "numba"
NUMPY = "numpy"

HAVE_NUMBA = importlib.util.find_spec("numba") is not None


def numba_disabled() -> bool:
    return os.environ.get("FUBIF_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


def default_backend() -> str:
    if HAVE_NUMBA and not numba_disabled():
        return NUMBA
    return NUMPY


def resolve(backend: str | None = None) -> str:
    if backend is None:
        return default_backend()
    if backend not in (NUMBA, NUMPY):
        raise ValueError(f"unknown backend {backend!r}; expected 'numba' or 'numpy'")
    if backend == NUMBA and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
