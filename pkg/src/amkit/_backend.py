"""Kernel backend chosen once at import.

The compiled module is used when it imports cleanly; setting
``AMKIT_PURE_PYTHON=1`` forces the numpy fallback. Callers go through the
wrappers below, which normalise dtypes and memory layout for both backends.
"""
from __future__ import annotations

import os

import numpy as np

from . import _ext_py

POWER = _ext_py.POWER
EXP = _ext_py.EXP

_compiled = None
if os.environ.get("AMKIT_PURE_PYTHON") != "1":
    try:
        from . import _ext as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None

NAME = "cython" if _compiled is not None else "numpy"


def _impl(backend: str | None):
    if backend is None:
        return _compiled if _compiled is not None else _ext_py
    if backend == "numpy":
        return _ext_py
    if backend == "cython":
        if _compiled is None:
            raise ImportError("compiled backend amkit._ext is not built")
        return _compiled
    raise ValueError(f"unknown backend {backend!r}")


def available() -> list[str]:
    return ["numpy"] + (["cython"] if _compiled is not None else [])


def async_sweep(xi, sigma, order, code: int, n: int, backend: str | None = None) -> np.ndarray:
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    sigma = np.array(sigma, dtype=np.float64, copy=True)
    order = np.ascontiguousarray(order, dtype=np.int64)
    return _impl(backend).async_sweep(xi, sigma, order, int(code), int(n))


def unstable_spins(xi, code: int, n: int, backend: str | None = None) -> int:
    xi = np.ascontiguousarray(xi, dtype=np.float64)
    return int(_impl(backend).unstable_spins(xi, int(code), int(n)))


def gauss_descent(V, X, a: float, scale: float, eta: float, steps: int, stop_tol: float,
                  mask, backend: str | None = None):
    V = np.ascontiguousarray(V, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=np.float64)
    return _impl(backend).gauss_descent(V, X, float(a), float(scale), float(eta), int(steps),
                                        float(stop_tol), mask)
