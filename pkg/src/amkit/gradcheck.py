"""Central finite differences and relative-error helpers."""
from __future__ import annotations

from typing import Callable

import numpy as np


def central_difference(f: Callable[[np.ndarray], float], x, h: float = 1e-5, order: int = 4) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` (any shape) by central differences.

    The step is relative: ``h * max(1, |x_i|)`` per coordinate. ``order`` 2
    uses the 3-point stencil, ``order`` 4 the 5-point one.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    x = np.array(x, dtype=np.float64, copy=True)
    g = np.empty_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)

    def at(i, value):
        flat[i] = value
        return f(x)

    for i in range(flat.size):
        step = h * max(1.0, abs(flat[i]))
        orig = flat[i]
        d1 = at(i, orig + step) - at(i, orig - step)
        if order == 2:
            gflat[i] = d1 / (2.0 * step)
        else:
            d2 = at(i, orig + 2.0 * step) - at(i, orig - 2.0 * step)
            gflat[i] = (8.0 * d1 - d2) / (12.0 * step)
        flat[i] = orig
    return g


def relative_error(a, b, floor: float = 1e-12) -> float:
    """``|a - b| / max(|a|, |b|, floor)`` in the Euclidean norm."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)


def check_gradient(f: Callable[[np.ndarray], float], grad, x, h: float = 1e-5, order: int = 4) -> float:
    """Relative error between an analytic gradient and central differences of ``f``."""
    return relative_error(grad, central_difference(f, x, h, order))


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
